// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setsdb/series.hpp"

namespace setsdb {

enum class Aggregator { kMean, kMin, kMax, kLast, kCount };

std::string_view aggregator_name(Aggregator agg);
Aggregator parse_aggregator(std::string_view name);

struct Rollup {
  Millis window = 0;
  Aggregator aggregator = Aggregator::kMean;
  std::optional<Millis> keep;  // nullopt = keep forever

  bool operator==(const Rollup&) const = default;
};

// Raw samples older than now - raw_duration move into the first rollup
// tier. Rollup windows that age past their keep duration move into the next
// tier, or are discarded from the last one.
struct RetentionPolicy {
  std::optional<Millis> raw_duration;  // nullopt = infinite
  std::vector<Rollup> rollups;
  std::string sharding;  // recorded, not executed

  bool operator==(const RetentionPolicy&) const = default;

  void validate() const;

  // `inf` or `<raw_ms>[,<window_ms>:<agg>:<keep_ms|inf>]...`
  static RetentionPolicy parse(std::string_view spec);
  std::string to_string() const;
};

// One output sample per non-empty window [n*w, (n+1)*w), stamped at the
// window start. Input must be numeric and sorted by timestamp.
std::vector<Sample> downsample(std::span<const Sample> points, Millis window, Aggregator agg);

struct DatabaseHandle {
  std::string name;
};

// The seam the semantic layer plans against. MemoryStore is the built-in
// implementation; adapters for external stores would implement this too.
class BaseStore {
 public:
  virtual ~BaseStore() = default;

  virtual DatabaseHandle create_database(const std::string& name,
                                         std::optional<RetentionPolicy> retention) = 0;
  virtual bool has_database(std::string_view name) const = 0;
  virtual std::vector<std::string> databases() const = 0;
  virtual RetentionPolicy retention(std::string_view db) const = 0;

  // Merges points into time order. The first write fixes the stream's kind;
  // a duplicate timestamp takes the later value. Returns points accepted.
  virtual std::size_t write_points(const SeriesKey& key, std::span<const Sample> points) = 0;

  // Samples with t0 <= timestamp < t1, ascending.
  virtual std::vector<Sample> read_range(const SeriesKey& key, Millis t0, Millis t1) const = 0;

  // Latest sample strictly before t, if any.
  virtual std::optional<Sample> last_before(const SeriesKey& key, Millis t) const = 0;

  virtual bool has_series(const SeriesKey& key) const = 0;
  virtual std::optional<ValueKind> series_kind(const SeriesKey& key) const = 0;
  virtual std::vector<SeriesKey> list_series(std::string_view db) const = 0;

  // Returns raw samples evicted plus rollup samples discarded for good.
  virtual std::size_t apply_retention(std::string_view db, Millis now) = 0;
};

// In-memory store. With a root directory, each database lives under
// <root>/<db>/ with one append-only line-protocol file per stream, replayed
// on construction.
class MemoryStore final : public BaseStore {
 public:
  MemoryStore();
  explicit MemoryStore(std::filesystem::path root);
  ~MemoryStore() override;

  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;

  DatabaseHandle create_database(const std::string& name,
                                 std::optional<RetentionPolicy> retention) override;
  bool has_database(std::string_view name) const override;
  std::vector<std::string> databases() const override;
  RetentionPolicy retention(std::string_view db) const override;

  std::size_t write_points(const SeriesKey& key, std::span<const Sample> points) override;
  std::vector<Sample> read_range(const SeriesKey& key, Millis t0, Millis t1) const override;
  std::optional<Sample> last_before(const SeriesKey& key, Millis t) const override;
  bool has_series(const SeriesKey& key) const override;
  std::optional<ValueKind> series_kind(const SeriesKey& key) const override;
  std::vector<SeriesKey> list_series(std::string_view db) const override;
  std::size_t apply_retention(std::string_view db, Millis now) override;

  // Total samples visible across all tiers of every stream in db.
  std::size_t stored_points(std::string_view db) const;

  struct Stream;

 private:
  struct Database;

  Database& database(std::string_view name);
  const Database& database(std::string_view name) const;
  const Stream& stream(const SeriesKey& key) const;
  void load_from_disk();
  void persist_stream(const SeriesKey& key, const Stream& s) const;

  std::optional<std::filesystem::path> root_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Database>, std::less<>> databases_;
};

}  // namespace setsdb
