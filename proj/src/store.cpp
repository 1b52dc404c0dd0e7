// SPDX-License-Identifier: Apache-2.0
#include "setsdb/store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"
#include "setsdb/kernels.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

Millis floor_div(Millis t, Millis w) {
  Millis q = t / w;
  if ((t % w != 0) && ((t < 0) != (w < 0))) --q;
  return q;
}

Millis window_start(Millis t, Millis w) { return floor_div(t, w) * w; }

Millis parse_ms(std::string_view text, std::string_view what) {
  Millis v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double aggregate(std::span<const double> values, Aggregator agg) {
  switch (agg) {
    case Aggregator::kMean: return kernels::mean(values);
    case Aggregator::kMin: return kernels::min(values);
    case Aggregator::kMax: return kernels::max(values);
    case Aggregator::kLast: return values.back();
    case Aggregator::kCount: return static_cast<double>(values.size());
  }
  return 0.0;
}

// Mergeable summary of one rollup window; exact for every Aggregator.
struct Accumulator {
  std::size_t count = 0;
  double pivot = 0.0;
  double shifted = 0.0;  // sum of (x - pivot)
  double min = 0.0;
  double max = 0.0;
  Millis last_ts = 0;
  double last = 0.0;

  void add(Millis ts, double v) {
    if (count == 0) {
      pivot = v;
      min = max = v;
      last_ts = ts;
      last = v;
    } else {
      min = std::min(min, v);
      max = std::max(max, v);
      if (ts >= last_ts) {
        last_ts = ts;
        last = v;
      }
    }
    shifted += v - pivot;
    ++count;
  }

  void merge(const Accumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    shifted += other.shifted + (other.pivot - pivot) * static_cast<double>(other.count);
    count += other.count;
    min = std::min(min, other.min);
    max = std::max(max, other.max);
    if (other.last_ts >= last_ts) {
      last_ts = other.last_ts;
      last = other.last;
    }
  }

  double value(Aggregator agg) const {
    switch (agg) {
      case Aggregator::kMean: return pivot + shifted / static_cast<double>(count);
      case Aggregator::kMin: return min;
      case Aggregator::kMax: return max;
      case Aggregator::kLast: return last;
      case Aggregator::kCount: return static_cast<double>(count);
    }
    return 0.0;
  }
};

void to_json(json& j, const Accumulator& a) {
  j = json{{"count", a.count}, {"pivot", a.pivot}, {"shifted", a.shifted}, {"min", a.min},
           {"max", a.max},     {"last_ts", a.last_ts}, {"last", a.last}};
}

void from_json(const json& j, Accumulator& a) {
  j.at("count").get_to(a.count);
  j.at("pivot").get_to(a.pivot);
  j.at("shifted").get_to(a.shifted);
  j.at("min").get_to(a.min);
  j.at("max").get_to(a.max);
  j.at("last_ts").get_to(a.last_ts);
  j.at("last").get_to(a.last);
}

json policy_to_json(const RetentionPolicy& p) {
  json rollups = json::array();
  for (const auto& r : p.rollups) {
    rollups.push_back({{"window", r.window},
                       {"aggregator", aggregator_name(r.aggregator)},
                       {"keep", r.keep ? json(*r.keep) : json(nullptr)}});
  }
  return {{"raw_duration", p.raw_duration ? json(*p.raw_duration) : json(nullptr)},
          {"rollups", rollups},
          {"sharding", p.sharding}};
}

RetentionPolicy policy_from_json(const json& j) {
  RetentionPolicy p;
  if (!j.at("raw_duration").is_null()) p.raw_duration = j.at("raw_duration").get<Millis>();
  for (const auto& r : j.at("rollups")) {
    Rollup rollup;
    rollup.window = r.at("window").get<Millis>();
    rollup.aggregator = parse_aggregator(r.at("aggregator").get<std::string>());
    if (!r.at("keep").is_null()) rollup.keep = r.at("keep").get<Millis>();
    p.rollups.push_back(rollup);
  }
  p.sharding = j.value("sharding", "");
  p.validate();
  return p;
}

std::string stream_file_stem(const SeriesKey& key) {
  // FNV-1a over the canonical key keeps file names short and stable.
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : key.to_string()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return key.metric + "-" + buf;
}

}  // namespace

std::string_view aggregator_name(Aggregator agg) {
  switch (agg) {
    case Aggregator::kMean: return "mean";
    case Aggregator::kMin: return "min";
    case Aggregator::kMax: return "max";
    case Aggregator::kLast: return "last";
    case Aggregator::kCount: return "count";
  }
  return "mean";
}

Aggregator parse_aggregator(std::string_view name) {
  if (name == "mean") return Aggregator::kMean;
  if (name == "min") return Aggregator::kMin;
  if (name == "max") return Aggregator::kMax;
  if (name == "last") return Aggregator::kLast;
  if (name == "count") return Aggregator::kCount;
  throw Error(ErrorCode::kInvalidArgument, "unknown aggregator '" + std::string(name) + "'");
}

void RetentionPolicy::validate() const {
  if (raw_duration && *raw_duration <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "raw_duration must be positive");
  }
  Millis previous = 0;
  for (const auto& r : rollups) {
    if (r.window <= previous) {
      throw Error(ErrorCode::kInvalidArgument, "rollup windows must be positive and strictly increasing");
    }
    if (r.keep && *r.keep <= 0) throw Error(ErrorCode::kInvalidArgument, "rollup keep must be positive");
    previous = r.window;
  }
}

RetentionPolicy RetentionPolicy::parse(std::string_view spec) {
  RetentionPolicy p;
  if (spec == "inf") return p;
  auto parts = split(spec, ',');
  if (parts[0] != "inf") p.raw_duration = parse_ms(parts[0], "raw duration");
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto fields = split(parts[i], ':');
    if (fields.size() != 3) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rollup must be <window_ms>:<agg>:<keep_ms|inf>, got '" + std::string(parts[i]) + "'");
    }
    Rollup r;
    r.window = parse_ms(fields[0], "rollup window");
    r.aggregator = parse_aggregator(fields[1]);
    if (fields[2] != "inf") r.keep = parse_ms(fields[2], "rollup keep");
    p.rollups.push_back(r);
  }
  p.validate();
  return p;
}

std::string RetentionPolicy::to_string() const {
  if (!raw_duration && rollups.empty()) return "inf";
  std::string out = raw_duration ? std::to_string(*raw_duration) : "inf";
  for (const auto& r : rollups) {
    out += "," + std::to_string(r.window) + ":" + std::string(aggregator_name(r.aggregator)) + ":" +
           (r.keep ? std::to_string(*r.keep) : "inf");
  }
  return out;
}

std::vector<Sample> downsample(std::span<const Sample> points, Millis window, Aggregator agg) {
  if (window <= 0) throw Error(ErrorCode::kInvalidArgument, "down-sampling window must be positive");
  std::vector<Sample> out;
  if (points.empty()) return out;
  for (const auto& p : points) {
    if (!p.is_numeric()) throw Error(ErrorCode::kKindMismatch, "cannot down-sample a symbolic stream");
  }
  std::vector<Sample> sorted;
  if (!std::is_sorted(points.begin(), points.end(),
                      [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; })) {
    sorted.assign(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
    points = sorted;
  }
  std::vector<double> values;
  std::size_t i = 0;
  while (i < points.size()) {
    const Millis start = window_start(points[i].timestamp, window);
    values.clear();
    while (i < points.size() && points[i].timestamp < start + window) {
      values.push_back(std::get<double>(points[i].value));
      ++i;
    }
    out.push_back(numeric_sample(start, aggregate(values, agg)));
  }
  return out;
}

struct MemoryStore::Stream {
  ValueKind kind = ValueKind::kNumeric;
  std::vector<Millis> ts;
  std::vector<double> num;
  std::vector<std::string> sym;
  Millis raw_floor = std::numeric_limits<Millis>::min();
  // tiers[i] holds windows of policy.rollups[i], keyed by window start
  std::vector<std::map<Millis, Accumulator>> tiers;

  std::size_t size() const { return ts.size(); }

  Sample at(std::size_t i) const {
    if (kind == ValueKind::kNumeric) return numeric_sample(ts[i], num[i]);
    return state_sample(ts[i], sym[i]);
  }

  void merge(std::span<const Sample> batch) {
    // Sort a copy by timestamp; stable so the later of two duplicates wins.
    std::vector<Sample> incoming(batch.begin(), batch.end());
    std::stable_sort(incoming.begin(), incoming.end(),
                     [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
    std::vector<Sample> dedup;
    dedup.reserve(incoming.size());
    for (auto& s : incoming) {
      if (!dedup.empty() && dedup.back().timestamp == s.timestamp) {
        dedup.back() = std::move(s);
      } else {
        dedup.push_back(std::move(s));
      }
    }
    if (ts.empty() || dedup.front().timestamp > ts.back()) {
      for (auto& s : dedup) push(std::move(s));
      return;
    }
    Stream merged;
    merged.kind = kind;
    merged.ts.reserve(ts.size() + dedup.size());
    std::size_t i = 0, j = 0;
    while (i < ts.size() || j < dedup.size()) {
      if (j >= dedup.size() || (i < ts.size() && ts[i] < dedup[j].timestamp)) {
        merged.push(at(i++));
      } else {
        if (i < ts.size() && ts[i] == dedup[j].timestamp) ++i;
        merged.push(std::move(dedup[j++]));
      }
    }
    ts = std::move(merged.ts);
    num = std::move(merged.num);
    sym = std::move(merged.sym);
  }

  void push(Sample s) {
    ts.push_back(s.timestamp);
    if (kind == ValueKind::kNumeric) {
      num.push_back(std::get<double>(s.value));
    } else {
      sym.push_back(std::move(std::get<std::string>(s.value)));
    }
  }

  // Removes raw samples with ts < cutoff; returns them as (ts, value) for numeric streams.
  std::size_t evict_before(Millis cutoff, std::vector<std::pair<Millis, double>>* evicted) {
    auto end = std::lower_bound(ts.begin(), ts.end(), cutoff);
    const auto n = static_cast<std::size_t>(end - ts.begin());
    if (evicted != nullptr && kind == ValueKind::kNumeric) {
      for (std::size_t i = 0; i < n; ++i) evicted->emplace_back(ts[i], num[i]);
    }
    ts.erase(ts.begin(), end);
    if (kind == ValueKind::kNumeric) {
      num.erase(num.begin(), num.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      sym.erase(sym.begin(), sym.begin() + static_cast<std::ptrdiff_t>(n));
    }
    raw_floor = std::max(raw_floor, cutoff);
    return n;
  }
};

struct MemoryStore::Database {
  RetentionPolicy retention;
  std::map<SeriesKey, Stream> streams;
};

MemoryStore::MemoryStore() = default;

MemoryStore::MemoryStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(*root_);
  load_from_disk();
}

MemoryStore::~MemoryStore() = default;

MemoryStore::Database& MemoryStore::database(std::string_view name) {
  auto it = databases_.find(name);
  if (it == databases_.end()) throw Error(ErrorCode::kUnknownDatabase, "no database '" + std::string(name) + "'");
  return *it->second;
}

const MemoryStore::Database& MemoryStore::database(std::string_view name) const {
  auto it = databases_.find(name);
  if (it == databases_.end()) throw Error(ErrorCode::kUnknownDatabase, "no database '" + std::string(name) + "'");
  return *it->second;
}

const MemoryStore::Stream& MemoryStore::stream(const SeriesKey& key) const {
  auto db = databases_.find(key.database);
  if (db != databases_.end()) {
    auto it = db->second->streams.find(key);
    if (it != db->second->streams.end()) return it->second;
  }
  throw Error(ErrorCode::kUnknownSeries, "no series " + key.to_string());
}

DatabaseHandle MemoryStore::create_database(const std::string& name,
                                            std::optional<RetentionPolicy> retention) {
  validate_name("database", name);
  if (name.find('.') != std::string::npos) {
    throw Error(ErrorCode::kInvalidName, "database '" + name + "' must not contain '.'");
  }
  RetentionPolicy policy = retention.value_or(RetentionPolicy{});
  policy.validate();
  std::unique_lock lock(mutex_);
  if (databases_.contains(name)) throw Error(ErrorCode::kDuplicateDatabase, "database '" + name + "' exists");
  auto db = std::make_unique<Database>();
  db->retention = policy;
  if (root_) {
    auto dir = *root_ / name / "streams";
    std::filesystem::create_directories(dir);
    std::ofstream(*root_ / name / "retention.json") << policy_to_json(policy).dump(2) << "\n";
  }
  databases_.emplace(name, std::move(db));
  return DatabaseHandle{name};
}

bool MemoryStore::has_database(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return databases_.find(name) != databases_.end();
}

std::vector<std::string> MemoryStore::databases() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, db] : databases_) out.push_back(name);
  return out;
}

RetentionPolicy MemoryStore::retention(std::string_view db) const {
  std::shared_lock lock(mutex_);
  return database(db).retention;
}

std::size_t MemoryStore::write_points(const SeriesKey& key, std::span<const Sample> points) {
  validate_key(key);
  std::unique_lock lock(mutex_);
  Database& db = database(key.database);
  if (points.empty()) return 0;
  const ValueKind kind = points.front().kind();
  for (const auto& p : points) {
    if (p.kind() != kind) throw Error(ErrorCode::kKindMismatch, "mixed sample kinds in one write to " + key.to_string());
  }
  auto it = db.streams.find(key);
  if (it != db.streams.end() && it->second.kind != kind) {
    throw Error(ErrorCode::kKindMismatch, key.to_string() + " holds " +
                                              std::string(value_kind_name(it->second.kind)) + " samples");
  }
  if (it == db.streams.end()) {
    Stream fresh;
    fresh.kind = kind;
    fresh.tiers.resize(db.retention.rollups.size());
    it = db.streams.emplace(key, std::move(fresh)).first;
  }
  it->second.merge(points);
  if (root_) {
    std::ofstream out(*root_ / key.database / "streams" / (stream_file_stem(key) + ".lp"), std::ios::app);
    for (const auto& p : points) out << format_line(LineRecord{key, p}) << "\n";
    if (!out) throw Error(ErrorCode::kIoError, "failed to append to stream file for " + key.to_string());
  }
  return points.size();
}

std::vector<Sample> MemoryStore::read_range(const SeriesKey& key, Millis t0, Millis t1) const {
  if (t0 > t1) throw Error(ErrorCode::kInvalidArgument, "read_range requires t0 <= t1");
  std::shared_lock lock(mutex_);
  const Stream& s = stream(key);
  const Database& db = database(key.database);
  std::vector<Sample> out;

  // Rollup tiers, coarsest first; raw samples last so they win ties.
  std::map<Millis, Sample> merged;
  for (std::size_t i = s.tiers.size(); i-- > 0;) {
    const Aggregator agg = db.retention.rollups[i].aggregator;
    for (auto w = s.tiers[i].lower_bound(t0); w != s.tiers[i].end() && w->first < t1; ++w) {
      merged.insert_or_assign(w->first, numeric_sample(w->first, w->second.value(agg)));
    }
  }
  auto lo = std::lower_bound(s.ts.begin(), s.ts.end(), t0);
  auto hi = std::lower_bound(lo, s.ts.end(), t1);
  if (merged.empty()) {
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (auto p = lo; p != hi; ++p) out.push_back(s.at(static_cast<std::size_t>(p - s.ts.begin())));
    return out;
  }
  for (auto p = lo; p != hi; ++p) {
    merged.insert_or_assign(*p, s.at(static_cast<std::size_t>(p - s.ts.begin())));
  }
  out.reserve(merged.size());
  for (auto& [t, sample] : merged) out.push_back(std::move(sample));
  return out;
}

std::optional<Sample> MemoryStore::last_before(const SeriesKey& key, Millis t) const {
  std::shared_lock lock(mutex_);
  const Stream& s = stream(key);
  auto it = std::lower_bound(s.ts.begin(), s.ts.end(), t);
  if (it != s.ts.begin()) return s.at(static_cast<std::size_t>(it - s.ts.begin()) - 1);
  // Fall back to the newest rollup window before t.
  const Database& db = database(key.database);
  for (std::size_t i = 0; i < s.tiers.size(); ++i) {
    auto w = s.tiers[i].lower_bound(t);
    if (w != s.tiers[i].begin()) {
      --w;
      return numeric_sample(w->first, w->second.value(db.retention.rollups[i].aggregator));
    }
  }
  return std::nullopt;
}

bool MemoryStore::has_series(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  auto db = databases_.find(key.database);
  return db != databases_.end() && db->second->streams.contains(key);
}

std::optional<ValueKind> MemoryStore::series_kind(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  auto db = databases_.find(key.database);
  if (db == databases_.end()) return std::nullopt;
  auto it = db->second->streams.find(key);
  if (it == db->second->streams.end()) return std::nullopt;
  return it->second.kind;
}

std::vector<SeriesKey> MemoryStore::list_series(std::string_view db) const {
  std::shared_lock lock(mutex_);
  std::vector<SeriesKey> out;
  for (const auto& [key, s] : database(db).streams) out.push_back(key);
  return out;
}

std::size_t MemoryStore::stored_points(std::string_view db) const {
  std::shared_lock lock(mutex_);
  std::size_t total = 0;
  for (const auto& [key, s] : database(db).streams) {
    std::vector<Millis> stamps(s.ts.begin(), s.ts.end());
    for (const auto& tier : s.tiers) {
      for (const auto& [start, acc] : tier) stamps.push_back(start);
    }
    std::sort(stamps.begin(), stamps.end());
    total += static_cast<std::size_t>(std::unique(stamps.begin(), stamps.end()) - stamps.begin());
  }
  return total;
}

std::size_t MemoryStore::apply_retention(std::string_view db_name, Millis now) {
  std::unique_lock lock(mutex_);
  Database& db = database(db_name);
  const RetentionPolicy& policy = db.retention;
  std::size_t dropped = 0;
  for (auto& [key, s] : db.streams) {
    bool changed = false;
    if (policy.raw_duration) {
      std::vector<std::pair<Millis, double>> evicted;
      const bool roll = !policy.rollups.empty() && s.kind == ValueKind::kNumeric;
      const std::size_t n = s.evict_before(now - *policy.raw_duration, roll ? &evicted : nullptr);
      dropped += n;
      changed = n > 0;
      if (roll) {
        const Millis w = policy.rollups[0].window;
        for (const auto& [t, v] : evicted) s.tiers[0][window_start(t, w)].add(t, v);
      }
    }
    for (std::size_t i = 0; i < s.tiers.size(); ++i) {
      const Rollup& r = policy.rollups[i];
      if (!r.keep) continue;
      const Millis cutoff = now - *r.keep;
      auto& tier = s.tiers[i];
      while (!tier.empty() && tier.begin()->first + r.window <= cutoff) {
        auto node = tier.extract(tier.begin());
        if (i + 1 < s.tiers.size()) {
          const Millis w = policy.rollups[i + 1].window;
          s.tiers[i + 1][window_start(node.key(), w)].merge(node.mapped());
        } else {
          ++dropped;
        }
        changed = true;
      }
    }
    if (changed) persist_stream(key, s);
  }
  return dropped;
}

void MemoryStore::persist_stream(const SeriesKey& key, const Stream& s) const {
  if (!root_) return;
  const auto dir = *root_ / key.database / "streams";
  const auto stem = stream_file_stem(key);
  {
    std::ofstream out(dir / (stem + ".lp"), std::ios::trunc);
    for (std::size_t i = 0; i < s.size(); ++i) out << format_line(LineRecord{key, s.at(i)}) << "\n";
  }
  json tiers = json::array();
  for (const auto& tier : s.tiers) {
    json windows = json::array();
    for (const auto& [start, acc] : tier) windows.push_back({{"start", start}, {"acc", acc}});
    tiers.push_back(windows);
  }
  json doc{{"key", key.to_string()}, {"raw_floor", s.raw_floor}, {"tiers", tiers}};
  std::ofstream(dir / (stem + ".tiers.json"), std::ios::trunc) << doc.dump() << "\n";
}

void MemoryStore::load_from_disk() {
  namespace fs = std::filesystem;
  for (const auto& entry : fs::directory_iterator(*root_)) {
    if (!entry.is_directory()) continue;
    const auto policy_file = entry.path() / "retention.json";
    if (!fs::exists(policy_file)) continue;
    auto db = std::make_unique<Database>();
    std::ifstream in(policy_file);
    db->retention = policy_from_json(json::parse(in));
    const std::string name = entry.path().filename().string();
    const auto dir = entry.path() / "streams";
    if (fs::exists(dir)) {
      std::vector<fs::path> files;
      for (const auto& f : fs::directory_iterator(dir)) files.push_back(f.path());
      std::sort(files.begin(), files.end());
      for (const auto& path : files) {
        if (path.extension() != ".lp") continue;
        std::ifstream lines(path);
        std::string line;
        std::map<SeriesKey, std::vector<Sample>> batches;
        while (std::getline(lines, line)) {
          if (line.empty()) continue;
          auto rec = parse_line(line);
          batches[rec.key].push_back(std::move(rec.sample));
        }
        for (auto& [key, samples] : batches) {
          auto [it, inserted] = db->streams.try_emplace(key);
          if (inserted) {
            it->second.kind = samples.front().kind();
            it->second.tiers.resize(db->retention.rollups.size());
          }
          it->second.merge(samples);
        }
      }
      for (const auto& path : files) {
        if (path.string().ends_with(".tiers.json")) {
          std::ifstream tin(path);
          json doc = json::parse(tin);
          SeriesKey key = SeriesKey::parse(doc.at("key").get<std::string>());
          auto [it, inserted] = db->streams.try_emplace(key);
          if (inserted) it->second.tiers.resize(db->retention.rollups.size());
          it->second.raw_floor = doc.at("raw_floor").get<Millis>();
          const auto& tiers = doc.at("tiers");
          for (std::size_t i = 0; i < tiers.size() && i < it->second.tiers.size(); ++i) {
            for (const auto& w : tiers[i]) {
              it->second.tiers[i][w.at("start").get<Millis>()] = w.at("acc").get<Accumulator>();
            }
          }
        }
      }
    }
    databases_.emplace(name, std::move(db));
  }
}

}  // namespace setsdb
