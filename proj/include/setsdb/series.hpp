// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace setsdb {

// Milliseconds since the Unix epoch, UTC.
using Millis = std::int64_t;

enum class ValueKind { kNumeric, kSymbolic };

std::string_view value_kind_name(ValueKind kind);

using Tags = std::map<std::string, std::string>;

// Physical identity of a stored stream.
struct SeriesKey {
  std::string database;
  std::string metric;
  Tags tags;

  auto operator<=>(const SeriesKey&) const = default;
  bool operator==(const SeriesKey&) const = default;

  // `db.metric{k=v,...}`, tags in key order; `{}` when untagged.
  std::string to_string() const;
  // Inverse of to_string(); braces are optional when untagged.
  static SeriesKey parse(std::string_view text);
};

// Throws kInvalidName when a component is empty or contains reserved
// characters (whitespace, ',', '=', '{', '}').
void validate_key(const SeriesKey& key);
void validate_name(std::string_view what, std::string_view name);

// `k1=v1,k2=v2` or `-` when empty.
std::string format_tags(const Tags& tags);
Tags parse_tags(std::string_view text);

using Value = std::variant<double, std::string>;

struct Sample {
  Millis timestamp = 0;
  Value value;

  bool operator==(const Sample&) const = default;

  bool is_numeric() const { return std::holds_alternative<double>(value); }
  ValueKind kind() const { return is_numeric() ? ValueKind::kNumeric : ValueKind::kSymbolic; }
  double number() const;
  const std::string& state() const;
};

inline Sample numeric_sample(Millis t, double v) { return Sample{t, v}; }
inline Sample state_sample(Millis t, std::string label) { return Sample{t, std::move(label)}; }

// Half-open [begin, end).
struct Window {
  Millis begin = 0;
  Millis end = 0;

  bool operator==(const Window&) const = default;
  Millis length() const { return end - begin; }
  bool contains(Millis t) const { return t >= begin && t < end; }
};

// One line of the ingestion protocol:
//   <db> <metric> <k1=v1,k2=v2|-> <timestamp_ms> <float | state:LABEL>
struct LineRecord {
  SeriesKey key;
  Sample sample;

  bool operator==(const LineRecord&) const = default;
};

LineRecord parse_line(std::string_view line);
std::string format_line(const LineRecord& record);
std::string format_value(const Value& value);

// Shortest round-trippable decimal form.
std::string format_double(double v);

}  // namespace setsdb
