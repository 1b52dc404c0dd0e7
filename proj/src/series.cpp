// SPDX-License-Identifier: Apache-2.0
#include "setsdb/series.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "setsdb/error.hpp"

namespace setsdb {

namespace {

bool is_reserved(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == '=' || c == '{' ||
         c == '}';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Millis parse_millis(std::string_view text) {
  Millis value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParseError, "bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

double parse_number(std::string_view text) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::kParseError, "bad numeric value '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string_view value_kind_name(ValueKind kind) {
  return kind == ValueKind::kNumeric ? "numeric" : "symbolic";
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidName: return "InvalidName";
    case ErrorCode::kDuplicateDatabase: return "DuplicateDatabase";
    case ErrorCode::kUnknownDatabase: return "UnknownDatabase";
    case ErrorCode::kUnknownSeries: return "UnknownSeries";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kCycleError: return "CycleError";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kExpressionParseError: return "ExpressionParseError";
    case ErrorCode::kUnknownMetric: return "UnknownMetric";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kUnknownUnit: return "UnknownUnit";
    case ErrorCode::kUnitMismatch: return "UnitMismatch";
    case ErrorCode::kUnboundMetric: return "UnboundMetric";
    case ErrorCode::kDivisionByZero: return "DivisionByZero";
    case ErrorCode::kUnsupportedHere: return "UnsupportedHere";
    case ErrorCode::kUnresolvedReference: return "UnresolvedReference";
    case ErrorCode::kDuplicateStream: return "DuplicateStream";
    case ErrorCode::kUnknownStream: return "UnknownStream";
    case ErrorCode::kUnderivable: return "Underivable";
    case ErrorCode::kNoUsableAttributes: return "NoUsableAttributes";
    case ErrorCode::kQueryParseError: return "QueryParseError";
  }
  return "Error";
}

void validate_name(std::string_view what, std::string_view name) {
  if (name.empty()) throw Error(ErrorCode::kInvalidName, std::string(what) + " must be non-empty");
  for (char c : name) {
    if (is_reserved(c)) {
      throw Error(ErrorCode::kInvalidName,
                  std::string(what) + " '" + std::string(name) + "' contains a reserved character");
    }
  }
}

void validate_key(const SeriesKey& key) {
  validate_name("database", key.database);
  validate_name("metric", key.metric);
  if (key.database.find('.') != std::string::npos) {
    throw Error(ErrorCode::kInvalidName, "database '" + key.database + "' must not contain '.'");
  }
  for (const auto& [k, v] : key.tags) {
    validate_name("tag key", k);
    validate_name("tag value", v);
  }
}

std::string format_tags(const Tags& tags) {
  if (tags.empty()) return "-";
  std::string out;
  for (const auto& [k, v] : tags) {
    if (!out.empty()) out += ',';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

Tags parse_tags(std::string_view text) {
  Tags tags;
  if (text == "-" || text.empty()) return tags;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view pair = text.substr(start, comma - start);
    std::size_t eq = pair.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == pair.size()) {
      throw Error(ErrorCode::kParseError, "bad tag '" + std::string(pair) + "'");
    }
    std::string key(pair.substr(0, eq));
    std::string value(pair.substr(eq + 1));
    validate_name("tag key", key);
    validate_name("tag value", value);
    if (!tags.emplace(std::move(key), std::move(value)).second) {
      throw Error(ErrorCode::kParseError, "duplicate tag key in '" + std::string(text) + "'");
    }
    start = comma + 1;
  }
  return tags;
}

std::string SeriesKey::to_string() const {
  std::string out = database + "." + metric + "{";
  if (!tags.empty()) out += format_tags(tags);
  out += "}";
  return out;
}

SeriesKey SeriesKey::parse(std::string_view text) {
  SeriesKey key;
  std::size_t dot = text.find('.');
  if (dot == std::string_view::npos) {
    throw Error(ErrorCode::kParseError, "series key '" + std::string(text) + "' lacks '<db>.'");
  }
  key.database = std::string(text.substr(0, dot));
  const std::size_t brace = text.find('{', dot);
  if (brace == std::string_view::npos) {
    key.metric = std::string(text.substr(dot + 1));
  } else {
    if (text.back() != '}') {
      throw Error(ErrorCode::kParseError, "series key '" + std::string(text) + "' has unclosed '{'");
    }
    key.metric = std::string(text.substr(dot + 1, brace - dot - 1));
    key.tags = parse_tags(text.substr(brace + 1, text.size() - brace - 2));
  }
  validate_key(key);
  return key;
}

double Sample::number() const {
  if (const double* v = std::get_if<double>(&value)) return *v;
  throw Error(ErrorCode::kKindMismatch, "expected a numeric sample at t=" + std::to_string(timestamp));
}

const std::string& Sample::state() const {
  if (const std::string* v = std::get_if<std::string>(&value)) return *v;
  throw Error(ErrorCode::kKindMismatch, "expected a state sample at t=" + std::to_string(timestamp));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_value(const Value& value) {
  if (const double* v = std::get_if<double>(&value)) return format_double(*v);
  return "state:" + std::get<std::string>(value);
}

LineRecord parse_line(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.size() != 5) {
    throw Error(ErrorCode::kParseError,
                "expected 5 fields, got " + std::to_string(fields.size()) + " in '" + std::string(line) + "'");
  }
  LineRecord rec;
  rec.key.database = std::string(fields[0]);
  rec.key.metric = std::string(fields[1]);
  rec.key.tags = parse_tags(fields[2]);
  validate_key(rec.key);
  rec.sample.timestamp = parse_millis(fields[3]);
  std::string_view value = fields[4];
  if (value.starts_with("state:")) {
    std::string label(value.substr(6));
    if (label.empty()) throw Error(ErrorCode::kParseError, "empty state label");
    rec.sample.value = std::move(label);
  } else {
    rec.sample.value = parse_number(value);
  }
  return rec;
}

std::string format_line(const LineRecord& record) {
  std::ostringstream out;
  out << record.key.database << ' ' << record.key.metric << ' ' << format_tags(record.key.tags) << ' '
      << record.sample.timestamp << ' ' << format_value(record.sample.value);
  return out.str();
}

}  // namespace setsdb
