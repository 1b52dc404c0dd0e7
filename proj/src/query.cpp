// SPDX-License-Identifier: Apache-2.0
#include "setsdb/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

class QueryParser {
 public:
  explicit QueryParser(std::string_view text) : text_(text) {}

  Query parse() {
    skip_space();
    const std::size_t at = pos_;
    const std::string verb = upper(word());
    Query q;
    if (verb == "SELECT") {
      q = parse_select();
    } else if (verb == "DERIVE") {
      q = parse_derive();
    } else if (verb == "MATCH") {
      q = parse_match();
    } else {
      fail(at, "expected SELECT, DERIVE or MATCH");
    }
    skip_space();
    if (pos_ != text_.size()) fail(pos_, "unexpected text after the time range");
    return q;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw PositionedError(ErrorCode::kQueryParseError, at, msg);
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  // A run of non-space characters.
  std::string_view word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  bool at_range() {
    skip_space();
    const std::size_t save = pos_;
    const bool yes = upper(word()) == "RANGE";
    pos_ = save;
    return yes;
  }

  Millis millis() {
    skip_space();
    const std::size_t at = pos_;
    const std::string_view w = word();
    Millis v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (w.empty() || ec != std::errc() || ptr != w.data() + w.size()) fail(at, "expected an integer timestamp");
    return v;
  }

  Window range() {
    skip_space();
    const std::size_t at = pos_;
    if (upper(word()) != "RANGE") fail(at, "expected RANGE");
    Window w;
    w.begin = millis();
    const std::size_t end_at = pos_;
    w.end = millis();
    if (w.begin >= w.end) fail(end_at, "RANGE needs t0 < t1");
    return w;
  }

  Query parse_select() {
    skip_space();
    const std::size_t at = pos_;
    const std::string_view w = word();
    if (w.empty()) fail(at, "expected <db>.<metric>{tags}");
    BasicQuery q;
    try {
      q.key = SeriesKey::parse(w);
      validate_key(q.key);
    } catch (const Error& e) {
      fail(at, std::string("bad series key: ") + e.what());
    }
    q.window = range();
    return q;
  }

  Query parse_derive() {
    ExactQuery out;
    SemanticQuery& q = out.query;
    bool have_metric = false;
    bool have_entity = false;
    std::set<std::string> seen;
    while (!at_range()) {
      skip_space();
      const std::size_t at = pos_;
      const std::string_view w = word();
      if (w.empty()) fail(at, "expected RANGE");
      const auto eq = w.find('=');
      if (eq == std::string_view::npos) fail(at, "expected <name>=<value>");
      const std::string name = upper(w.substr(0, eq));
      const std::string value(w.substr(eq + 1));
      if (value.empty()) fail(at + eq + 1, "empty value");
      if (!seen.insert(name).second) fail(at, "duplicate clause");
      if (name == "METRIC") {
        q.metric = value;
        have_metric = true;
      } else if (name == "ENTITY") {
        q.entity = value;
        have_entity = true;
      } else if (name == "UNIT") {
        q.desired_unit = value;
      } else if (name == "DB") {
        q.database = value;
      } else {
        fail(at, "unknown clause; expected metric, entity, unit or db");
      }
    }
    if (!have_metric) fail(pos_, "DERIVE needs metric=<name>");
    if (!have_entity) fail(pos_, "DERIVE needs entity=<path>");
    q.window = range();
    return out;
  }

  // Keywords between double quotes; pos_ is just past the opening quote.
  KeywordSet payload(std::size_t open_at) {
    KeywordSet out;
    while (true) {
      while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
      if (pos_ >= text_.size()) fail(open_at, "unterminated \"");
      if (text_[pos_] == '"') {
        ++pos_;
        break;
      }
      const std::size_t at = pos_;
      std::string kw;
      if (text_[pos_] == '\'') {
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '\'' && text_[pos_] != '"') kw.push_back(text_[pos_++]);
        if (pos_ >= text_.size() || text_[pos_] != '\'') fail(at, "unterminated '");
        ++pos_;
        if (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '"') {
          fail(pos_, "expected a space after a quoted keyword");
        }
        if (std::all_of(kw.begin(), kw.end(), is_space)) fail(at, "empty keyword");
      } else {
        while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '"') {
          if (text_[pos_] == '\'') fail(pos_, "quote inside a keyword");
          kw.push_back(text_[pos_++]);
        }
      }
      out.insert(std::move(kw));
    }
    if (out.empty()) fail(open_at, "empty keyword list");
    return out;
  }

  Query parse_match() {
    SimilarityQuery q;
    std::set<std::string> seen;
    while (!at_range()) {
      skip_space();
      const std::size_t at = pos_;
      std::string name;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) name.push_back(text_[pos_++]);
      if (name.empty()) fail(at, pos_ >= text_.size() ? "expected RANGE" : "expected a clause name");
      name = upper(name);
      if (!seen.insert(name).second) fail(at, "duplicate clause");
      if (pos_ >= text_.size()) fail(pos_, "expected '~' or '='");
      const char op = text_[pos_++];
      if (name == "TOP" || name == "MIN") {
        if (op != '=') fail(pos_ - 1, "expected '='");
        const std::size_t value_at = pos_;
        const std::string_view w = word();
        if (name == "TOP") {
          std::size_t k = 0;
          auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), k);
          if (w.empty() || ec != std::errc() || ptr != w.data() + w.size() || k == 0) {
            fail(value_at, "top needs a positive integer");
          }
          q.top = k;
        } else {
          double s = 0.0;
          auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), s);
          if (w.empty() || ec != std::errc() || ptr != w.data() + w.size() || !(s >= 0.0 && s <= 1.0)) {
            fail(value_at, "min needs a number in [0, 1]");
          }
          q.min = s;
        }
        continue;
      }
      std::optional<KeywordSet>* slot = nullptr;
      if (name == "SYSTEM") slot = &q.system;
      if (name == "ENTITY") slot = &q.entity;
      if (name == "METRIC") slot = &q.metric;
      if (name == "SENSOR") slot = &q.sensor;
      if (slot == nullptr) fail(at, "unknown clause; expected system, entity, metric, sensor, top or min");
      if (op != '~') fail(pos_ - 1, "expected '~'");
      if (pos_ >= text_.size() || text_[pos_] != '"') fail(pos_, "expected '\"'");
      const std::size_t open_at = pos_++;
      *slot = payload(open_at);
      if (pos_ < text_.size() && !is_space(text_[pos_])) fail(pos_, "expected a space after the closing quote");
    }
    if (!q.system && !q.entity && !q.metric && !q.sensor) {
      fail(pos_, "MATCH needs at least one of system~, entity~, metric~ or sensor~");
    }
    q.window = range();
    return q;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string print_payload(const KeywordSet& words) {
  std::string out = "\"";
  bool first = true;
  for (const auto& w : words) {
    if (!first) out += ' ';
    first = false;
    const bool quote = w.empty() || std::any_of(w.begin(), w.end(), is_space);
    out += quote ? "'" + w + "'" : w;
  }
  return out + "\"";
}

std::string print_range(Window w) {
  return "RANGE " + std::to_string(w.begin) + " " + std::to_string(w.end);
}

json sample_to_json(const Sample& s) {
  json value = s.is_numeric() ? json(std::get<double>(s.value)) : json(std::get<std::string>(s.value));
  return {{"timestamp", s.timestamp}, {"value", std::move(value)}};
}

json samples_to_json(const std::vector<Sample>& samples) {
  json out = json::array();
  for (const auto& s : samples) out.push_back(sample_to_json(s));
  return out;
}

std::string joined(const KeywordSet& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

}  // namespace

SemanticVector SimilarityQuery::vector() const {
  SemanticVector v;
  if (system) v.sys = SystemDescriptor{*system};
  v.entity = entity;
  if (metric) v.metric = joined(*metric);
  v.sensor = sensor;
  return v;
}

SimilarityConfig SimilarityQuery::apply(SimilarityConfig cfg) const {
  if (top) cfg.top_k = *top;
  if (min) cfg.min_score = *min;
  return cfg;
}

Query parse_query(std::string_view text) { return QueryParser(text).parse(); }

std::string print_query(const Query& q) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BasicQuery>) {
          return "SELECT " + v.key.to_string() + " " + print_range(v.window);
        } else if constexpr (std::is_same_v<T, ExactQuery>) {
          const SemanticQuery& s = v.query;
          std::string out = "DERIVE metric=" + s.metric + " entity=" + s.entity;
          if (s.desired_unit) out += " unit=" + *s.desired_unit;
          if (s.database) out += " db=" + *s.database;
          return out + " " + print_range(s.window);
        } else {
          std::string out = "MATCH";
          if (v.system) out += " system~" + print_payload(*v.system);
          if (v.entity) out += " entity~" + print_payload(*v.entity);
          if (v.metric) out += " metric~" + print_payload(*v.metric);
          if (v.sensor) out += " sensor~" + print_payload(*v.sensor);
          if (v.top) out += " top=" + std::to_string(*v.top);
          if (v.min) out += " min=" + format_double(*v.min);
          return out + " " + print_range(v.window);
        }
      },
      q);
}

QueryResult run_query(const Query& q, System& system, const RunOptions& options) {
  QueryResult result;
  if (const auto* bq = std::get_if<BasicQuery>(&q)) {
    result.samples = system.store().read_range(bq->key, bq->window.begin, bq->window.end);
    return result;
  }
  if (const auto* eq = std::get_if<ExactQuery>(&q)) {
    MappedQuery plan = plan_exact(eq->query, system.catalog(), system.ontology());
    Execution run = execute(plan, system.store());
    result.samples = run.samples;
    result.explanation = plan.explanation;
    result.notes = run.notes;
    if (options.materialize) {
      result.materialized = materialize(plan, run, system.store(), system.catalog());
      system.save();
    }
    result.plan = std::move(plan);
    return result;
  }
  const auto& sq = std::get<SimilarityQuery>(q);
  SimilarityResult ranked = plan_similarity(sq.vector(), sq.window, sq.apply(system.similarity_config()),
                                            system.catalog(), system.ontology());
  result.explanation = ranked.explanation;
  for (auto& m : ranked.matches) {
    MatchOutput out;
    if (m.plan) {
      try {
        Execution run = execute(*m.plan, system.store(), sq.window);
        out.samples = run.samples;
        out.notes = run.notes;
        if (options.materialize) materialize(*m.plan, run, system.store(), system.catalog());
      } catch (const Error& e) {
        out.notes.push_back(e.what());
      }
    } else {
      out.notes.push_back(m.plan_error);
    }
    out.match = std::move(m);
    result.matches.push_back(std::move(out));
  }
  if (options.materialize) system.save();
  return result;
}

json query_result_to_json(const Query& q, const QueryResult& r) {
  static constexpr const char* kKinds[] = {"basic", "exact", "similarity"};
  json out{{"kind", kKinds[q.index()]}, {"query", print_query(q)}};
  if (!std::holds_alternative<SimilarityQuery>(q)) out["samples"] = samples_to_json(r.samples);
  if (std::holds_alternative<SimilarityQuery>(q)) {
    json matches = json::array();
    for (const auto& m : r.matches) {
      json attrs = json::object();
      static constexpr const char* kNames[] = {"sys", "entity", "metric", "sensor"};
      for (std::size_t i = 0; i < 4; ++i) {
        attrs[kNames[i]] = m.match.attributes[i] ? json(*m.match.attributes[i]) : json(nullptr);
      }
      json entry{{"key", m.match.key.to_string()},
                 {"score", m.match.score},
                 {"attributes", std::move(attrs)},
                 {"samples", samples_to_json(m.samples)},
                 {"notes", m.notes}};
      if (m.match.plan) {
        entry["metric"] = m.match.plan->query.metric;
        entry["explanation"] = m.match.plan->explanation;
      }
      matches.push_back(std::move(entry));
    }
    out["matches"] = std::move(matches);
  }
  out["explanation"] = r.explanation;
  out["notes"] = r.notes;
  if (r.plan) out["plan"] = plan_to_json(*r.plan);
  if (r.materialized) out["materialized"] = r.materialized->to_string();
  return out;
}

}  // namespace setsdb
