// SPDX-License-Identifier: Apache-2.0
#pragma once

// The textual query language:
//
//   SELECT <db>.<metric>{k=v,...} RANGE <t0> <t1>
//   DERIVE metric=<tok> entity=<path> [unit=<u>] [db=<db>] RANGE <t0> <t1>
//   MATCH [system~"..."] [entity~"..."] [metric~"..."] [sensor~"..."]
//         [top=<k>] [min=<s>] RANGE <t0> <t1>
//
// Keywords are case-insensitive. Clauses of DERIVE and MATCH may come in any
// order; printing uses the order above. A MATCH payload is a
// whitespace-separated keyword list in which 'single quotes' keep spaces.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/reasoning.hpp"
#include "setsdb/similarity.hpp"
#include "setsdb/system.hpp"

namespace setsdb {

struct BasicQuery {
  SeriesKey key;
  Window window;

  bool operator==(const BasicQuery&) const = default;
};

struct ExactQuery {
  SemanticQuery query;

  bool operator==(const ExactQuery&) const = default;
};

struct SimilarityQuery {
  std::optional<KeywordSet> system;
  std::optional<KeywordSet> entity;
  std::optional<KeywordSet> metric;
  std::optional<KeywordSet> sensor;
  std::optional<std::size_t> top;
  std::optional<double> min;
  Window window;

  bool operator==(const SimilarityQuery&) const = default;

  SemanticVector vector() const;
  SimilarityConfig apply(SimilarityConfig cfg) const;
};

using Query = std::variant<BasicQuery, ExactQuery, SimilarityQuery>;

// Throws PositionedError(kQueryParseError).
Query parse_query(std::string_view text);
std::string print_query(const Query& q);

struct MatchOutput {
  Match match;
  std::vector<Sample> samples;
  std::vector<std::string> notes;
};

struct QueryResult {
  std::vector<Sample> samples;        // BQ, SEQ
  std::vector<MatchOutput> matches;   // SSQ
  std::vector<std::string> explanation;
  std::vector<std::string> notes;
  std::optional<MappedQuery> plan;    // SEQ
  std::optional<SeriesKey> materialized;
};

struct RunOptions {
  bool materialize = false;
};

// BQ reads the store directly; SEQ plans and executes; SSQ ranks matches
// and executes each match's plan.
QueryResult run_query(const Query& q, System& system, const RunOptions& options = {});

nlohmann::json query_result_to_json(const Query& q, const QueryResult& r);

}  // namespace setsdb
