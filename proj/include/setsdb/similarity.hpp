// SPDX-License-Identifier: Apache-2.0
#pragma once

// Similarity matchmaking over the semantic vector (system, entity, metric,
// sensor): per-attribute scores, renormalized weighted aggregation, graph
// edit distance between architectures, and a two-level keyword filter tree.

#include <array>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/ontology.hpp"
#include "setsdb/reasoning.hpp"
#include "setsdb/semantics.hpp"
#include "setsdb/text.hpp"

namespace setsdb {

using SystemDescriptor = std::variant<KeywordSet, std::shared_ptr<const SystemArchitecture>>;

// Keywords describing a system: id, entity concepts and descriptions.
KeywordSet system_keywords(const SystemArchitecture& arch);
KeywordSet descriptor_keywords(const SystemDescriptor& d);

struct SemanticVector {
  std::optional<SystemDescriptor> sys;
  std::optional<KeywordSet> entity;
  std::optional<std::string> metric;  // token; several words fall back to keyword matching
  std::optional<KeywordSet> sensor;

  bool empty() const { return !sys && !entity && !metric && !sensor; }
};

enum Attribute : std::size_t { kSys = 0, kEntity = 1, kMetric = 2, kSensor = 3 };
using AttributeScores = std::array<std::optional<double>, 4>;

struct GedCosts {
  double node_ins = 1.0;
  double node_del = 1.0;
  double node_sub = 1.0;
  double edge_ins = 1.0;
  double edge_del = 1.0;

  bool operator==(const GedCosts&) const = default;
};

struct SimilarityConfig {
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};  // indexed by Attribute
  double min_score = 0.5;
  std::size_t top_k = 10;
  // [database level, stream level]
  std::vector<double> tree_thresholds{0.0, 0.0};
  GedCosts ged_costs;

  bool operator==(const SimilarityConfig&) const = default;

  void validate() const;  // throws kSchemaError
};

nlohmann::json similarity_config_to_json(const SimilarityConfig& cfg);
// Missing members keep their defaults. Throws kSchemaError.
SimilarityConfig similarity_config_from_json(const nlohmann::json& j);

// Jaccard after canonicalizing each keyword through the metric concept
// pools (when an ontology is given). Two empty sets score 1.0.
double keyword_similarity(const KeywordSet& a, const KeywordSet& b, const OntologySet* ontology = nullptr);

// 1.0 when one metric's expansion contains the other, otherwise keyword
// similarity over name and description. Throws kUnknownMetric for ds.
double metric_similarity(std::string_view q, std::string_view ds, const OntologySet& ontology);

// Directed graph with keyword-set node labels and labelled edges.
struct LabeledGraph {
  std::vector<KeywordSet> nodes;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> edges;  // (from, to, label)
};

// Nodes in entity name order labelled with Entity::keywords(); one edge per
// relation.
LabeledGraph architecture_graph(const SystemArchitecture& arch);

struct GedResult {
  double distance = 0.0;
  bool approximate = false;
};

inline constexpr std::size_t kExactGedMaxNodes = 8;

// Exact by branch and bound when both graphs have at most kExactGedMaxNodes
// nodes; otherwise the cost of a bipartite-assignment edit path, an upper
// bound flagged approximate.
GedResult graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                              const OntologySet* ontology = nullptr);
// Always exact; exponential in the node count.
double exact_graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                                 const OntologySet* ontology = nullptr);
double bipartite_graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                                     const OntologySet* ontology = nullptr);

// Keyword mode unless both sides are architectures; graph mode scores
// 1 - GED / (|V1| + |V2| + |E1| + |E2|), clamped to [0, 1].
double system_similarity(const SystemDescriptor& q, const SystemDescriptor& db, const OntologySet& ontology,
                         const GedCosts& costs);

// Weighted mean over present attributes with positive weight. Throws
// kNoUsableAttributes when there are none.
double aggregate_similarity(const AttributeScores& scores, const SimilarityConfig& cfg);

// The semantic vector of a registered stream (sys is its database's
// architecture).
SemanticVector stream_semantic_vector(const StreamSemantics& sem, const Catalog& catalog);

struct FilterNode {
  std::string label;  // database name or canonical stream key
  KeywordSet keywords;
  std::optional<SeriesKey> key;  // leaves only
  std::vector<FilterNode> children;
};

struct FilterTree {
  FilterNode root;
};

// Root -> databases -> streams. A stream's keywords are those of its entity,
// metric and sensor attributes; a database's are its streams' keywords plus
// its system keywords.
FilterTree build_filter_tree(const Catalog& catalog);

// Drops database nodes scoring below tree_thresholds[0] against all query
// keywords and streams scoring below tree_thresholds[1] against the query's
// entity, metric and sensor keywords.
std::set<SeriesKey> prune(const FilterTree& tree, const SemanticVector& q, const SimilarityConfig& cfg,
                          const OntologySet& ontology);

struct Match {
  SeriesKey key;
  double score = 0.0;
  AttributeScores attributes;
  std::optional<MappedQuery> plan;
  std::string plan_error;  // when no plan could be built
};

struct SimilarityResult {
  std::vector<Match> matches;  // best first
  std::size_t candidates = 0;  // streams surviving the filter tree
  std::vector<std::string> explanation;
};

// Scores the given candidates and ranks them: system gate per database,
// aggregate >= min_score, descending score then key order, top_k.
SimilarityResult rank_candidates(const SemanticVector& q, const std::set<SeriesKey>& candidates, Window window,
                                 const SimilarityConfig& cfg, const Catalog& catalog, const OntologySet& ontology);

// prune() followed by rank_candidates(). Throws kNoUsableAttributes,
// kInvalidArgument.
SimilarityResult plan_similarity(const SemanticVector& q, Window window, const SimilarityConfig& cfg,
                                 const Catalog& catalog, const OntologySet& ontology);

}  // namespace setsdb
