// SPDX-License-Identifier: Apache-2.0
#include "setsdb/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

constexpr std::array<const char*, 4> kAttributeNames = {"sys", "entity", "metric", "sensor"};

KeywordSet canonical(const KeywordSet& in, const OntologySet* ontology) {
  KeywordSet out;
  for (const auto& k : in) {
    std::string c = ontology ? ontology->canonical_keyword(k) : normalize_token(k);
    if (!c.empty()) out.insert(std::move(c));
  }
  return out;
}

double jaccard(const KeywordSet& a, const KeywordSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& k : a) common += b.count(k);
  const std::size_t total = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

// Edge labels between each ordered node pair.
using Adjacency = std::vector<std::vector<std::vector<std::string>>>;

Adjacency adjacency(const LabeledGraph& g) {
  Adjacency adj(g.nodes.size(), std::vector<std::vector<std::string>>(g.nodes.size()));
  for (const auto& [u, v, l] : g.edges) {
    if (u >= g.nodes.size() || v >= g.nodes.size()) {
      throw Error(ErrorCode::kInvalidArgument, "edge endpoint out of range");
    }
    adj[u][v].push_back(l);  // edges are a sorted set, so labels stay sorted
  }
  return adj;
}

// Cost of turning labels `a` into labels `b` on one ordered node pair.
double pair_cost(const std::vector<std::string>& a, const std::vector<std::string>& b, const GedCosts& c) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(a.size() - common) * c.edge_del + static_cast<double>(b.size() - common) * c.edge_ins;
}

const std::vector<std::string> kNoLabels;

struct GedProblem {
  GedProblem(const LabeledGraph& a, const LabeledGraph& b, const GedCosts& c, const OntologySet* ont)
      : g1(a), g2(b), costs(c), adj1(adjacency(a)), adj2(adjacency(b)) {
    std::vector<KeywordSet> l1;
    std::vector<KeywordSet> l2;
    for (const auto& n : a.nodes) l1.push_back(canonical(n, ont));
    for (const auto& n : b.nodes) l2.push_back(canonical(n, ont));
    sub.assign(a.nodes.size(), std::vector<double>(b.nodes.size()));
    for (std::size_t i = 0; i < l1.size(); ++i) {
      for (std::size_t j = 0; j < l2.size(); ++j) sub[i][j] = c.node_sub * (1.0 - jaccard(l1[i], l2[j]));
    }
  }

  const std::vector<std::string>& labels2(std::size_t fu, std::size_t fv) const {
    if (fu == kEps || fv == kEps) return kNoLabels;
    return adj2[fu][fv];
  }

  // Node and edge cost added by mapping node k to f[k], given f[0..k-1].
  double step_cost(const std::vector<std::size_t>& f, std::size_t k) const {
    double cost = f[k] == kEps ? costs.node_del : sub[k][f[k]];
    for (std::size_t u = 0; u < k; ++u) {
      cost += pair_cost(adj1[u][k], labels2(f[u], f[k]), costs);
      cost += pair_cost(adj1[k][u], labels2(f[k], f[u]), costs);
    }
    cost += pair_cost(adj1[k][k], labels2(f[k], f[k]), costs);
    return cost;
  }

  // Insertions for the target nodes and edges left uncovered by f.
  double completion_cost(const std::vector<std::size_t>& f) const {
    std::vector<bool> used(g2.nodes.size(), false);
    for (auto t : f) {
      if (t != kEps) used[t] = true;
    }
    double cost = 0.0;
    for (std::size_t j = 0; j < used.size(); ++j) {
      if (!used[j]) cost += costs.node_ins;
    }
    for (const auto& [u, v, l] : g2.edges) {
      if (!used[u] || !used[v]) cost += costs.edge_ins;
    }
    return cost;
  }

  double mapping_cost(const std::vector<std::size_t>& f) const {
    double cost = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) cost += step_cost(f, k);
    return cost + completion_cost(f);
  }

  static constexpr std::size_t kEps = std::numeric_limits<std::size_t>::max();

  const LabeledGraph& g1;
  const LabeledGraph& g2;
  GedCosts costs;
  Adjacency adj1;
  Adjacency adj2;
  std::vector<std::vector<double>> sub;
};

// Minimum-cost perfect assignment on a square matrix (shortest augmenting
// path with potentials). Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0);
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

std::vector<std::size_t> bipartite_mapping(const GedProblem& pb) {
  const std::size_t n1 = pb.g1.nodes.size();
  const std::size_t n2 = pb.g2.nodes.size();
  const std::size_t n = n1 + n2;
  if (n1 == 0) return {};
  // Large but finite, so the potentials stay well-defined.
  const double forbidden = 1e12;

  auto incident = [](const Adjacency& adj, std::size_t x) {
    std::map<std::pair<int, std::string>, std::size_t> out;
    for (std::size_t y = 0; y < adj.size(); ++y) {
      for (const auto& l : adj[x][y]) ++out[{0, l}];
      for (const auto& l : adj[y][x]) ++out[{1, l}];
    }
    return out;
  };
  std::vector<std::map<std::pair<int, std::string>, std::size_t>> inc1;
  std::vector<std::map<std::pair<int, std::string>, std::size_t>> inc2;
  for (std::size_t i = 0; i < n1; ++i) inc1.push_back(incident(pb.adj1, i));
  for (std::size_t j = 0; j < n2; ++j) inc2.push_back(incident(pb.adj2, j));
  auto degree = [](const auto& m) {
    std::size_t d = 0;
    for (const auto& [k, c] : m) d += c;
    return d;
  };

  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      std::size_t common = 0;
      for (const auto& [k, c] : inc1[i]) {
        if (auto it = inc2[j].find(k); it != inc2[j].end()) common += std::min(c, it->second);
      }
      cost[i][j] = pb.sub[i][j] + static_cast<double>(degree(inc1[i]) - common) * pb.costs.edge_del +
                   static_cast<double>(degree(inc2[j]) - common) * pb.costs.edge_ins;
    }
    for (std::size_t k = 0; k < n1; ++k) {
      cost[i][n2 + k] =
          k == i ? pb.costs.node_del + static_cast<double>(degree(inc1[i])) * pb.costs.edge_del : forbidden;
    }
  }
  for (std::size_t j = 0; j < n2; ++j) {
    for (std::size_t k = 0; k < n2; ++k) {
      cost[n1 + j][k] =
          k == j ? pb.costs.node_ins + static_cast<double>(degree(inc2[j])) * pb.costs.edge_ins : forbidden;
    }
  }
  const auto assignment = hungarian(cost);
  std::vector<std::size_t> f(n1);
  for (std::size_t i = 0; i < n1; ++i) f[i] = assignment[i] < n2 ? assignment[i] : GedProblem::kEps;
  return f;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const GedProblem& pb) : pb_(pb) {
    best_ = pb.mapping_cost(bipartite_mapping(pb));
    f_.assign(pb.g1.nodes.size(), GedProblem::kEps);
    used_.assign(pb.g2.nodes.size(), false);
  }

  double solve() {
    search(0, 0.0);
    return best_;
  }

 private:
  double remaining_bound(std::size_t k) const {
    const std::size_t rem1 = pb_.g1.nodes.size() - k;
    const std::size_t rem2 = static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
    if (rem2 > rem1) return static_cast<double>(rem2 - rem1) * pb_.costs.node_ins;
    return static_cast<double>(rem1 - rem2) * pb_.costs.node_del;
  }

  void search(std::size_t k, double cost) {
    if (k == f_.size()) {
      best_ = std::min(best_, cost + pb_.completion_cost(f_));
      return;
    }
    if (cost + remaining_bound(k) >= best_) return;
    for (std::size_t t = 0; t < used_.size(); ++t) {
      if (used_[t]) continue;
      used_[t] = true;
      f_[k] = t;
      search(k + 1, cost + pb_.step_cost(f_, k));
      used_[t] = false;
    }
    f_[k] = GedProblem::kEps;
    search(k + 1, cost + pb_.step_cost(f_, k));
  }

  const GedProblem& pb_;
  double best_;
  std::vector<std::size_t> f_;
  std::vector<bool> used_;
};

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_number()) throw Error(ErrorCode::kSchemaError, std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

}  // namespace

KeywordSet system_keywords(const SystemArchitecture& arch) {
  KeywordSet out = extract_keywords(arch.system_id());
  for (const auto& [name, e] : arch.entities()) {
    add_keywords(out, e.concept_name);
    add_keywords(out, e.description);
  }
  return out;
}

KeywordSet descriptor_keywords(const SystemDescriptor& d) {
  if (const auto* k = std::get_if<KeywordSet>(&d)) return *k;
  const auto& arch = std::get<std::shared_ptr<const SystemArchitecture>>(d);
  return arch ? system_keywords(*arch) : KeywordSet{};
}

void SimilarityConfig::validate() const {
  bool positive = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kSchemaError, "weights must be non-negative");
    positive = positive || w > 0.0;
  }
  if (!positive) throw Error(ErrorCode::kSchemaError, "at least one weight must be positive");
  if (!(min_score >= 0.0 && min_score <= 1.0)) throw Error(ErrorCode::kSchemaError, "min_score must be in [0, 1]");
  if (top_k == 0) throw Error(ErrorCode::kSchemaError, "top_k must be positive");
  if (tree_thresholds.size() < 2) {
    throw Error(ErrorCode::kSchemaError, "tree_thresholds needs a database-level and a stream-level value");
  }
  for (double t : tree_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::kSchemaError, "tree thresholds must be in [0, 1]");
  }
  for (double c : {ged_costs.node_ins, ged_costs.node_del, ged_costs.node_sub, ged_costs.edge_ins, ged_costs.edge_del}) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorCode::kSchemaError, "GED costs must be non-negative");
  }
}

json similarity_config_to_json(const SimilarityConfig& cfg) {
  json weights = json::object();
  for (std::size_t i = 0; i < 4; ++i) weights[kAttributeNames[i]] = cfg.weights[i];
  return {{"weights", std::move(weights)},
          {"min_score", cfg.min_score},
          {"top_k", cfg.top_k},
          {"tree_thresholds", cfg.tree_thresholds},
          {"ged_costs",
           {{"node_ins", cfg.ged_costs.node_ins},
            {"node_del", cfg.ged_costs.node_del},
            {"node_sub", cfg.ged_costs.node_sub},
            {"edge_ins", cfg.ged_costs.edge_ins},
            {"edge_del", cfg.ged_costs.edge_del}}}};
}

SimilarityConfig similarity_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "similarity config must be an object");
  SimilarityConfig cfg;
  try {
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      for (const auto& [k, v] : w.items()) {
        auto it = std::find(kAttributeNames.begin(), kAttributeNames.end(), k);
        if (it == kAttributeNames.end()) throw Error(ErrorCode::kSchemaError, "unknown weight '" + k + "'");
      }
      for (std::size_t i = 0; i < 4; ++i) {
        if (auto x = optional_number(w, kAttributeNames[i])) cfg.weights[i] = *x;
      }
    }
    if (auto x = optional_number(j, "min_score")) cfg.min_score = *x;
    if (j.contains("top_k")) {
      if (!j.at("top_k").is_number_integer() || j.at("top_k").get<long long>() <= 0) {
        throw Error(ErrorCode::kSchemaError, "top_k must be a positive integer");
      }
      cfg.top_k = j.at("top_k").get<std::size_t>();
    }
    if (j.contains("tree_thresholds")) cfg.tree_thresholds = j.at("tree_thresholds").get<std::vector<double>>();
    if (j.contains("ged_costs")) {
      const json& c = j.at("ged_costs");
      if (auto x = optional_number(c, "node_ins")) cfg.ged_costs.node_ins = *x;
      if (auto x = optional_number(c, "node_del")) cfg.ged_costs.node_del = *x;
      if (auto x = optional_number(c, "node_sub")) cfg.ged_costs.node_sub = *x;
      if (auto x = optional_number(c, "edge_ins")) cfg.ged_costs.edge_ins = *x;
      if (auto x = optional_number(c, "edge_del")) cfg.ged_costs.edge_del = *x;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed similarity config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double keyword_similarity(const KeywordSet& a, const KeywordSet& b, const OntologySet* ontology) {
  return jaccard(canonical(a, ontology), canonical(b, ontology));
}

double metric_similarity(std::string_view q, std::string_view ds, const OntologySet& ontology) {
  const MetricNode& target = ontology.resolve_metric(ds);
  KeywordSet q_words;
  if (const MetricNode* query = ontology.find_metric(q)) {
    if (query->name == target.name) return 1.0;
    if (ontology.expand_metric(query->name).contains(target.name)) return 1.0;
    if (ontology.expand_metric(target.name).contains(query->name)) return 1.0;
    q_words = extract_keywords(query->name);
    add_keywords(q_words, query->description);
  } else {
    q_words = extract_keywords(q);
  }
  KeywordSet ds_words = extract_keywords(target.name);
  add_keywords(ds_words, target.description);
  return keyword_similarity(q_words, ds_words, &ontology);
}

LabeledGraph architecture_graph(const SystemArchitecture& arch) {
  LabeledGraph g;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& [name, e] : arch.entities()) {
    index.emplace(name, g.nodes.size());
    g.nodes.push_back(e.keywords());
  }
  for (const auto& r : arch.relations()) {
    g.edges.emplace(index.at(r.from), index.at(r.to), std::string(relation_label_name(r.label)));
  }
  return g;
}

double exact_graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                                 const OntologySet* ontology) {
  GedProblem pb(g1, g2, costs, ontology);
  return BranchAndBound(pb).solve();
}

double bipartite_graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                                     const OntologySet* ontology) {
  GedProblem pb(g1, g2, costs, ontology);
  return pb.mapping_cost(bipartite_mapping(pb));
}

GedResult graph_edit_distance(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& costs,
                              const OntologySet* ontology) {
  if (g1.nodes.size() <= kExactGedMaxNodes && g2.nodes.size() <= kExactGedMaxNodes) {
    return {exact_graph_edit_distance(g1, g2, costs, ontology), false};
  }
  return {bipartite_graph_edit_distance(g1, g2, costs, ontology), true};
}

double system_similarity(const SystemDescriptor& q, const SystemDescriptor& db, const OntologySet& ontology,
                         const GedCosts& costs) {
  const auto* qa = std::get_if<std::shared_ptr<const SystemArchitecture>>(&q);
  const auto* da = std::get_if<std::shared_ptr<const SystemArchitecture>>(&db);
  if (qa && da && *qa && *da) {
    const LabeledGraph g1 = architecture_graph(**qa);
    const LabeledGraph g2 = architecture_graph(**da);
    const double size =
        static_cast<double>(g1.nodes.size() + g2.nodes.size() + g1.edges.size() + g2.edges.size());
    if (size == 0.0) return 1.0;
    const double ged = graph_edit_distance(g1, g2, costs, &ontology).distance;
    return std::clamp(1.0 - ged / size, 0.0, 1.0);
  }
  return keyword_similarity(descriptor_keywords(q), descriptor_keywords(db), &ontology);
}

double aggregate_similarity(const AttributeScores& scores, const SimilarityConfig& cfg) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i] || cfg.weights[i] <= 0.0) continue;
    num += cfg.weights[i] * *scores[i];
    den += cfg.weights[i];
  }
  if (den == 0.0) throw Error(ErrorCode::kNoUsableAttributes, "no attribute is both present and weighted");
  return std::clamp(num / den, 0.0, 1.0);
}

SemanticVector stream_semantic_vector(const StreamSemantics& sem, const Catalog& catalog) {
  const DatabaseSemantics db = catalog.database(sem.key.database);
  SemanticVector v;
  v.sys = SystemDescriptor{db.architecture};
  KeywordSet entity = extract_keywords(sem.entity);
  for (const auto& k : db.architecture->entity(sem.entity).keywords()) entity.insert(k);
  v.entity = std::move(entity);
  v.metric = sem.metric_ref;
  if (sem.sensor_entity) {
    KeywordSet sensor = extract_keywords(*sem.sensor_entity);
    for (const auto& k : db.architecture->entity(*sem.sensor_entity).keywords()) sensor.insert(k);
    v.sensor = std::move(sensor);
  }
  return v;
}

namespace {

// Keywords of the entity, metric and sensor attributes.
KeywordSet stream_level_keywords(const SemanticVector& v) {
  KeywordSet out;
  if (v.entity) out.insert(v.entity->begin(), v.entity->end());
  if (v.metric) add_keywords(out, *v.metric);
  if (v.sensor) out.insert(v.sensor->begin(), v.sensor->end());
  return out;
}

std::string format_score(const std::optional<double>& s) { return s ? format_double(*s) : "-"; }

}  // namespace

FilterTree build_filter_tree(const Catalog& catalog) {
  FilterTree tree;
  tree.root.label = "root";
  for (const auto& db_name : catalog.databases()) {
    const DatabaseSemantics db = catalog.database(db_name);
    FilterNode node;
    node.label = db_name;
    node.keywords = system_keywords(*db.architecture);
    for (const auto& sem : catalog.streams_in(db_name)) {
      FilterNode leaf;
      leaf.label = sem.key.to_string();
      leaf.key = sem.key;
      leaf.keywords = stream_level_keywords(stream_semantic_vector(sem, catalog));
      node.keywords.insert(leaf.keywords.begin(), leaf.keywords.end());
      node.children.push_back(std::move(leaf));
    }
    tree.root.keywords.insert(node.keywords.begin(), node.keywords.end());
    tree.root.children.push_back(std::move(node));
  }
  return tree;
}

std::set<SeriesKey> prune(const FilterTree& tree, const SemanticVector& q, const SimilarityConfig& cfg,
                          const OntologySet& ontology) {
  if (cfg.tree_thresholds.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "tree_thresholds must cover the database and stream levels");
  }
  const KeywordSet stream_words = stream_level_keywords(q);
  KeywordSet all_words = stream_words;
  if (q.sys) {
    const KeywordSet sys = descriptor_keywords(*q.sys);
    all_words.insert(sys.begin(), sys.end());
  }
  // A level with no query keywords to compare carries no evidence and prunes nothing.
  std::set<SeriesKey> out;
  for (const auto& db : tree.root.children) {
    if (!all_words.empty() && keyword_similarity(all_words, db.keywords, &ontology) < cfg.tree_thresholds[0]) continue;
    for (const auto& leaf : db.children) {
      if (!stream_words.empty() &&
          keyword_similarity(stream_words, leaf.keywords, &ontology) < cfg.tree_thresholds[1]) {
        continue;
      }
      out.insert(*leaf.key);
    }
  }
  return out;
}

SimilarityResult rank_candidates(const SemanticVector& q, const std::set<SeriesKey>& candidates, Window window,
                                 const SimilarityConfig& cfg, const Catalog& catalog, const OntologySet& ontology) {
  cfg.validate();
  if (window.begin >= window.end) throw Error(ErrorCode::kInvalidArgument, "query window must satisfy t0 < t1");
  AttributeScores presence{q.sys ? std::optional<double>(0.0) : std::nullopt,
                           q.entity ? std::optional<double>(0.0) : std::nullopt,
                           q.metric ? std::optional<double>(0.0) : std::nullopt,
                           q.sensor ? std::optional<double>(0.0) : std::nullopt};
  aggregate_similarity(presence, cfg);  // throws when the query has nothing usable

  SimilarityResult result;
  result.candidates = candidates.size();
  std::vector<std::pair<std::string, std::string>> lines;
  lines.push_back({"similarity", std::to_string(candidates.size()) + " candidate streams after filter-tree pruning"});

  std::map<std::string, std::vector<SeriesKey>> by_db;
  for (const auto& key : candidates) by_db[key.database].push_back(key);

  std::vector<Match> matches;
  for (const auto& [db_name, keys] : by_db) {
    const DatabaseSemantics db = catalog.database(db_name);
    std::optional<double> sys;
    if (q.sys) {
      sys = system_similarity(*q.sys, SystemDescriptor{db.architecture}, ontology, cfg.ged_costs);
      if (*sys < cfg.min_score) {
        lines.push_back({"similarity", "database " + db_name + " gated out: system score " + format_double(*sys) +
                                           " < " + format_double(cfg.min_score)});
        continue;
      }
    }
    for (const auto& key : keys) {
      const StreamSemantics sem = catalog.get_semantics(key);
      const SemanticVector ds = stream_semantic_vector(sem, catalog);
      Match m;
      m.key = key;
      m.attributes[kSys] = sys;
      if (q.entity) m.attributes[kEntity] = keyword_similarity(*q.entity, *ds.entity, &ontology);
      if (q.metric) m.attributes[kMetric] = metric_similarity(*q.metric, *ds.metric, ontology);
      if (q.sensor && ds.sensor) m.attributes[kSensor] = keyword_similarity(*q.sensor, *ds.sensor, &ontology);
      bool usable = false;
      for (std::size_t i = 0; i < 4; ++i) usable = usable || (m.attributes[i] && cfg.weights[i] > 0.0);
      if (!usable) continue;
      // Quantized so that rescaling the weights cannot reorder equal scores
      // through rounding noise.
      m.score = std::round(aggregate_similarity(m.attributes, cfg) * 1e12) / 1e12;
      if (m.score + 1e-12 < cfg.min_score) continue;
      matches.push_back(std::move(m));
    }
  }
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  if (matches.size() > cfg.top_k) matches.resize(cfg.top_k);

  const MetricNode* q_metric = q.metric ? ontology.find_metric(*q.metric) : nullptr;
  for (auto& m : matches) {
    const StreamSemantics sem = catalog.get_semantics(m.key);
    // A stream that feeds the requested metric is answered with that metric
    // derived for its entity; anything else with its own metric.
    std::string metric = sem.metric_ref;
    if (q_metric && q_metric->name != metric && ontology.expand_metric(q_metric->name).contains(metric)) {
      metric = q_metric->name;
    }
    try {
      m.plan = plan_exact(SemanticQuery{sem.entity, metric, std::nullopt, window, m.key.database}, catalog, ontology);
    } catch (const Error& e) {
      if (metric == sem.metric_ref) {
        m.plan_error = e.what();
      } else {
        try {
          m.plan = plan_exact(SemanticQuery{sem.entity, sem.metric_ref, std::nullopt, window, m.key.database},
                              catalog, ontology);
        } catch (const Error& e2) {
          m.plan_error = e2.what();
        }
      }
    }
    std::string detail = m.key.to_string() + " score=" + format_double(m.score);
    for (std::size_t i = 0; i < 4; ++i) detail += std::string(" ") + kAttributeNames[i] + "=" + format_score(m.attributes[i]);
    if (m.plan) detail += " plan=" + m.plan->query.metric + "(" + sem.entity + ")";
    lines.push_back({"similarity", std::move(detail)});
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    result.explanation.push_back(std::to_string(i + 1) + " " + lines[i].first + " " + lines[i].second);
  }
  result.matches = std::move(matches);
  return result;
}

SimilarityResult plan_similarity(const SemanticVector& q, Window window, const SimilarityConfig& cfg,
                                 const Catalog& catalog, const OntologySet& ontology) {
  if (q.empty()) throw Error(ErrorCode::kNoUsableAttributes, "the query names no semantic attribute");
  cfg.validate();
  return rank_candidates(q, prune(build_filter_tree(catalog), q, cfg, ontology), window, cfg, catalog, ontology);
}

}  // namespace setsdb
