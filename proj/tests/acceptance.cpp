// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "setsdb/cloud.hpp"
#include "setsdb/error.hpp"
#include "setsdb/expr.hpp"
#include "setsdb/query.hpp"
#include "setsdb/reasoning.hpp"
#include "setsdb/similarity.hpp"
#include "support.hpp"

using namespace setsdb;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) first_ += (first_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + ", " + std::to_string(checks_) + " checks"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + first_};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::string first_;
};

std::string num(double v) { return format_double(v); }

SemanticQuery seq(std::string entity, std::string metric, Window w) {
  SemanticQuery q;
  q.entity = std::move(entity);
  q.metric = std::move(metric);
  q.window = w;
  return q;
}

Outcome end_to_end() {
  Checker c;
  std::vector<cloud::CloudFixture> fixtures{cloud::scripted_fixture()};
  for (std::uint64_t seed : {1u, 2u, 3u}) fixtures.push_back(cloud::generate_fixture(seed, 2 + seed, 100000));
  for (const auto& f : fixtures) {
    const auto report = cloud::run_case_study(f);
    const double oracle = test::per_ms_cluster_availability(f, f.window);
    c.expect(std::abs(report.value - oracle) <= 1e-9,
             "hosts=" + std::to_string(f.hosts) + " value " + num(report.value) + " vs oracle " + num(oracle));
    std::vector<std::string> rules{"composition"};
    rules.resize(1 + f.hosts, "metric");
    c.expect(report.rules == rules, "rules out of order for hosts=" + std::to_string(f.hosts));
    for (std::size_t i = 1; i < report.explanation.size(); ++i) {
      c.expect(report.explanation[i].find("up_ratio(status)") != std::string::npos,
               "metric step without up_ratio: " + report.explanation[i]);
    }
  }
  return c.outcome("scripted fixture 0.9 and 3 generated fixtures match the per-ms scan");
}

Outcome metric_derivation() {
  Checker c;
  const auto f = cloud::generate_fixture(2024, 100, 60000);
  auto sys = test::loaded_system(f);
  std::mt19937_64 rng(55);
  for (std::size_t h = 1; h <= 100; ++h) {
    const Millis t0 = test::pick(rng, -1000, 50000);
    const Window w{t0, t0 + test::pick(rng, 1, 30000)};
    const auto plan = plan_exact(seq(cloud::host_path(h), "availability", w), sys->catalog(), sys->ontology());
    c.expect(plan.root->kind == StepKind::kEvaluateExpr, "host " + std::to_string(h) + " not planned by definition");
    const auto run = execute(plan, sys->store());
    const double oracle = test::per_ms_up_fraction(test::status_events(f, h), w);
    if (std::isnan(oracle)) {
      c.expect(run.samples.empty(), "host " + std::to_string(h) + " produced a value with no known state");
    } else {
      c.expect(run.samples.size() == 1 && std::abs(run.samples[0].number() - oracle) <= 1e-9,
               "host " + std::to_string(h) + " differs from the per-ms scan");
    }
  }
  return c.outcome("100 seeded status streams");
}

Outcome unit_reasoning() {
  Checker c;
  const auto ont = load_ontology(cloud::cloud_ontology());
  std::mt19937_64 rng(9);
  std::vector<Sample> pts;
  for (Millis t = 0; t < 64; ++t) {
    pts.push_back(numeric_sample(t, std::uniform_real_distribution<double>(-1e6, 1e6)(rng)));
  }
  std::size_t pairs = 0;
  std::size_t mismatches = 0;
  for (const auto& [a, ua] : ont.units()) {
    for (const auto& [b, ub] : ont.units()) {
      if (ua.dimension != ub.dimension) {
        try {
          (void)ont.unit_conversion_factor(a, b);
          c.expect(false, a + "->" + b + " converted across dimensions");
        } catch (const Error& e) {
          c.expect(e.code() == ErrorCode::kUnitMismatch, a + "->" + b + " raised " + e.what());
        }
        ++mismatches;
        continue;
      }
      ++pairs;
      const auto there = convert_units(pts, ont.unit_conversion_factor(a, b));
      const auto back = convert_units(there, ont.unit_conversion_factor(b, a));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double x = pts[i].number();
        c.expect(std::abs(back[i].number() - x) <= 1e-12 * std::max(1.0, std::abs(x)), a + "->" + b + "->" + a);
      }
    }
  }
  // Planner path: a unit from another dimension is refused.
  auto sys = test::loaded_system(cloud::scripted_fixture());
  auto q = seq("/dc1/c1/h1", "load", {0, 100});
  q.desired_unit = "second";
  try {
    (void)plan_exact(q, sys->catalog(), sys->ontology());
    c.expect(false, "planner converted percent to second");
  } catch (const Error& e) {
    c.expect(e.code() == ErrorCode::kUnitMismatch, std::string("planner raised ") + e.what());
  }
  return c.outcome(std::to_string(pairs) + " same-dimension pairs, " + std::to_string(mismatches) +
                   " cross-dimension pairs");
}

Outcome exact_ged() {
  Checker c;
  std::mt19937_64 rng(4242);
  std::vector<LabeledGraph> corpus;
  for (std::size_t n = 0; n <= 2; ++n) corpus.push_back(test::path_graph(n));
  while (corpus.size() < 60) corpus.push_back(test::random_graph(rng, 5));
  const GedCosts unit;
  const GedCosts skewed{2.0, 1.5, 0.5, 3.0, 0.25};
  std::size_t pairs = 0;
  for (const auto& g1 : corpus) {
    for (const auto& g2 : corpus) {
      for (const auto* costs : {&unit, &skewed}) {
        const double bb = exact_graph_edit_distance(g1, g2, *costs);
        const double brute = test::exhaustive_ged(g1, g2, *costs);
        c.expect(std::abs(bb - brute) <= 1e-9, "pair " + std::to_string(pairs) + ": " + num(bb) + " vs " + num(brute));
        ++pairs;
      }
    }
  }
  return c.outcome(std::to_string(pairs) + " pairs of graphs with at most 5 nodes, 100% equal");
}

// Three databases with 10 hosts each, status and load per host.
std::unique_ptr<System> three_cloud_system() {
  auto sys = std::make_unique<System>();
  const auto f = cloud::generate_fixture(31, 10, 10000);
  sys->load_ontology(f.ontology);
  for (const char* db : {"cloud_a", "cloud_b", "cloud_c"}) {
    sys->create_database(db, std::nullopt);
    sys->load_architecture(db, f.architecture);
    for (auto s : f.streams) {
      s["database"] = db;
      sys->register_streams(s);
    }
  }
  return sys;
}

SemanticVector random_vector(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"h1", "h3", "h7", "host", "sensor", "heartbeat", "load", "zebra"};
  SemanticVector q;
  auto pick_set = [&] {
    KeywordSet k;
    for (const auto& w : words) {
      if (test::coin(rng, 0.3)) k.insert(w);
    }
    return k;
  };
  if (test::coin(rng)) q.entity = pick_set();
  if (test::coin(rng)) q.sensor = pick_set();
  if (test::coin(rng)) q.sys = SystemDescriptor{KeywordSet{"cloud", "cluster"}};
  if (q.empty() || test::coin(rng)) q.metric = test::coin(rng) ? "availability" : "load";
  return q;
}

Outcome pruning_completeness() {
  Checker c;
  auto sys = three_cloud_system();
  std::set<SeriesKey> all;
  for (const auto& s : sys->catalog().streams()) all.insert(s.key);
  c.expect(all.size() == 60, "catalog has " + std::to_string(all.size()) + " streams");
  SimilarityConfig cfg;
  cfg.tree_thresholds = {0.0, 0.0};
  cfg.min_score = 0.0;
  cfg.top_k = 1000;
  const auto tree = build_filter_tree(sys->catalog());
  std::mt19937_64 rng(21);
  for (int i = 0; i < 25; ++i) {
    const auto q = random_vector(rng);
    c.expect(prune(tree, q, cfg, sys->ontology()) == all, "pruned set differs from the catalog");
    const auto pruned = plan_similarity(q, {0, 10000}, cfg, sys->catalog(), sys->ontology());
    const auto full = rank_candidates(q, all, {0, 10000}, cfg, sys->catalog(), sys->ontology());
    c.expect(pruned.candidates == all.size(), "candidate count " + std::to_string(pruned.candidates));
    bool same = pruned.matches.size() == full.matches.size();
    for (std::size_t k = 0; same && k < full.matches.size(); ++k) {
      same = pruned.matches[k].key == full.matches[k].key && pruned.matches[k].score == full.matches[k].score;
    }
    c.expect(same, "ranked result differs from a full scan");
  }
  return c.outcome("3 databases x 20 streams, 25 queries");
}

Outcome self_match() {
  Checker c;
  auto sys = test::loaded_system(cloud::generate_fixture(8, 10, 10000));
  for (const auto& sem : sys->catalog().streams()) {
    const auto q = stream_semantic_vector(sem, sys->catalog());
    const auto r = plan_similarity(q, {0, 10000}, SimilarityConfig{}, sys->catalog(), sys->ontology());
    c.expect(!r.matches.empty() && r.matches[0].key == sem.key && r.matches[0].score == 1.0,
             sem.key.to_string() + " not ranked first with 1.0");
  }
  auto multi = three_cloud_system();
  std::mt19937_64 rng(6);
  for (int i = 0; i < 25; ++i) {
    SimilarityConfig cfg;
    cfg.min_score = 0.0;
    cfg.top_k = 1000;
    for (auto& w : cfg.weights) w = static_cast<double>(test::pick(rng, 1, 9));
    const auto q = random_vector(rng);
    const auto base = plan_similarity(q, {0, 10000}, cfg, multi->catalog(), multi->ontology());
    for (double k : {1e-3, 0.5, 7.0, 1e4}) {
      auto scaled = cfg;
      for (auto& w : scaled.weights) w *= k;
      const auto r = plan_similarity(q, {0, 10000}, scaled, multi->catalog(), multi->ontology());
      bool same = r.matches.size() == base.matches.size();
      for (std::size_t j = 0; same && j < r.matches.size(); ++j) same = r.matches[j].key == base.matches[j].key;
      c.expect(same, "ranking changed when weights were scaled by " + num(k));
    }
  }
  return c.outcome("20 streams self-match at 1.0; 100 weight scalings keep the order");
}

Outcome provenance_integrity() {
  Checker c;
  auto sys = test::loaded_system(cloud::scripted_fixture());
  const auto result =
      run_query(parse_query("DERIVE metric=cluster_availability entity=/dc1/c1 RANGE 0 100"), *sys, {true});
  c.expect(result.materialized.has_value(), "result was not materialized");
  auto& cat = sys->catalog();

  std::vector<SeriesKey> inputs;
  for (const auto& s : cat.streams()) inputs.push_back(s.key);
  std::vector<SeriesKey> outputs;
  for (int i = 0; i < 40; ++i) {
    StreamSemantics s;
    s.key = {cloud::kDatabase, "synthetic", {{"n", std::to_string(i)}}};
    s.metric_ref = "load";
    s.entity = cloud::host_path(1 + static_cast<std::size_t>(i % 2));
    s.unit = "ratio";
    cat.register_stream(s);
    outputs.push_back(s.key);
    inputs.push_back(s.key);
  }
  std::mt19937_64 rng(1000);
  int valid = 0;
  while (valid < 1000) {
    const auto& out = outputs[static_cast<std::size_t>(test::pick(rng, 0, static_cast<std::int64_t>(outputs.size()) - 1))];
    std::vector<SeriesKey> ins;
    for (std::int64_t k = test::pick(rng, 1, 3); k > 0; --k) {
      ins.push_back(inputs[static_cast<std::size_t>(test::pick(rng, 0, static_cast<std::int64_t>(inputs.size()) - 1))]);
    }
    try {
      cat.record_derivation(out, Operation::compute("f" + std::to_string(test::pick(rng, 0, 3))), ins);
      ++valid;
    } catch (const Error& e) {
      c.expect(e.code() == ErrorCode::kCycleError, std::string("unexpected ") + e.what());
    }
  }

  std::map<std::string, ProvenanceNode> nodes;
  for (const auto& n : cat.provenance_nodes()) nodes.emplace(n.id, n);
  std::map<std::string, int> color;
  bool cycle = false;
  std::function<void(const std::string&)> dfs = [&](const std::string& id) {
    color[id] = 1;
    for (const auto& in : nodes.at(id).inputs) {
      if (color[in] == 1) cycle = true;
      if (color[in] == 0) dfs(in);
    }
    color[id] = 2;
  };
  for (const auto& [id, n] : nodes) {
    if (color[id] == 0) dfs(id);
  }
  c.expect(!cycle, "provenance graph has a cycle");
  for (const auto& [id, n] : nodes) {
    if (n.inputs.empty()) c.expect(n.raw, "leaf " + id + " is not raw");
  }

  if (result.materialized) {
    std::set<std::string> got;
    for (const auto& n : cat.lineage_sources(*result.materialized)) got.insert(n.id);
    std::set<std::string> heartbeats;
    for (const auto& [id, n] : nodes) {
      if (n.raw && n.sensor_entity && n.sensor_entity->ends_with("/hb-sensor")) heartbeats.insert(id);
    }
    c.expect(heartbeats.size() == 2, "expected 2 heartbeat nodes");
    c.expect(got == heartbeats, "lineage sources differ from the heartbeat raw nodes");
  }
  return c.outcome("1000 derivations, " + std::to_string(nodes.size()) + " nodes");
}

Outcome store_contracts() {
  Checker c;
  std::mt19937_64 rng(10000);
  MemoryStore store;
  store.create_database("db", std::nullopt);
  for (int i = 0; i < 10000; ++i) {
    const SeriesKey key{"db", "m", {{"case", std::to_string(i)}}};
    std::map<Millis, double> model;
    for (std::int64_t w = test::pick(rng, 1, 4); w > 0; --w) {
      std::vector<Sample> batch;
      for (std::int64_t k = test::pick(rng, 1, 12); k > 0; --k) {
        const Millis t = test::pick(rng, -50, 50);
        const double v = static_cast<double>(test::pick(rng, -1000, 1000)) / 8.0;
        batch.push_back(numeric_sample(t, v));
        model[t] = v;
      }
      store.write_points(key, batch);
    }
    std::vector<Sample> expected;
    for (auto [t, v] : model) expected.push_back(numeric_sample(t, v));
    // Read-your-writes with last-write-wins.
    c.expect(store.read_range(key, -100, 100) == expected, "case " + std::to_string(i) + " read-your-writes");
    // Half-open tiling.
    Millis a = test::pick(rng, -60, 60);
    Millis b = test::pick(rng, -60, 60);
    Millis d = test::pick(rng, -60, 60);
    if (a > b) std::swap(a, b);
    if (b > d) std::swap(b, d);
    if (a > b) std::swap(a, b);
    auto left = store.read_range(key, a, b);
    const auto right = store.read_range(key, b, d);
    left.insert(left.end(), right.begin(), right.end());
    c.expect(left == store.read_range(key, a, d), "case " + std::to_string(i) + " tiling");
    // Mean of a constant series.
    const double constant = static_cast<double>(test::pick(rng, -1000, 1000)) / 3.0;
    std::vector<Sample> flat;
    for (auto [t, v] : model) flat.push_back(numeric_sample(t, constant));
    const Millis width = test::pick(rng, 1, 40);
    for (const auto& s : downsample(flat, width, Aggregator::kMean)) {
      c.expect(s.number() == constant, "case " + std::to_string(i) + " mean of constant");
    }
    double counted = 0;
    for (const auto& s : downsample(flat, width, Aggregator::kCount)) counted += s.number();
    c.expect(counted == static_cast<double>(flat.size()), "case " + std::to_string(i) + " count conservation");
  }
  return c.outcome("10000 randomized cases");
}

Outcome parser_round_trips() {
  Checker c;
  std::mt19937_64 rng(909);
  std::size_t exprs = 0;
  std::size_t queries = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto text = test::random_expr_text(rng, 4);
    try {
      const auto first = parse_expr(text);
      const auto second = parse_expr(print_expr(*first));
      c.expect(structurally_equal(*first, *second), "expression " + text);
      ++exprs;
    } catch (const Error& e) {
      c.expect(false, "expression " + text + ": " + e.what());
    }
  }
  for (int i = 0; i < 2000; ++i) {
    const auto text = test::random_query_text(rng);
    try {
      const auto first = parse_query(text);
      c.expect(parse_query(print_query(first)) == first, "query " + text);
      ++queries;
    } catch (const Error& e) {
      c.expect(false, "query " + text + ": " + e.what());
    }
  }
  return c.outcome(std::to_string(queries) + " queries and " + std::to_string(exprs) + " expressions");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"end-to-end cluster availability", end_to_end},
      {"metric derivation oracle", metric_derivation},
      {"unit reasoning", unit_reasoning},
      {"exact graph edit distance", exact_ged},
      {"pruning completeness", pruning_completeness},
      {"self-match ranking", self_match},
      {"provenance integrity", provenance_integrity},
      {"store contracts", store_contracts},
      {"parser round-trips", parser_round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << i + 1 << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
