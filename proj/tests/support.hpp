// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared helpers for the unit and acceptance suites: independent oracles that
// do not call the code under test, and generators for randomized corpora.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "setsdb/cloud.hpp"
#include "setsdb/similarity.hpp"
#include "setsdb/system.hpp"

namespace setsdb::test {

// Uniform integer in [lo, hi].
inline std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Fraction of the window's milliseconds at which the state in force is "up",
// found by visiting every millisecond. Milliseconds before the first event
// are unknown and not counted. NaN when no millisecond is known.
inline double per_ms_up_fraction(std::vector<std::pair<Millis, std::string>> events, Window w) {
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t next = 0;
  std::string state;
  bool known = false;
  std::int64_t up = 0;
  std::int64_t counted = 0;
  while (next < events.size() && events[next].first <= w.begin) {
    state = events[next++].second;
    known = true;
  }
  for (Millis t = w.begin; t < w.end; ++t) {
    while (next < events.size() && events[next].first <= t) {
      state = events[next++].second;
      known = true;
    }
    if (!known) continue;
    ++counted;
    if (state == "up") ++up;
  }
  return counted == 0 ? std::nan("") : static_cast<double>(up) / static_cast<double>(counted);
}

// Status events of one host in a fixture.
inline std::vector<std::pair<Millis, std::string>> status_events(const cloud::CloudFixture& f, std::size_t host) {
  const SeriesKey key = cloud::status_key(host);
  std::vector<std::pair<Millis, std::string>> out;
  for (const auto& r : f.records) {
    if (r.key == key) out.emplace_back(r.sample.timestamp, std::get<std::string>(r.sample.value));
  }
  return out;
}

// Mean over hosts with any known state of the per-millisecond up fraction.
inline double per_ms_cluster_availability(const cloud::CloudFixture& f, Window w) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t h = 1; h <= f.hosts; ++h) {
    const double v = per_ms_up_fraction(status_events(f, h), w);
    if (std::isnan(v)) continue;
    total += v;
    ++n;
  }
  return n == 0 ? std::nan("") : total / static_cast<double>(n);
}

inline std::unique_ptr<System> loaded_system(const cloud::CloudFixture& f) {
  auto sys = std::make_unique<System>();
  cloud::load_fixture(*sys, f);
  return sys;
}

// --- graph edit distance -------------------------------------------------

inline double jaccard_oracle(const KeywordSet& a, const KeywordSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::set<std::string> uni(a.begin(), a.end());
  uni.insert(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& k : a) inter += b.count(k);
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

// Minimum over every edit path induced by a node assignment: each source
// node is substituted by a distinct target node or deleted, remaining target
// nodes are inserted, and edges not carried over unchanged are deleted or
// inserted. Enumerates all (n2 + 1)^n1 assignments and discards the
// non-injective ones.
inline double exhaustive_ged(const LabeledGraph& g1, const LabeledGraph& g2, const GedCosts& c) {
  const std::size_t n1 = g1.nodes.size();
  const std::size_t n2 = g2.nodes.size();
  const std::size_t del = n2;  // "deleted" marker
  std::vector<std::size_t> f(n1, 0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n1; ++i) combos *= n2 + 1;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    for (std::size_t i = 0; i < n1; ++i) {
      f[i] = rest % (n2 + 1);
      rest /= n2 + 1;
    }
    std::vector<int> hits(n2, 0);
    bool injective = true;
    for (auto t : f) {
      if (t != del && ++hits[t] > 1) injective = false;
    }
    if (!injective) continue;
    double cost = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      cost += f[i] == del ? c.node_del : c.node_sub * (1.0 - jaccard_oracle(g1.nodes[i], g2.nodes[f[i]]));
    }
    for (std::size_t j = 0; j < n2; ++j) {
      if (hits[j] == 0) cost += c.node_ins;
    }
    std::set<std::tuple<std::size_t, std::size_t, std::string>> image;
    for (const auto& [u, v, l] : g1.edges) {
      if (f[u] != del && f[v] != del) image.emplace(f[u], f[v], l);
    }
    for (const auto& e : g1.edges) {
      const auto& [u, v, l] = e;
      const bool kept = f[u] != del && f[v] != del && g2.edges.count({f[u], f[v], l});
      if (!kept) cost += c.edge_del;
    }
    for (const auto& e : g2.edges) {
      if (!image.count(e)) cost += c.edge_ins;
    }
    best = std::min(best, cost);
  }
  return best;
}

inline LabeledGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes) {
  static const std::vector<std::string> words = {"host", "cpu", "rack", "sensor", "vm"};
  static const std::vector<std::string> labels = {"has", "connects"};
  LabeledGraph g;
  const auto n = static_cast<std::size_t>(pick(rng, 0, static_cast<std::int64_t>(max_nodes)));
  for (std::size_t i = 0; i < n; ++i) {
    KeywordSet k;
    for (const auto& w : words) {
      if (coin(rng, 0.3)) k.insert(w);
    }
    g.nodes.push_back(k);
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      for (const auto& l : labels) {
        if (coin(rng, 0.15)) g.edges.emplace(u, v, l);
      }
    }
  }
  return g;
}

inline LabeledGraph path_graph(std::size_t n) {
  LabeledGraph g;
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back({"node"});
  for (std::size_t i = 0; i + 1 < n; ++i) g.edges.emplace(i, i + 1, "has");
  return g;
}

// --- text corpora --------------------------------------------------------

inline std::string random_ident(std::mt19937_64& rng) {
  static const std::vector<std::string> names = {"a", "b", "load", "status", "cpu_time", "x1", "Latency", "q"};
  return names[static_cast<std::size_t>(pick(rng, 0, static_cast<std::int64_t>(names.size()) - 1))];
}

inline std::string random_number(std::mt19937_64& rng) {
  switch (pick(rng, 0, 4)) {
    case 0:
      return std::to_string(pick(rng, 0, 1000));
    case 1:
      return std::to_string(pick(rng, 0, 99)) + "." + std::to_string(pick(rng, 0, 999));
    case 2:
      return std::to_string(pick(rng, 1, 9)) + "e" + std::to_string(pick(rng, -5, 5));
    case 3:
      return "0." + std::to_string(pick(rng, 1, 9));
    default:
      return "." + std::to_string(pick(rng, 1, 99));
  }
}

inline std::string spaces(std::mt19937_64& rng) { return std::string(static_cast<std::size_t>(pick(rng, 0, 2)), ' '); }

inline std::string random_expr_text(std::mt19937_64& rng, int depth) {
  const auto roll = pick(rng, 0, depth <= 0 ? 2 : 5);
  if (roll == 0) return random_number(rng);
  if (roll == 1) return random_ident(rng);
  if (roll == 2) {
    static const std::vector<std::string> fns = {"up_ratio", "mean_over_subentities", "sum_over_subentities"};
    return fns[static_cast<std::size_t>(pick(rng, 0, 2))] + spaces(rng) + "(" + spaces(rng) + random_ident(rng) +
           spaces(rng) + ")";
  }
  if (roll == 3) return "(" + spaces(rng) + random_expr_text(rng, depth - 1) + spaces(rng) + ")";
  static const char ops[] = {'+', '-', '*', '/'};
  return random_expr_text(rng, depth - 1) + spaces(rng) + ops[pick(rng, 0, 3)] + spaces(rng) +
         random_expr_text(rng, depth - 1);
}

inline std::string random_case(std::mt19937_64& rng, std::string word) {
  for (auto& ch : word) {
    if (coin(rng)) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return word;
}

inline std::string random_range(std::mt19937_64& rng) {
  const auto t0 = pick(rng, -1000000, 2000000000000);
  const auto t1 = t0 + pick(rng, 1, 100000000);
  return random_case(rng, "RANGE") + " " + std::to_string(t0) + " " + std::to_string(t1);
}

inline std::string random_payload(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"cpu", "load", "host", "Availability", "h1", "dc1", "heartbeat",
                                                 "x86_64", "avg-load", "cluster"};
  std::string out;
  const auto n = pick(rng, 1, 4);
  for (std::int64_t i = 0; i < n; ++i) {
    if (!out.empty()) out += std::string(static_cast<std::size_t>(pick(rng, 1, 3)), ' ');
    const auto& w = words[static_cast<std::size_t>(pick(rng, 0, static_cast<std::int64_t>(words.size()) - 1))];
    if (coin(rng, 0.2)) {
      out += "'" + w + " " + words[static_cast<std::size_t>(pick(rng, 0, 3))] + "'";
    } else {
      out += w;
    }
  }
  return out;
}

// A syntactically valid query of a random kind.
inline std::string random_query_text(std::mt19937_64& rng) {
  const auto kind = pick(rng, 0, 2);
  if (kind == 0) {
    std::string tags;
    const auto n = pick(rng, 0, 3);
    std::set<std::string> used;
    for (std::int64_t i = 0; i < n; ++i) {
      const std::string k = "k" + std::to_string(pick(rng, 0, 5));
      if (!used.insert(k).second) continue;
      if (!tags.empty()) tags += ",";
      tags += k + "=v" + std::to_string(pick(rng, 0, 99));
    }
    std::string key = "db" + std::to_string(pick(rng, 0, 9)) + "." + random_ident(rng);
    if (!tags.empty() || coin(rng)) key += "{" + tags + "}";
    return random_case(rng, "SELECT") + " " + key + " " + random_range(rng);
  }
  std::vector<std::string> clauses;
  if (kind == 1) {
    clauses.push_back(random_case(rng, "metric") + "=" + random_ident(rng));
    clauses.push_back(random_case(rng, "entity") + "=/dc" + std::to_string(pick(rng, 1, 3)) + "/c1/h" +
                      std::to_string(pick(rng, 1, 9)));
    if (coin(rng)) clauses.push_back(random_case(rng, "unit") + "=" + (coin(rng) ? "second" : "percent"));
    if (coin(rng)) clauses.push_back(random_case(rng, "db") + "=clouddb" + std::to_string(pick(rng, 0, 3)));
  } else {
    for (const char* name : {"system", "entity", "metric", "sensor"}) {
      if (coin(rng)) clauses.push_back(random_case(rng, name) + "~\"" + random_payload(rng) + "\"");
    }
    if (clauses.empty()) clauses.push_back("metric~\"" + random_payload(rng) + "\"");
    if (coin(rng)) clauses.push_back(random_case(rng, "top") + "=" + std::to_string(pick(rng, 1, 50)));
    if (coin(rng)) {
      const double m = static_cast<double>(pick(rng, 0, 1000)) / 1000.0;
      clauses.push_back(random_case(rng, "min") + "=" + format_double(m));
    }
  }
  std::shuffle(clauses.begin(), clauses.end(), rng);
  std::string out = random_case(rng, kind == 1 ? "DERIVE" : "MATCH");
  for (const auto& c : clauses) out += " " + c;
  return out + " " + random_range(rng);
}

}  // namespace setsdb::test
