// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>
#include <random>

#include "setsdb/cloud.hpp"
#include "setsdb/error.hpp"
#include "setsdb/semantics.hpp"
#include "support.hpp"

using namespace setsdb;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

StreamSemantics load_stream(const std::string& metric, std::size_t host, const std::string& tag) {
  StreamSemantics s;
  s.key = {cloud::kDatabase, metric, {{"host", "h" + std::to_string(host)}, {"n", tag}}};
  s.metric_ref = "load";
  s.entity = cloud::host_path(host);
  s.unit = "percent";
  return s;
}

std::set<std::string> source_ids(const Catalog& c, const SeriesKey& k) {
  std::set<std::string> out;
  for (const auto& n : c.lineage_sources(k)) out.insert(n.id);
  return out;
}

// Raw nodes reachable from a node, by walking the exported node list.
std::set<std::string> raw_reachable(const std::map<std::string, ProvenanceNode>& nodes, const std::string& id) {
  std::set<std::string> out;
  std::set<std::string> seen;
  std::function<void(const std::string&)> walk = [&](const std::string& n) {
    if (!seen.insert(n).second) return;
    const auto& node = nodes.at(n);
    if (node.raw) out.insert(n);
    for (const auto& in : node.inputs) walk(in);
  };
  walk(id);
  return out;
}

}  // namespace

TEST_SUITE("semantics") {
  TEST_CASE("register_stream") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    auto& cat = sys->catalog();
    const auto status = cloud::status_key(1);
    CHECK(cat.has_stream(status));
    const auto sources = cat.lineage_sources(status);
    REQUIRE(sources.size() == 1);
    CHECK(sources[0].raw);
    CHECK(sources[0].sensor_entity == "/dc1/c1/h1/hb-sensor");
    CHECK(cat.get_semantics(status).provenance == sources[0].id);

    auto dup = cat.get_semantics(status);
    dup.provenance.clear();
    CHECK(code_of([&] { cat.register_stream(dup); }) == ErrorCode::kDuplicateStream);

    auto bad = load_stream("x", 1, "0");
    bad.metric_ref = "nonsense";
    CHECK(code_of([&] { cat.register_stream(bad); }) == ErrorCode::kUnresolvedReference);
    bad = load_stream("x", 1, "0");
    bad.entity = "/dc1/c9";
    CHECK(code_of([&] { cat.register_stream(bad); }) == ErrorCode::kUnresolvedReference);
    bad = load_stream("x", 1, "0");
    bad.unit = "second";
    CHECK(code_of([&] { cat.register_stream(bad); }) == ErrorCode::kUnitMismatch);
    bad = load_stream("x", 1, "0");
    bad.key.database = "elsewhere";
    CHECK(code_of([&] { cat.register_stream(bad); }) == ErrorCode::kUnknownDatabase);
    CHECK(code_of([&] { (void)cat.get_semantics({"clouddb", "nope", {}}); }) == ErrorCode::kUnknownStream);
  }

  TEST_CASE("stream semantics json") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    for (const auto& s : sys->catalog().streams()) {
      CHECK(stream_semantics_from_json(stream_semantics_to_json(s)) == s);
    }
    CHECK(code_of([] { (void)stream_semantics_from_json(nlohmann::json::object()); }) == ErrorCode::kSchemaError);
  }

  TEST_CASE("record_derivation and lineage") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    auto& cat = sys->catalog();
    StreamSemantics avail;
    avail.key = {cloud::kDatabase, "Availability", {{"entity", "/dc1/c1/h1"}}};
    avail.metric_ref = "availability";
    avail.entity = "/dc1/c1/h1";
    avail.unit = "ratio";
    cat.register_derived_stream(avail, Operation::compute("up_ratio"), {cloud::status_key(1)});
    const auto node = cat.provenance_node(cat.get_semantics(avail.key).provenance);
    REQUIRE(node);
    CHECK_FALSE(node->raw);
    CHECK(node->inputs.size() == 1);
    CHECK(cat.get_semantics(avail.key).metric_ref == "Availability");

    StreamSemantics avail2 = avail;
    avail2.key.tags["entity"] = "/dc1/c1/h2";
    avail2.entity = "/dc1/c1/h2";
    cat.register_derived_stream(avail2, Operation::compute("up_ratio"), {cloud::status_key(2)});

    StreamSemantics cluster;
    cluster.key = {cloud::kDatabase, "cluster_availability", {{"entity", "/dc1/c1"}}};
    cluster.metric_ref = "cluster_availability";
    cluster.entity = "/dc1/c1";
    cluster.unit = "ratio";
    cat.register_derived_stream(cluster, Operation::compute("mean_over_subentities"), {avail.key, avail2.key});

    std::set<std::string> heartbeats;
    for (std::size_t h : {1u, 2u}) heartbeats.insert(cat.get_semantics(cloud::status_key(h)).provenance);
    CHECK(source_ids(cat, cluster.key) == heartbeats);
    CHECK(cat.lineage_descendants(cloud::status_key(1)) == std::set<SeriesKey>{avail.key, cluster.key});
    CHECK(cat.lineage_descendants(cloud::load_key(1)).empty());
    CHECK(cat.lineage_upstream(cluster.key) ==
          std::set<SeriesKey>{avail.key, avail2.key, cloud::status_key(1), cloud::status_key(2)});
    CHECK(code_of([&] { (void)cat.lineage_descendants({"clouddb", "nope", {}}); }) == ErrorCode::kUnknownStream);

    CHECK(code_of([&] { cat.record_derivation(avail.key, Operation::compute("x"), {avail.key}); }) ==
          ErrorCode::kCycleError);
    CHECK(code_of([&] { cat.record_derivation(cloud::status_key(1), Operation::compute("x"), {cluster.key}); }) ==
          ErrorCode::kCycleError);
    CHECK(code_of([&] { cat.record_derivation(avail.key, Operation::compute("x"), {}); }) ==
          ErrorCode::kInvalidArgument);

    // raw -> downsample -> compute chains back to the single raw node.
    const auto down = load_stream("load_1s", 1, "d");
    cat.register_stream(down);
    const auto id = cat.record_derivation(down.key, Operation::downsample("1s mean"), {cloud::load_key(1)});
    CHECK(cat.get_semantics(down.key).provenance == id);
    auto top = load_stream("load_x", 1, "c");
    cat.register_stream(top);
    cat.record_derivation(top.key, Operation::compute("scale"), {down.key});
    CHECK(source_ids(cat, top.key) == std::set<std::string>{cat.get_semantics(cloud::load_key(1)).provenance});
  }

  TEST_CASE("node ids are content addressed") {
    auto a = test::loaded_system(cloud::scripted_fixture());
    auto b = test::loaded_system(cloud::scripted_fixture());
    for (auto* sys : {a.get(), b.get()}) {
      auto s = load_stream("derived", 1, "0");
      sys->catalog().register_stream(s);
      sys->catalog().record_derivation(s.key, Operation::compute("f"), {cloud::load_key(1)});
      // Replaying the same derivation is idempotent.
      sys->catalog().record_derivation(s.key, Operation::compute("f"), {cloud::load_key(1)});
    }
    CHECK(a->catalog().export_provenance() == b->catalog().export_provenance());
    CHECK(a->catalog().provenance_nodes().size() == 6);
  }

  TEST_CASE("catalog state round-trips through json") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    auto s = load_stream("derived", 2, "0");
    sys->catalog().register_stream(s);
    sys->catalog().record_derivation(s.key, Operation::compute("f"), {cloud::load_key(2), cloud::status_key(2)});
    Catalog copy(sys->catalog().ontology());
    copy.load_json(sys->catalog().to_json());
    CHECK(copy.to_json() == sys->catalog().to_json());
    CHECK(copy.streams() == sys->catalog().streams());
    CHECK(copy.lineage_descendants(cloud::load_key(2)) == std::set<SeriesKey>{s.key});
  }

  TEST_CASE("randomized derivations keep the graph acyclic and consistent") {
    auto sys = test::loaded_system(cloud::generate_fixture(3, 4, 10000));
    auto& cat = sys->catalog();
    std::vector<SeriesKey> keys;
    for (const auto& s : cat.streams()) keys.push_back(s.key);
    for (int i = 0; i < 30; ++i) {
      auto s = load_stream("m", 1 + static_cast<std::size_t>(i % 4), std::to_string(i));
      cat.register_stream(s);
      keys.push_back(s.key);
    }
    std::mt19937_64 rng(99);
    int valid = 0;
    int refused = 0;
    while (valid < 1000) {
      const auto& out = keys[static_cast<std::size_t>(test::pick(rng, 0, static_cast<std::int64_t>(keys.size()) - 1))];
      std::vector<SeriesKey> inputs;
      const auto n = test::pick(rng, 1, 3);
      for (std::int64_t k = 0; k < n; ++k) {
        inputs.push_back(keys[static_cast<std::size_t>(test::pick(rng, 0, static_cast<std::int64_t>(keys.size()) - 1))]);
      }
      const Operation op = test::coin(rng) ? Operation::compute("f" + std::to_string(test::pick(rng, 0, 5)))
                                           : Operation::downsample();
      try {
        cat.record_derivation(out, op, inputs);
        ++valid;
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::kCycleError);
        ++refused;
      }
    }
    CHECK(refused > 0);

    std::map<std::string, ProvenanceNode> nodes;
    for (const auto& n : cat.provenance_nodes()) nodes.emplace(n.id, n);
    // Acyclic: a depth-first search never meets a node on its own stack.
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
    CHECK_FALSE(cycle);
    for (const auto& [id, n] : nodes) {
      if (n.inputs.empty()) CHECK(n.raw);
      if (n.raw) CHECK(n.inputs.empty());
    }
    for (const auto& k : keys) {
      const auto cur = cat.get_semantics(k).provenance;
      CHECK(source_ids(cat, k) == raw_reachable(nodes, cur));
      for (const auto& d : cat.lineage_descendants(k)) CHECK(cat.lineage_upstream(d).count(k) == 1);
      for (const auto& u : cat.lineage_upstream(k)) CHECK(cat.lineage_descendants(u).count(k) == 1);
    }
  }
}
