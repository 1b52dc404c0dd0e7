// SPDX-License-Identifier: Apache-2.0
#include "setsdb/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "setsdb/error.hpp"
#include "setsdb/query.hpp"

namespace setsdb::cloud {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kOntology = R"json({
  "system_ontology": {
    "concepts": ["DataCenter", "Cluster", "Rack", "Host", "VMM", "VM", "OS", "AppInstance", "Network", "Sensor"],
    "has_relations": [
      ["DataCenter", "Cluster"], ["Cluster", "Rack"], ["Rack", "Host"], ["Cluster", "Host"],
      ["Host", "VMM"], ["VMM", "VM"], ["VM", "OS"], ["OS", "AppInstance"],
      ["DataCenter", "Network"], ["Host", "Sensor"]
    ]
  },
  "metric_ontology": [
    {"name": "QoSMetricConcept", "description": "quality of service metric"},
    {"name": "Performance", "parent": "QoSMetricConcept", "description": "how fast and how much work a system does"},
    {"name": "Dependability", "parent": "QoSMetricConcept", "description": "ability to deliver service that can be trusted"},
    {"name": "ResponseTime", "parent": "Performance", "unit_dimension": "time",
     "description": "elapsed time between a request and its response"},
    {"name": "Throughput", "parent": "Performance", "unit_dimension": "throughput",
     "description": "data transferred per unit of time"},
    {"name": "CPUtime", "parent": "Performance", "unit_dimension": "time", "concept_pool": ["CPUcredit"],
     "description": "processor time consumed by a virtual machine"},
    {"name": "load", "parent": "Performance", "unit_dimension": "fraction",
     "description": "processor utilization of a host"},
    {"name": "Latency", "parent": "Performance", "unit_dimension": "time",
     "description": "network delay between two endpoints"},
    {"name": "Availability", "parent": "Dependability", "unit_dimension": "fraction",
     "quantitative_definition": "up_ratio(status)",
     "description": "fraction of time a server is up, derived from up and down events"},
    {"name": "Reliability", "parent": "Dependability", "unit_dimension": "fraction",
     "description": "probability of failure-free operation"},
    {"name": "status", "parent": "Dependability", "unit_dimension": "state", "concept_pool": ["heartbeat"],
     "description": "up or down state events of a server"},
    {"name": "cluster_availability", "parent": "Dependability", "unit_dimension": "fraction",
     "quantitative_definition": "mean_over_subentities(availability)",
     "description": "availability of a cluster, the mean availability of its hosts"},
    {"name": "cluster_load", "parent": "Performance", "unit_dimension": "fraction",
     "quantitative_definition": "sum_over_subentities(load)",
     "description": "total load of a cluster, the sum of its host loads"}
  ],
  "unit_ontology": [
    {"name": "second", "kind": "basic", "dimension": "time", "factor_to_base": 1},
    {"name": "millisecond", "kind": "basic", "dimension": "time", "factor_to_base": 0.001},
    {"name": "minute", "kind": "basic", "dimension": "time", "factor_to_base": 60},
    {"name": "ratio", "kind": "basic", "dimension": "fraction", "factor_to_base": 1},
    {"name": "percent", "kind": "basic", "dimension": "fraction", "factor_to_base": 0.01},
    {"name": "byte", "kind": "basic", "dimension": "data", "factor_to_base": 1},
    {"name": "kilobyte", "kind": "basic", "dimension": "data", "factor_to_base": 1000},
    {"name": "state", "kind": "basic", "dimension": "state", "factor_to_base": 1},
    {"name": "vcpu", "kind": "basic", "dimension": "cpu", "factor_to_base": 1},
    {"name": "bytes_per_second", "kind": "ratio", "dimension": "throughput", "factor_to_base": 1,
     "composition": {"numerator": ["data"], "denominator": ["time"]}},
    {"name": "kilobytes_per_second", "kind": "ratio", "dimension": "throughput", "factor_to_base": 1000,
     "composition": {"numerator": ["data"], "denominator": ["time"]}},
    {"name": "vm_demand", "kind": "volume", "dimension": "vm_demand", "factor_to_base": 1,
     "composition": {"numerator": ["cpu", "data"]}}
  ]
})json";

json entity(const std::string& name, const std::string& concept_name, const std::string& category,
            const std::string& function, const std::string& description) {
  return {{"name", name},
          {"concept", concept_name},
          {"identity", {{"id_numbers", json::array({name})}, {"category", category}, {"owner", "operations"}}},
          {"context", {{"location", "dc1"}}},
          {"function", function},
          {"description", description}};
}

std::string host_name(std::size_t host) { return "h" + std::to_string(host); }

json stream_documents(std::size_t hosts) {
  json out = json::array();
  for (std::size_t h = 1; h <= hosts; ++h) {
    const std::string path = host_path(h);
    out.push_back({{"database", kDatabase},
                   {"metric", "status"},
                   {"tags", {{"host", host_name(h)}}},
                   {"metric_ref", "status"},
                   {"entity", path},
                   {"unit", "state"},
                   {"value_kind", "symbolic"},
                   {"missing_data_policy", "ignore"},
                   {"collection_procedure", "heartbeat state changes reported by the host agent"},
                   {"sensor_entity", path + "/hb-sensor"}});
    out.push_back({{"database", kDatabase},
                   {"metric", "load"},
                   {"tags", {{"host", host_name(h)}}},
                   {"metric_ref", "load"},
                   {"entity", path},
                   {"unit", "percent"},
                   {"timing", {{"frequency_ms", 1000}, {"period", "1s"}}},
                   {"missing_data_policy", "interpolate"},
                   {"collection_procedure", "processor utilization sampled once per second"},
                   {"sensor_entity", path + "/load-sensor"}});
  }
  return out;
}

CloudFixture skeleton(std::size_t hosts, Window window) {
  CloudFixture f;
  f.ontology = cloud_ontology();
  f.architecture = cloud_architecture(hosts);
  f.streams = stream_documents(hosts);
  f.window = window;
  f.hosts = hosts;
  return f;
}

}  // namespace

json cloud_ontology() { return json::parse(kOntology); }

std::string host_path(std::size_t host) { return std::string(kCluster) + "/" + host_name(host); }

SeriesKey status_key(std::size_t host) { return {kDatabase, "status", {{"host", host_name(host)}}}; }
SeriesKey load_key(std::size_t host) { return {kDatabase, "load", {{"host", host_name(host)}}}; }

json cloud_architecture(std::size_t hosts) {
  json entities = json::array();
  json relations = json::array();
  entities.push_back(entity("/dc1", "DataCenter", "data center", "hosts clusters of servers", "cloud data center"));
  entities.push_back(entity(kCluster, "Cluster", "compute cluster", "pools hosts for virtual machines",
                            "cluster of physical hosts"));
  relations.push_back({"/dc1", "has", kCluster});
  for (std::size_t h = 1; h <= hosts; ++h) {
    const std::string path = host_path(h);
    entities.push_back(entity(path, "Host", "server", "runs virtual machines", "physical server host machine"));
    entities.push_back(entity(path + "/hb-sensor", "Sensor", "heartbeat sensor", "reports up and down events",
                              "heartbeat monitor for host status"));
    entities.push_back(entity(path + "/load-sensor", "Sensor", "load probe", "samples processor utilization",
                              "cpu load probe for host load percentage"));
    relations.push_back({kCluster, "has", path});
    relations.push_back({path, "has", path + "/hb-sensor"});
    relations.push_back({path, "has", path + "/load-sensor"});
  }
  return {{"system_id", "cloud-dc1"},
          {"entities", std::move(entities)},
          {"relations", std::move(relations)},
          {"storage_architecture", "single-node"},
          {"storage_scheme", "columnar per-stream"}};
}

CloudFixture scripted_fixture() {
  CloudFixture f = skeleton(2, Window{0, 100});
  f.records = {
      {status_key(1), state_sample(0, "up")},   {status_key(1), state_sample(60, "down")},
      {status_key(1), state_sample(80, "up")},  {status_key(2), state_sample(0, "up")},
      {load_key(1), numeric_sample(0, 40.0)},   {load_key(1), numeric_sample(50, 60.0)},
      {load_key(2), numeric_sample(0, 20.0)},   {load_key(2), numeric_sample(50, 30.0)},
  };
  return f;
}

CloudFixture generate_fixture(std::uint64_t seed, std::size_t hosts, Millis duration_ms) {
  if (hosts == 0) throw Error(ErrorCode::kInvalidArgument, "a fixture needs at least one host");
  if (duration_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "fixture duration must be positive");
  CloudFixture f = skeleton(hosts, Window{0, duration_ms});
  // Raw engine output with modulo mapping: std distributions are not
  // specified bit-for-bit across standard libraries.
  std::mt19937_64 rng(seed);
  const auto max_gap = static_cast<std::uint64_t>(std::max<Millis>(1, duration_ms / 10));
  for (std::size_t h = 1; h <= hosts; ++h) {
    bool up = rng() % 4 != 0;
    Millis t = 0;
    while (t < duration_ms) {
      f.records.push_back({status_key(h), state_sample(t, up ? "up" : "down")});
      t += 1 + static_cast<Millis>(rng() % max_gap);
      up = !up;
    }
    for (Millis s = 0; s < duration_ms; s += 1000) {
      f.records.push_back({load_key(h), numeric_sample(s, static_cast<double>(rng() % 10001) / 100.0)});
    }
  }
  return f;
}

void load_fixture(System& system, const CloudFixture& fixture) {
  if (!system.store().has_database(kDatabase)) system.create_database(kDatabase, std::nullopt);
  system.load_ontology(fixture.ontology);
  system.load_architecture(kDatabase, fixture.architecture);
  system.register_streams(fixture.streams);
  std::map<SeriesKey, std::vector<Sample>> batches;
  for (const auto& r : fixture.records) batches[r.key].push_back(r.sample);
  for (const auto& [key, samples] : batches) system.store().write_points(key, samples);
}

void write_fixture_files(const CloudFixture& fixture, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (dir / name).string());
  };
  write("ontology.json", fixture.ontology.dump(2) + "\n");
  write("architecture.json", fixture.architecture.dump(2) + "\n");
  write("streams.json", fixture.streams.dump(2) + "\n");
  std::string lines;
  for (const auto& r : fixture.records) lines += format_line(r) + "\n";
  write("data.lp", lines);
}

double availability_oracle(const CloudFixture& fixture) {
  std::map<SeriesKey, std::vector<std::pair<Millis, bool>>> events;
  for (const auto& r : fixture.records) {
    if (r.key.metric == "status") events[r.key].emplace_back(r.sample.timestamp, r.sample.state() == "up");
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (auto& [key, ev] : events) {
    std::stable_sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Millis up = 0;
    Millis known = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const Millis next = i + 1 < ev.size() ? ev[i + 1].first : std::numeric_limits<Millis>::max();
      const Millis lo = std::max(ev[i].first, fixture.window.begin);
      const Millis hi = std::min(next, fixture.window.end);
      if (hi <= lo) continue;
      known += hi - lo;
      if (ev[i].second) up += hi - lo;
    }
    if (known == 0) continue;
    total += static_cast<double>(up) / static_cast<double>(known);
    ++counted;
  }
  return counted == 0 ? std::nan("") : total / static_cast<double>(counted);
}

CaseStudyReport run_case_study(const CloudFixture& fixture) {
  System system;
  load_fixture(system, fixture);
  CaseStudyReport report;
  report.query = "DERIVE metric=cluster_availability entity=" + std::string(kCluster) + " RANGE " +
                 std::to_string(fixture.window.begin) + " " + std::to_string(fixture.window.end);
  const QueryResult r = run_query(parse_query(report.query), system);
  report.result = r.samples;
  report.explanation = r.explanation;
  report.notes = r.notes;
  for (const auto& line : r.explanation) {
    std::istringstream in(line);
    std::string step;
    std::string rule;
    in >> step >> rule;
    report.rules.push_back(rule);
  }
  report.value = r.samples.empty() ? std::nan("") : r.samples.front().number();
  report.oracle = availability_oracle(fixture);
  return report;
}

}  // namespace setsdb::cloud
