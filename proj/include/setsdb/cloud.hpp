// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cloud monitoring fixtures: ontologies for a data center, a single-cluster
// architecture with N hosts, host status and load streams, and the cluster
// availability scenario used by the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "setsdb/reasoning.hpp"
#include "setsdb/series.hpp"
#include "setsdb/system.hpp"

namespace setsdb::cloud {

inline constexpr const char* kDatabase = "clouddb";
inline constexpr const char* kCluster = "/dc1/c1";

struct CloudFixture {
  nlohmann::json ontology;
  nlohmann::json architecture;
  nlohmann::json streams;  // list of stream-semantics documents
  std::vector<LineRecord> records;
  Window window;
  std::size_t hosts = 0;

  bool operator==(const CloudFixture&) const = default;
};

nlohmann::json cloud_ontology();
nlohmann::json cloud_architecture(std::size_t hosts);

std::string host_path(std::size_t host);  // 1-based: /dc1/c1/h<host>
SeriesKey status_key(std::size_t host);
SeriesKey load_key(std::size_t host);

// Two hosts over [0, 100): h1 is up except during [60, 80), h2 is always up.
CloudFixture scripted_fixture();

// Deterministic per seed. Each host gets a status stream alternating between
// up and down from t=0 with seeded intervals, and a load stream in percent
// sampled once per second. Throws kInvalidArgument when hosts == 0 or
// duration_ms <= 0.
CloudFixture generate_fixture(std::uint64_t seed, std::size_t hosts, Millis duration_ms);

// Creates the database and loads ontology, architecture, streams and data.
void load_fixture(System& system, const CloudFixture& fixture);

// Writes ontology.json, architecture.json, streams.json and data.lp.
void write_fixture_files(const CloudFixture& fixture, const std::filesystem::path& dir);

// Mean over hosts of the fraction of the window spent up, from a direct scan
// of the intervals between raw status events. Time before a host's first
// event is not counted.
double availability_oracle(const CloudFixture& fixture);

struct CaseStudyReport {
  std::string query;
  std::vector<Sample> result;
  std::vector<std::string> explanation;
  std::vector<std::string> rules;  // rule column of the explanation
  double value = 0.0;              // NaN when the result is empty
  double oracle = 0.0;
  std::vector<std::string> notes;
};

// Loads the fixture into a fresh in-memory system and derives
// cluster_availability for /dc1/c1 over the fixture window.
CaseStudyReport run_case_study(const CloudFixture& fixture);

}  // namespace setsdb::cloud
