// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "setsdb/cloud.hpp"
#include "setsdb/error.hpp"
#include "support.hpp"

using namespace setsdb;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("cloud") {
  TEST_CASE("fixtures are deterministic per seed") {
    CHECK(cloud::generate_fixture(1, 2, 100000) == cloud::generate_fixture(1, 2, 100000));
    CHECK_FALSE(cloud::generate_fixture(1, 2, 100000) == cloud::generate_fixture(2, 2, 100000));
    const auto base = std::filesystem::temp_directory_path() / "setsdb-fixture-test";
    std::filesystem::remove_all(base);
    cloud::write_fixture_files(cloud::generate_fixture(1, 2, 100000), base / "a");
    cloud::write_fixture_files(cloud::generate_fixture(1, 2, 100000), base / "b");
    for (const char* name : {"ontology.json", "architecture.json", "streams.json", "data.lp"}) {
      CHECK(slurp(base / "a" / name) == slurp(base / "b" / name));
      CHECK_FALSE(slurp(base / "a" / name).empty());
    }
    std::filesystem::remove_all(base);
  }

  TEST_CASE("preconditions") {
    CHECK_THROWS_AS(cloud::generate_fixture(1, 0, 1000), Error);
    CHECK_THROWS_AS(cloud::generate_fixture(1, 1, 0), Error);
  }

  TEST_CASE("every fixture stream registers") {
    for (std::size_t hosts : {1u, 2u, 7u}) {
      const auto f = cloud::generate_fixture(hosts, hosts, 5000);
      auto sys = test::loaded_system(f);
      CHECK(sys->catalog().streams().size() == 2 * hosts);
      for (std::size_t h = 1; h <= hosts; ++h) CHECK(sys->store().has_series(cloud::status_key(h)));
    }
  }

  TEST_CASE("scripted case study") {
    const auto f = cloud::scripted_fixture();
    CHECK(test::per_ms_up_fraction(test::status_events(f, 1), f.window) == 0.8);
    CHECK(test::per_ms_up_fraction(test::status_events(f, 2), f.window) == 1.0);
    const auto report = cloud::run_case_study(f);
    CHECK(report.value == doctest::Approx(0.9));
    CHECK(report.oracle == doctest::Approx(0.9));
    CHECK(report.rules == std::vector<std::string>{"composition", "metric", "metric"});
    CHECK(report.query == "DERIVE metric=cluster_availability entity=/dc1/c1 RANGE 0 100");
  }

  TEST_CASE("all hosts always up") {
    auto f = cloud::scripted_fixture();
    std::erase_if(f.records, [](const LineRecord& r) { return r.sample == state_sample(60, "down"); });
    CHECK(cloud::run_case_study(f).value == 1.0);
  }

  TEST_CASE("case study agrees with both oracles over random seeds") {
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
      const auto f = cloud::generate_fixture(seed, 1 + seed % 4, 20000);
      const auto report = cloud::run_case_study(f);
      const double per_ms = test::per_ms_cluster_availability(f, f.window);
      CAPTURE(seed);
      CHECK(std::abs(report.value - report.oracle) <= 1e-9);
      CHECK(std::abs(report.value - per_ms) <= 1e-9);
    }
  }
}
