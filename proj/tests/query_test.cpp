// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "setsdb/cloud.hpp"
#include "setsdb/error.hpp"
#include "setsdb/query.hpp"
#include "support.hpp"

using namespace setsdb;

namespace {

std::size_t error_position(std::string_view text) {
  try {
    (void)parse_query(text);
  } catch (const PositionedError& e) {
    CHECK(e.code() == ErrorCode::kQueryParseError);
    return e.position();
  }
  FAIL("expected a parse error for " << text);
  return 0;
}

}  // namespace

TEST_SUITE("query") {
  TEST_CASE("grammar exemplars") {
    const auto bq = parse_query("SELECT clouddb.status{host=h1} RANGE 0 100");
    REQUIRE(std::holds_alternative<BasicQuery>(bq));
    CHECK(std::get<BasicQuery>(bq).key == cloud::status_key(1));
    CHECK(std::get<BasicQuery>(bq).window == Window{0, 100});

    const auto eq = parse_query("DERIVE metric=availability entity=/dc1/c1/h1 RANGE 0 100");
    REQUIRE(std::holds_alternative<ExactQuery>(eq));
    CHECK(std::get<ExactQuery>(eq).query.metric == "availability");
    CHECK(std::get<ExactQuery>(eq).query.entity == "/dc1/c1/h1");

    const auto sq = parse_query("match metric~\"cpu 'avg load'\" TOP=3 min=0.25 range 5 10");
    REQUIRE(std::holds_alternative<SimilarityQuery>(sq));
    const auto& s = std::get<SimilarityQuery>(sq);
    CHECK(s.metric == KeywordSet{"cpu", "avg load"});
    CHECK(s.top == 3u);
    CHECK(s.min == 0.25);
    CHECK(print_query(sq) == "MATCH metric~\"'avg load' cpu\" top=3 min=0.25 RANGE 5 10");
    CHECK(print_query(parse_query("DERIVE db=x unit=second entity=/a metric=m RANGE 1 2")) ==
          "DERIVE metric=m entity=/a unit=second db=x RANGE 1 2");
  }

  TEST_CASE("parse errors") {
    error_position("MATCH RANGE 0 100");
    error_position("SELECT clouddb.status RANGE 100 0");
    error_position("SELECT clouddb.status RANGE 0 100 extra");
    error_position("DERIVE metric=a RANGE 0 1");
    error_position("DERIVE metric=a metric=b entity=/x RANGE 0 1");
    error_position("MATCH metric~\"\" RANGE 0 1");
    error_position("MATCH metric~\"a\" top=0 RANGE 0 1");
    error_position("MATCH metric~\"a\" min=1.5 RANGE 0 1");
    error_position("FETCH x RANGE 0 1");
    error_position("");
    CHECK(error_position("SELECT db.m RANGE 0") == 19);
  }

  TEST_CASE("parse print parse over a generated corpus") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 1500; ++i) {
      const std::string text = test::random_query_text(rng);
      CAPTURE(text);
      const Query first = parse_query(text);
      const std::string printed = print_query(first);
      CAPTURE(printed);
      const Query second = parse_query(printed);
      CHECK(second == first);
      CHECK(print_query(second) == printed);
    }
  }

  TEST_CASE("basic queries read the store directly") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    const auto r = run_query(parse_query("SELECT clouddb.status{host=h1} RANGE 0 100"), *sys);
    CHECK(r.samples == sys->store().read_range(cloud::status_key(1), 0, 100));
    CHECK(r.samples.size() == 3);
    CHECK(r.explanation.empty());
    CHECK_FALSE(r.plan);
    CHECK_THROWS_AS(run_query(parse_query("SELECT clouddb.nope RANGE 0 100"), *sys), Error);
  }

  TEST_CASE("exact queries") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    const auto q = parse_query("DERIVE metric=cluster_availability entity=/dc1/c1 RANGE 0 100");
    const auto r = run_query(q, *sys);
    CHECK(r.samples == std::vector<Sample>{numeric_sample(0, 0.9)});
    CHECK(r.explanation.size() == 3);
    CHECK_FALSE(r.materialized);
    CHECK_FALSE(sys->catalog().has_stream(SeriesKey::parse("clouddb.cluster_availability{entity=/dc1/c1}")));

    const auto m = run_query(q, *sys, {true});
    REQUIRE(m.materialized);
    CHECK(sys->catalog().has_stream(*m.materialized));
    const auto doc = query_result_to_json(q, m);
    CHECK(doc["kind"] == "exact");
    CHECK(doc["samples"].size() == 1);
    CHECK(doc["materialized"] == "clouddb.cluster_availability{entity=/dc1/c1}");
  }

  TEST_CASE("similarity queries") {
    auto sys = test::loaded_system(cloud::scripted_fixture());
    const auto q = parse_query("MATCH metric~\"availability\" RANGE 0 100");
    const auto r = run_query(q, *sys);
    REQUIRE(r.matches.size() == 2);
    CHECK(r.matches[0].match.key == cloud::status_key(1));
    CHECK(r.matches[1].match.key == cloud::status_key(2));
    CHECK(r.matches[0].samples == std::vector<Sample>{numeric_sample(0, 0.8)});
    CHECK(r.matches[1].samples == std::vector<Sample>{numeric_sample(0, 1.0)});
    CHECK_FALSE(r.explanation.empty());
    const auto doc = query_result_to_json(q, r);
    CHECK(doc["matches"].size() == 2);
  }
}
