// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "setsdb/error.hpp"
#include "setsdb/expr.hpp"
#include "support.hpp"

using namespace setsdb;

namespace {

std::vector<Sample> states(std::initializer_list<std::pair<Millis, const char*>> xs) {
  std::vector<Sample> out;
  for (auto [t, s] : xs) out.push_back(state_sample(t, s));
  return out;
}

std::vector<Sample> nums(std::initializer_list<std::pair<Millis, double>> xs) {
  std::vector<Sample> out;
  for (auto [t, v] : xs) out.push_back(numeric_sample(t, v));
  return out;
}

}  // namespace

TEST_SUITE("expr") {
  TEST_CASE("parse shapes") {
    const auto call = parse_expr("up_ratio(status)");
    REQUIRE(std::holds_alternative<CallNode>(call->node));
    CHECK(std::get<CallNode>(call->node).fn == Builtin::kUpRatio);
    CHECK(std::get<CallNode>(call->node).arg == "status");

    const auto e = parse_expr("a + b * c");
    REQUIRE(std::holds_alternative<BinaryNode>(e->node));
    const auto& add = std::get<BinaryNode>(e->node);
    CHECK(add.op == BinaryOp::kAdd);
    CHECK(std::holds_alternative<BinaryNode>(add.rhs->node));
    CHECK(structurally_equal(*e, *make_binary(BinaryOp::kAdd, make_ref("a"),
                                              make_binary(BinaryOp::kMul, make_ref("b"), make_ref("c")))));
    CHECK(print_expr(*parse_expr("(a - b) - (c - d)")) == "a - b - (c - d)");
    CHECK(print_expr(*parse_expr("a / (b * c)")) == "a / (b * c)");
  }

  TEST_CASE("parse errors carry a position") {
    try {
      (void)parse_expr("a +");
      FAIL("expected an error");
    } catch (const PositionedError& e) {
      CHECK(e.code() == ErrorCode::kExpressionParseError);
      CHECK(e.position() == 3);
    }
    CHECK_THROWS_AS(parse_expr("frob(x)"), PositionedError);
    CHECK_THROWS_AS(parse_expr("up_ratio(2)"), PositionedError);
    CHECK_THROWS_AS(parse_expr("(a"), PositionedError);
    CHECK_THROWS_AS(parse_expr("a b"), PositionedError);
    CHECK_THROWS_AS(parse_expr(""), PositionedError);
  }

  TEST_CASE("free metrics") {
    CHECK(free_metrics(*parse_expr("up_ratio(status)")) == std::set<std::string>{"status"});
    CHECK(free_metrics(*parse_expr("0.5")).empty());
    CHECK(free_metrics(*parse_expr("load_a + load_b")) == std::set<std::string>{"load_a", "load_b"});
  }

  TEST_CASE("up_ratio") {
    const auto ev = states({{0, "up"}, {60, "down"}, {80, "up"}});
    CHECK(*up_ratio(ev, {0, 100}) == doctest::Approx(0.8).epsilon(1e-15));
    EvalContext ctx{{0, 100}, {{"status", ev}}, MissingDataPolicy::kIgnore};
    const auto out = evaluate(*parse_expr("up_ratio(status)"), ctx);
    REQUIRE(out.size() == 1);
    CHECK(out[0].timestamp == 0);
    CHECK(out[0].number() == doctest::Approx(0.8));

    CHECK(*up_ratio(states({{-50, "up"}}), {10, 20}) == 1.0);
    // The interval before the first known state is not counted.
    CHECK(*up_ratio(states({{50, "down"}, {75, "up"}}), {0, 100}) == 0.5);
    CHECK_FALSE(up_ratio(states({{200, "up"}}), {0, 100}).has_value());
    CHECK_THROWS_AS(up_ratio(states({{0, "sleepy"}}), {0, 100}), Error);
  }

  TEST_CASE("up_ratio against the per-millisecond scan") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 300; ++i) {
      std::vector<std::pair<Millis, std::string>> ev;
      Millis t = test::pick(rng, -200, 200);
      const auto n = test::pick(rng, 1, 12);
      for (std::int64_t k = 0; k < n; ++k) {
        ev.emplace_back(t, test::coin(rng) ? "up" : "down");
        t += test::pick(rng, 1, 80);
      }
      const Window w{test::pick(rng, -100, 300), 0};
      const Window win{w.begin, w.begin + test::pick(rng, 1, 400)};
      std::vector<Sample> samples;
      for (const auto& [ts, s] : ev) samples.push_back(state_sample(ts, s));
      const double oracle = test::per_ms_up_fraction(ev, win);
      const auto got = up_ratio(samples, win);
      if (std::isnan(oracle)) {
        CHECK_FALSE(got.has_value());
      } else {
        REQUIRE(got.has_value());
        CHECK(std::abs(*got - oracle) <= 1e-12);
        // Swapping the labels gives the complement.
        std::vector<Sample> swapped;
        for (const auto& [ts, s] : ev) swapped.push_back(state_sample(ts, s == "up" ? "down" : "up"));
        CHECK(std::abs(*got + *up_ratio(swapped, win) - 1.0) <= 1e-12);
      }
    }
  }

  TEST_CASE("pointwise arithmetic") {
    const auto a = nums({{0, 1.5}, {10, 2.5}, {20, -4}});
    const auto b = nums({{0, 3}, {10, 0.25}, {20, 8}});
    EvalContext ctx{{0, 100}, {{"a", a}, {"b", b}}, MissingDataPolicy::kIgnore};
    const auto sum = evaluate(*parse_expr("a+b"), ctx);
    REQUIRE(sum.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(sum[i].number() == a[i].number() + b[i].number());
    const auto half = evaluate(*parse_expr("(a+a)/2"), ctx);
    CHECK(half == a);
    const auto ab = evaluate(*parse_expr("a + b + 2"), ctx);
    const auto ba = evaluate(*parse_expr("2 + b + a"), ctx);
    REQUIRE(ab.size() == ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(std::abs(ab[i].number() - ba[i].number()) <= 1e-12);

    const auto zero = nums({{0, 1}, {10, 0}, {20, 1}});
    ctx.bindings["z"] = zero;
    CHECK_THROWS_AS(evaluate(*parse_expr("a / z"), ctx), Error);
    CHECK_THROWS_AS(evaluate(*parse_expr("a + missing"), ctx), Error);
  }

  TEST_CASE("missing data policies") {
    const auto a = nums({{0, 0}, {10, 10}, {20, 20}});
    const auto b = nums({{0, 100}, {20, 300}});
    EvalContext ctx{{0, 100}, {{"a", a}, {"b", b}}, MissingDataPolicy::kIgnore};
    CHECK(evaluate(*parse_expr("a + b"), ctx) == nums({{0, 100}, {20, 320}}));
    ctx.missing_data_policy = MissingDataPolicy::kInterpolate;
    CHECK(evaluate(*parse_expr("a + b"), ctx) == nums({{0, 100}, {10, 210}, {20, 320}}));
  }

  TEST_CASE("parse print parse over a generated corpus") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int i = 0; i < 1500; ++i) {
      const std::string text = test::random_expr_text(rng, 4);
      CAPTURE(text);
      const auto first = parse_expr(text);
      const std::string printed = print_expr(*first);
      CAPTURE(printed);
      const auto second = parse_expr(printed);
      CHECK(structurally_equal(*first, *second));
      CHECK(print_expr(*second) == printed);
      ++checked;
    }
    CHECK(checked >= 1000);
  }
}
