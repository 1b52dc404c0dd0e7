// SPDX-License-Identifier: Apache-2.0
#pragma once

// Quantitative-definition expressions:
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := NUMBER | IDENT | IDENT '(' IDENT ')' | '(' expr ')'
//
// The only callable identifiers are the builtins below.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "setsdb/series.hpp"

namespace setsdb {

enum class BinaryOp { kAdd, kSub, kMul, kDiv };

enum class Builtin {
  kUpRatio,               // fraction of the window spent "up"
  kSumOverSubentities,    // expanded by the planner, never evaluated here
  kMeanOverSubentities,
};

std::string_view builtin_name(Builtin fn);
bool is_subentity_builtin(Builtin fn);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberNode {
  double value = 0.0;
};
struct MetricRefNode {
  std::string name;
};
struct BinaryNode {
  BinaryOp op = BinaryOp::kAdd;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct CallNode {
  Builtin fn = Builtin::kUpRatio;
  std::string arg;
};

struct Expr {
  std::variant<NumberNode, MetricRefNode, BinaryNode, CallNode> node;
  std::size_t position = 0;  // offset of the node's first token in the source
};

ExprPtr make_number(double v);
ExprPtr make_ref(std::string name);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(Builtin fn, std::string arg);

// Throws PositionedError(kExpressionParseError).
ExprPtr parse_expr(std::string_view text);

// Canonical text with the minimum parentheses needed to reparse to the same tree.
std::string print_expr(const Expr& e);

// Deep comparison ignoring source positions.
bool structurally_equal(const Expr& a, const Expr& b);

// Identifiers used as references or builtin arguments.
std::set<std::string> free_metrics(const Expr& e);

// Builtin calls in e, in source order.
std::vector<CallNode> calls(const Expr& e);

enum class MissingDataPolicy { kInterpolate, kIgnore };

std::string_view missing_data_policy_name(MissingDataPolicy p);
MissingDataPolicy parse_missing_data_policy(std::string_view name);

struct EvalContext {
  Window window;
  // Series per metric reference. Symbolic series may carry one sample before
  // window.begin holding the state in force at the window start.
  std::map<std::string, std::vector<Sample>> bindings;
  MissingDataPolicy missing_data_policy = MissingDataPolicy::kIgnore;
};

// Pointwise arithmetic over aligned series; the leftmost series operand's
// timestamps form the output grid. A literal-only expression yields one
// sample at window.begin.
std::vector<Sample> evaluate(const Expr& e, const EvalContext& ctx);

// Fraction of `window` during which the state in force was "up". Time before
// the first known state is excluded from numerator and denominator. Returns
// nullopt when no part of the window has a known state.
std::optional<double> up_ratio(std::span<const Sample> events, Window window);

}  // namespace setsdb
