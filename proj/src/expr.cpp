// SPDX-License-Identifier: Apache-2.0
#include "setsdb/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "setsdb/error.hpp"
#include "setsdb/kernels.hpp"

namespace setsdb {

namespace {

enum class Tok { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kLParen, kRParen, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string_view text;
  std::size_t pos = 0;
};

std::string describe(const Token& t) {
  return t.kind == Tok::kEnd ? std::string("end of input") : "'" + std::string(t.text) + "'";
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    Token t;
    t.pos = i_;
    if (i_ >= src_.size()) return t;
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      return number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
      t.kind = Tok::kIdent;
      t.text = src_.substr(i_, j - i_);
      i_ = j;
      return t;
    }
    t.text = src_.substr(i_, 1);
    switch (c) {
      case '+': t.kind = Tok::kPlus; break;
      case '-': t.kind = Tok::kMinus; break;
      case '*': t.kind = Tok::kStar; break;
      case '/': t.kind = Tok::kSlash; break;
      case '(': t.kind = Tok::kLParen; break;
      case ')': t.kind = Tok::kRParen; break;
      default:
        throw PositionedError(ErrorCode::kExpressionParseError, i_,
                              "unexpected character '" + std::string(1, c) + "'");
    }
    ++i_;
    return t;
  }

 private:
  Token number() {
    Token t;
    t.kind = Tok::kNumber;
    t.pos = i_;
    std::size_t j = i_;
    auto digits = [&] {
      while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
    };
    digits();
    if (j < src_.size() && src_[j] == '.') {
      ++j;
      const std::size_t frac = j;
      digits();
      if (j == frac) throw PositionedError(ErrorCode::kExpressionParseError, j, "expected digits after '.'");
    }
    if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
      ++j;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      const std::size_t exp = j;
      digits();
      if (j == exp) throw PositionedError(ErrorCode::kExpressionParseError, j, "expected exponent digits");
    }
    t.text = src_.substr(i_, j - i_);
    i_ = j;
    return t;
  }

  std::string_view src_;
  std::size_t i_ = 0;
};

std::optional<Builtin> builtin_from(std::string_view name) {
  if (name == "up_ratio") return Builtin::kUpRatio;
  if (name == "sum_over_subentities") return Builtin::kSumOverSubentities;
  if (name == "mean_over_subentities") return Builtin::kMeanOverSubentities;
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) { advance(); }

  ExprPtr parse() {
    ExprPtr e = expr();
    if (cur_.kind != Tok::kEnd) fail("expected operator or end of input, got " + describe(cur_));
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw PositionedError(ErrorCode::kExpressionParseError, cur_.pos, msg);
  }

  void advance() { cur_ = lexer_.next(); }

  ExprPtr with_pos(ExprPtr e, std::size_t pos) {
    auto copy = std::make_shared<Expr>(*e);
    copy->position = pos;
    return copy;
  }

  ExprPtr expr() {
    const std::size_t start = cur_.pos;
    ExprPtr lhs = term();
    while (cur_.kind == Tok::kPlus || cur_.kind == Tok::kMinus) {
      const BinaryOp op = cur_.kind == Tok::kPlus ? BinaryOp::kAdd : BinaryOp::kSub;
      advance();
      lhs = with_pos(make_binary(op, lhs, term()), start);
    }
    return lhs;
  }

  ExprPtr term() {
    const std::size_t start = cur_.pos;
    ExprPtr lhs = factor();
    while (cur_.kind == Tok::kStar || cur_.kind == Tok::kSlash) {
      const BinaryOp op = cur_.kind == Tok::kStar ? BinaryOp::kMul : BinaryOp::kDiv;
      advance();
      lhs = with_pos(make_binary(op, lhs, factor()), start);
    }
    return lhs;
  }

  ExprPtr factor() {
    const Token t = cur_;
    switch (t.kind) {
      case Tok::kNumber: {
        double v = 0;
        auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc()) fail("number out of range");
        advance();
        return with_pos(make_number(v), t.pos);
      }
      case Tok::kIdent: {
        advance();
        if (cur_.kind != Tok::kLParen) return with_pos(make_ref(std::string(t.text)), t.pos);
        auto fn = builtin_from(t.text);
        if (!fn) {
          throw PositionedError(ErrorCode::kExpressionParseError, t.pos,
                                "unknown function '" + std::string(t.text) + "'");
        }
        advance();
        if (cur_.kind != Tok::kIdent) fail("expected metric name, got " + describe(cur_));
        std::string arg(cur_.text);
        advance();
        if (cur_.kind != Tok::kRParen) fail("expected ')', got " + describe(cur_));
        advance();
        return with_pos(make_call(*fn, std::move(arg)), t.pos);
      }
      case Tok::kLParen: {
        advance();
        ExprPtr inner = expr();
        if (cur_.kind != Tok::kRParen) fail("expected ')', got " + describe(cur_));
        advance();
        return inner;
      }
      default:
        fail("expected number, metric or '(', got " + describe(t));
    }
  }

  Lexer lexer_;
  Token cur_;
};

int precedence(const Expr& e) {
  if (const auto* b = std::get_if<BinaryNode>(&e.node)) {
    return (b->op == BinaryOp::kAdd || b->op == BinaryOp::kSub) ? 1 : 2;
  }
  return 3;
}

char op_char(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return '+';
    case BinaryOp::kSub: return '-';
    case BinaryOp::kMul: return '*';
    case BinaryOp::kDiv: return '/';
  }
  return '?';
}

void collect_free(const Expr& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, MetricRefNode>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, CallNode>) {
          out.insert(n.arg);
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          collect_free(*n.lhs, out);
          collect_free(*n.rhs, out);
        }
      },
      e.node);
}

void collect_calls(const Expr& e, std::vector<CallNode>& out) {
  if (const auto* c = std::get_if<CallNode>(&e.node)) out.push_back(*c);
  if (const auto* b = std::get_if<BinaryNode>(&e.node)) {
    collect_calls(*b->lhs, out);
    collect_calls(*b->rhs, out);
  }
}

// A numeric operand: either a broadcast scalar or a timestamped series.
struct Operand {
  bool scalar = false;
  double value = 0.0;
  std::vector<Millis> ts;
  std::vector<double> v;
};

Operand series_operand(const std::string& name, const EvalContext& ctx) {
  auto it = ctx.bindings.find(name);
  if (it == ctx.bindings.end()) throw Error(ErrorCode::kUnboundMetric, "metric '" + name + "' is not bound");
  Operand out;
  for (const auto& s : it->second) {
    if (!s.is_numeric()) {
      throw Error(ErrorCode::kKindMismatch, "metric '" + name + "' is symbolic; only up_ratio accepts it");
    }
    if (!ctx.window.contains(s.timestamp)) continue;
    out.ts.push_back(s.timestamp);
    out.v.push_back(std::get<double>(s.value));
  }
  return out;
}

// Value of `other` at time t, or nullopt when missing under the policy.
std::optional<double> sample_at(const Operand& other, Millis t, MissingDataPolicy policy) {
  auto it = std::lower_bound(other.ts.begin(), other.ts.end(), t);
  const auto idx = static_cast<std::size_t>(it - other.ts.begin());
  if (it != other.ts.end() && *it == t) return other.v[idx];
  if (policy == MissingDataPolicy::kIgnore) return std::nullopt;
  if (it == other.ts.begin() || it == other.ts.end()) return std::nullopt;
  const Millis t0 = other.ts[idx - 1];
  const Millis t1 = other.ts[idx];
  const double frac = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
  return other.v[idx - 1] + (other.v[idx] - other.v[idx - 1]) * frac;
}

Operand combine(BinaryOp op, const Operand& a, const Operand& b, MissingDataPolicy policy) {
  Operand out;
  if (a.scalar && b.scalar) {
    out.scalar = true;
    switch (op) {
      case BinaryOp::kAdd: out.value = a.value + b.value; break;
      case BinaryOp::kSub: out.value = a.value - b.value; break;
      case BinaryOp::kMul: out.value = a.value * b.value; break;
      case BinaryOp::kDiv:
        if (b.value == 0.0) throw Error(ErrorCode::kDivisionByZero, "division by zero");
        out.value = a.value / b.value;
        break;
    }
    return out;
  }
  // Align both sides on the grid of the leftmost series operand.
  const Operand& grid = a.scalar ? b : a;
  std::vector<double> lhs;
  std::vector<double> rhs;
  lhs.reserve(grid.ts.size());
  rhs.reserve(grid.ts.size());
  for (std::size_t i = 0; i < grid.ts.size(); ++i) {
    const Millis t = grid.ts[i];
    const std::optional<double> l = a.scalar ? a.value : grid.v[i];
    const std::optional<double> r = b.scalar ? b.value : (&b == &grid ? grid.v[i] : sample_at(b, t, policy));
    if (!l || !r) continue;
    out.ts.push_back(t);
    lhs.push_back(*l);
    rhs.push_back(*r);
  }
  out.v.resize(lhs.size());
  switch (op) {
    case BinaryOp::kAdd: kernels::add(lhs, rhs, out.v); break;
    case BinaryOp::kSub: kernels::sub(lhs, rhs, out.v); break;
    case BinaryOp::kMul: kernels::mul(lhs, rhs, out.v); break;
    case BinaryOp::kDiv:
      if (std::find(rhs.begin(), rhs.end(), 0.0) != rhs.end()) {
        throw Error(ErrorCode::kDivisionByZero, "division by a zero sample");
      }
      kernels::div(lhs, rhs, out.v);
      break;
  }
  return out;
}

Operand eval(const Expr& e, const EvalContext& ctx) {
  return std::visit(
      [&](const auto& n) -> Operand {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberNode>) {
          Operand o;
          o.scalar = true;
          o.value = n.value;
          return o;
        } else if constexpr (std::is_same_v<T, MetricRefNode>) {
          return series_operand(n.name, ctx);
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          return combine(n.op, eval(*n.lhs, ctx), eval(*n.rhs, ctx), ctx.missing_data_policy);
        } else {
          if (is_subentity_builtin(n.fn)) {
            throw Error(ErrorCode::kUnsupportedHere,
                        std::string(builtin_name(n.fn)) + " is expanded by the planner, not evaluated");
          }
          auto it = ctx.bindings.find(n.arg);
          if (it == ctx.bindings.end()) {
            throw Error(ErrorCode::kUnboundMetric, "metric '" + n.arg + "' is not bound");
          }
          Operand o;
          if (auto r = up_ratio(it->second, ctx.window)) {
            o.ts.push_back(ctx.window.begin);
            o.v.push_back(*r);
          }
          return o;
        }
      },
      e.node);
}

}  // namespace

std::string_view builtin_name(Builtin fn) {
  switch (fn) {
    case Builtin::kUpRatio: return "up_ratio";
    case Builtin::kSumOverSubentities: return "sum_over_subentities";
    case Builtin::kMeanOverSubentities: return "mean_over_subentities";
  }
  return "?";
}

bool is_subentity_builtin(Builtin fn) {
  return fn == Builtin::kSumOverSubentities || fn == Builtin::kMeanOverSubentities;
}

ExprPtr make_number(double v) { return std::make_shared<Expr>(Expr{NumberNode{v}, 0}); }
ExprPtr make_ref(std::string name) { return std::make_shared<Expr>(Expr{MetricRefNode{std::move(name)}, 0}); }
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<Expr>(Expr{BinaryNode{op, std::move(lhs), std::move(rhs)}, 0});
}
ExprPtr make_call(Builtin fn, std::string arg) {
  return std::make_shared<Expr>(Expr{CallNode{fn, std::move(arg)}, 0});
}

ExprPtr parse_expr(std::string_view text) { return Parser(text).parse(); }

std::string print_expr(const Expr& e) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberNode>) {
          return format_double(n.value);
        } else if constexpr (std::is_same_v<T, MetricRefNode>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, CallNode>) {
          return std::string(builtin_name(n.fn)) + "(" + n.arg + ")";
        } else {
          const int p = precedence(e);
          std::string l = print_expr(*n.lhs);
          std::string r = print_expr(*n.rhs);
          if (precedence(*n.lhs) < p) l = "(" + l + ")";
          if (precedence(*n.rhs) <= p) r = "(" + r + ")";
          return l + " " + op_char(n.op) + " " + r;
        }
      },
      e.node);
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        const T& m = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberNode>) {
          return n.value == m.value;
        } else if constexpr (std::is_same_v<T, MetricRefNode>) {
          return n.name == m.name;
        } else if constexpr (std::is_same_v<T, CallNode>) {
          return n.fn == m.fn && n.arg == m.arg;
        } else {
          return n.op == m.op && structurally_equal(*n.lhs, *m.lhs) && structurally_equal(*n.rhs, *m.rhs);
        }
      },
      a.node);
}

std::set<std::string> free_metrics(const Expr& e) {
  std::set<std::string> out;
  collect_free(e, out);
  return out;
}

std::vector<CallNode> calls(const Expr& e) {
  std::vector<CallNode> out;
  collect_calls(e, out);
  return out;
}

std::string_view missing_data_policy_name(MissingDataPolicy p) {
  return p == MissingDataPolicy::kInterpolate ? "interpolate" : "ignore";
}

MissingDataPolicy parse_missing_data_policy(std::string_view name) {
  if (name == "interpolate") return MissingDataPolicy::kInterpolate;
  if (name == "ignore") return MissingDataPolicy::kIgnore;
  throw Error(ErrorCode::kSchemaError, "missing_data_policy must be 'interpolate' or 'ignore', got '" +
                                           std::string(name) + "'");
}

std::optional<double> up_ratio(std::span<const Sample> events, Window window) {
  if (window.begin >= window.end) throw Error(ErrorCode::kInvalidArgument, "up_ratio needs a non-empty window");
  std::vector<const Sample*> sorted;
  sorted.reserve(events.size());
  for (const auto& s : events) {
    if (s.is_numeric()) throw Error(ErrorCode::kKindMismatch, "up_ratio needs a symbolic up/down stream");
    const std::string& label = std::get<std::string>(s.value);
    if (label != "up" && label != "down") {
      throw Error(ErrorCode::kKindMismatch, "up_ratio understands only 'up' and 'down', got '" + label + "'");
    }
    sorted.push_back(&s);
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Sample* a, const Sample* b) { return a->timestamp < b->timestamp; });

  // State in force at window.begin: the latest event at or before it.
  std::optional<bool> state;
  Millis cursor = window.begin;
  Millis up = 0;
  Millis covered = 0;
  for (const Sample* s : sorted) {
    if (s->timestamp <= window.begin) {
      state = std::get<std::string>(s->value) == "up";
      continue;
    }
    if (s->timestamp >= window.end) break;
    if (state) {
      covered += s->timestamp - cursor;
      if (*state) up += s->timestamp - cursor;
    }
    state = std::get<std::string>(s->value) == "up";
    cursor = s->timestamp;
  }
  if (state) {
    covered += window.end - cursor;
    if (*state) up += window.end - cursor;
  }
  if (covered == 0) return std::nullopt;
  return static_cast<double>(up) / static_cast<double>(covered);
}

std::vector<Sample> evaluate(const Expr& e, const EvalContext& ctx) {
  if (ctx.window.begin >= ctx.window.end) {
    throw Error(ErrorCode::kInvalidArgument, "evaluation window must satisfy t0 < t1");
  }
  Operand result = eval(e, ctx);
  std::vector<Sample> out;
  if (result.scalar) {
    out.push_back(numeric_sample(ctx.window.begin, result.value));
    return out;
  }
  out.reserve(result.ts.size());
  for (std::size_t i = 0; i < result.ts.size(); ++i) out.push_back(numeric_sample(result.ts[i], result.v[i]));
  return out;
}

}  // namespace setsdb
