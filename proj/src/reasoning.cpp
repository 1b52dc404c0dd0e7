// SPDX-License-Identifier: Apache-2.0
#include "setsdb/reasoning.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"
#include "setsdb/kernels.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

std::string label(std::string_view metric, std::string_view entity) {
  return std::string(metric) + "(" + std::string(entity) + ")";
}

// Replaces each *_over_subentities call with a reference the planner binds
// to an Aggregate sub-plan. '#' cannot appear in a parsed identifier.
ExprPtr hoist_subentity_calls(const ExprPtr& e, std::vector<std::pair<std::string, CallNode>>& hoisted) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BinaryNode>) {
          auto lhs = hoist_subentity_calls(n.lhs, hoisted);
          auto rhs = hoist_subentity_calls(n.rhs, hoisted);
          if (lhs == n.lhs && rhs == n.rhs) return e;
          return std::make_shared<Expr>(Expr{BinaryNode{n.op, lhs, rhs}, e->position});
        } else if constexpr (std::is_same_v<T, CallNode>) {
          if (!is_subentity_builtin(n.fn)) return e;
          std::string name = "#sub" + std::to_string(hoisted.size());
          hoisted.emplace_back(name, n);
          return std::make_shared<Expr>(Expr{MetricRefNode{name}, e->position});
        } else {
          return e;
        }
      },
      e->node);
}

void collect_refs(const Expr& e, std::set<std::string>& refs, std::set<std::string>& up_ratio_args) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, MetricRefNode>) {
          refs.insert(n.name);
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          collect_refs(*n.lhs, refs, up_ratio_args);
          collect_refs(*n.rhs, refs, up_ratio_args);
        } else if constexpr (std::is_same_v<T, CallNode>) {
          if (n.fn == Builtin::kUpRatio) up_ratio_args.insert(n.arg);
        }
      },
      e.node);
}

class Planner {
 public:
  Planner(const Catalog& catalog, const OntologySet& ontology, std::string database, Window window,
          const SystemArchitecture& arch)
      : catalog_(catalog), ontology_(ontology), database_(std::move(database)), window_(window), arch_(arch) {}

  PlanPtr plan(const std::string& entity, const MetricNode& metric) {
    const auto key = std::make_pair(entity, metric.name);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (auto it = failures_.find(key); it != failures_.end()) throw Error(ErrorCode::kUnderivable, it->second);
    arch_.entity(entity);
    PlanPtr out = direct(entity, metric);
    if (!out) {
      if (!metric.definition) {
        std::string why = "no stream of " + metric.name + " for " + entity + " and no quantitative definition";
        failures_.emplace(key, why);
        throw Error(ErrorCode::kUnderivable, why);
      }
      try {
        out = derive(entity, metric);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kUnderivable) failures_.emplace(key, e.what());
        throw;
      }
    }
    memo_.emplace(key, out);
    return out;
  }

  // Brings a numeric plan into the base unit of its dimension.
  PlanPtr to_base(const PlanPtr& p) {
    if (p->value_kind == ValueKind::kSymbolic || p->unit.empty()) return p;
    const UnitNode& base = ontology_.base_unit(ontology_.unit(p->unit).dimension);
    if (base.name == p->unit) return p;
    return convert(p, base.name);
  }

  PlanPtr convert(const PlanPtr& p, const std::string& to) {
    if (p->value_kind == ValueKind::kSymbolic) {
      throw Error(ErrorCode::kUnitMismatch, label(p->metric, p->entity) + " is symbolic and cannot be converted");
    }
    if (p->unit.empty()) {
      throw Error(ErrorCode::kUnitMismatch, label(p->metric, p->entity) + " has no known unit to convert from");
    }
    const double factor = ontology_.unit_conversion_factor(p->unit, to);
    auto node = std::make_shared<PlanNode>();
    node->kind = StepKind::kConvertUnit;
    node->entity = p->entity;
    node->metric = p->metric;
    node->unit = to;
    node->factor = factor;
    node->policy = p->policy;
    node->inputs.push_back(p);
    lines_.push_back({"unit", label(p->metric, p->entity) + " " + p->unit + " -> " + to + " x" + format_double(factor)});
    return node;
  }

  void add_line(std::string rule, std::string detail) { lines_.push_back({std::move(rule), std::move(detail)}); }

  std::vector<Retrieval> retrievals;

  std::vector<std::string> numbered_lines() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      out.push_back(std::to_string(i + 1) + " " + lines_[i].first + " " + lines_[i].second);
    }
    return out;
  }

 private:
  PlanPtr direct(const std::string& entity, const MetricNode& metric) {
    auto streams = catalog_.find_streams(database_, entity, metric.name);
    if (streams.empty()) return nullptr;
    const StreamSemantics& sem = streams.front();
    Retrieval r{sem.key, window_, sem.value_kind == ValueKind::kSymbolic};
    auto it = std::find(retrievals.begin(), retrievals.end(), r);
    auto node = std::make_shared<PlanNode>();
    node->kind = StepKind::kRetrieve;
    node->entity = entity;
    node->metric = metric.name;
    node->unit = sem.unit;
    node->value_kind = sem.value_kind;
    node->policy = sem.missing_data_policy;
    node->retrieval = static_cast<std::size_t>(it - retrievals.begin());
    if (it == retrievals.end()) retrievals.push_back(std::move(r));
    return node;
  }

  const MetricNode& referenced(const MetricNode& metric, const std::string& token) const {
    return ontology_.metrics().at(metric.definition_refs.at(token));
  }

  std::string describe_binding(const PlanPtr& p) const {
    const PlanNode* n = p.get();
    while (n->kind == StepKind::kConvertUnit) n = n->inputs.front().get();
    if (n->kind == StepKind::kRetrieve) return retrievals[n->retrieval].key.to_string();
    return "derived " + label(n->metric, n->entity);
  }

  PlanPtr derive(const std::string& entity, const MetricNode& metric) {
    const Expr& def = *metric.definition;
    if (const auto* call = std::get_if<CallNode>(&def.node); call && is_subentity_builtin(call->fn)) {
      return compose(entity, metric, *call);
    }

    const std::size_t line = lines_.size();
    add_line("metric", "");

    std::vector<std::pair<std::string, CallNode>> hoisted;
    auto node = std::make_shared<PlanNode>();
    node->kind = StepKind::kEvaluateExpr;
    node->entity = entity;
    node->metric = metric.name;
    node->expr = hoist_subentity_calls(metric.definition, hoisted);

    std::set<std::string> refs;
    std::set<std::string> up_args;
    collect_refs(*node->expr, refs, up_args);
    bool interpolate = true;
    std::set<std::string> dimensions;
    for (const auto& [name, call] : hoisted) {
      auto sub = std::const_pointer_cast<PlanNode>(compose(entity, metric, call));
      sub->part = name.substr(1);
      node->bindings[name] = sub;
      refs.erase(name);
    }
    for (const auto& token : refs) {
      PlanPtr sub = plan(entity, referenced(metric, token));
      if (sub->value_kind == ValueKind::kSymbolic) {
        throw Error(ErrorCode::kKindMismatch, label(sub->metric, entity) + " is symbolic; in the definition of " +
                                                  metric.name + " only up_ratio may use it");
      }
      node->bindings[token] = to_base(sub);
    }
    for (const auto& token : up_args) {
      PlanPtr sub = plan(entity, referenced(metric, token));
      if (sub->value_kind != ValueKind::kSymbolic) {
        throw Error(ErrorCode::kKindMismatch,
                    "up_ratio in the definition of " + metric.name + " needs a symbolic stream, " +
                        label(sub->metric, entity) + " is numeric");
      }
      if (node->bindings.contains(token)) {
        throw Error(ErrorCode::kKindMismatch, "'" + token + "' is used both as a number and as up/down events");
      }
      node->bindings[token] = sub;
    }
    std::string with;
    for (const auto& [token, sub] : node->bindings) {
      if (sub->policy != MissingDataPolicy::kInterpolate) interpolate = false;
      if (sub->value_kind == ValueKind::kNumeric && !sub->unit.empty()) {
        dimensions.insert(ontology_.unit(sub->unit).dimension);
      }
      if (token.front() == '#') continue;
      with += (with.empty() ? " with " : ", ") + token + " <- " + describe_binding(sub);
    }
    node->policy = node->bindings.empty() || !interpolate ? MissingDataPolicy::kIgnore : MissingDataPolicy::kInterpolate;
    node->unit = output_unit(metric, dimensions, up_args.empty() ? 0 : 1);
    lines_[line].second = label(metric.name, entity) + " := " + print_expr(def) + with;
    return node;
  }

  std::string output_unit(const MetricNode& metric, const std::set<std::string>& dimensions, int up_ratios) const {
    if (metric.unit_dimension) return ontology_.base_unit(*metric.unit_dimension).name;
    if (dimensions.size() == 1 && up_ratios == 0) return ontology_.base_unit(*dimensions.begin()).name;
    throw Error(ErrorCode::kUnitMismatch, "metric " + metric.name +
                                              " declares no unit_dimension and its inputs do not fix one");
  }

  PlanPtr compose(const std::string& entity, const MetricNode& metric, const CallNode& call) {
    const MetricNode& inner = referenced(metric, call.arg);
    const std::size_t line = lines_.size();
    add_line("composition", "");

    auto node = std::make_shared<PlanNode>();
    node->kind = StepKind::kAggregate;
    node->entity = entity;
    node->metric = metric.name;
    node->aggregate = call.fn == Builtin::kSumOverSubentities ? AggregateFn::kSum : AggregateFn::kMean;

    std::vector<std::string> used;
    std::vector<std::string> skipped;
    std::set<std::string> dimensions;
    bool interpolate = true;
    for (const Entity& child : arch_.sub_entities(entity)) {
      const auto saved_memo = memo_;
      const auto saved_lines = lines_.size();
      const auto saved_retrievals = retrievals.size();
      PlanPtr sub;
      try {
        sub = plan(child.name, inner);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnderivable) throw;
        memo_ = saved_memo;
        lines_.resize(saved_lines);
        retrievals.resize(saved_retrievals);
        skipped.push_back(child.name);
        continue;
      }
      if (sub->value_kind == ValueKind::kSymbolic) {
        throw Error(ErrorCode::kKindMismatch, label(inner.name, child.name) + " is symbolic and cannot be aggregated");
      }
      sub = to_base(sub);
      if (!sub->unit.empty()) dimensions.insert(ontology_.unit(sub->unit).dimension);
      if (sub->policy != MissingDataPolicy::kInterpolate) interpolate = false;
      node->inputs.push_back(sub);
      used.push_back(child.name);
    }
    if (node->inputs.empty()) {
      lines_.resize(line);
      throw Error(ErrorCode::kUnderivable, "no sub-entity of " + entity + " provides " + inner.name);
    }
    if (dimensions.size() > 1) {
      throw Error(ErrorCode::kUnitMismatch, "sub-entities of " + entity + " report " + inner.name +
                                                " in different dimensions");
    }
    if (metric.unit_dimension) {
      if (!dimensions.empty() && *dimensions.begin() != *metric.unit_dimension) {
        throw Error(ErrorCode::kUnitMismatch, metric.name + " is measured in " + *metric.unit_dimension + " but " +
                                                  inner.name + " in " + *dimensions.begin());
      }
      node->unit = ontology_.base_unit(*metric.unit_dimension).name;
    } else if (!dimensions.empty()) {
      node->unit = ontology_.base_unit(*dimensions.begin()).name;
    }
    node->policy = interpolate ? MissingDataPolicy::kInterpolate : MissingDataPolicy::kIgnore;

    std::string detail = label(metric.name, entity) + " := " + std::string(aggregate_fn_name(node->aggregate)) +
                         " of " + inner.name + " over " + std::to_string(used.size()) + " sub-entities: ";
    for (std::size_t i = 0; i < used.size(); ++i) detail += (i ? ", " : "") + used[i];
    if (!skipped.empty()) {
      detail += "; skipped (underivable): ";
      for (std::size_t i = 0; i < skipped.size(); ++i) detail += (i ? ", " : "") + skipped[i];
    }
    lines_[line].second = std::move(detail);
    return node;
  }

  const Catalog& catalog_;
  const OntologySet& ontology_;
  std::string database_;
  Window window_;
  const SystemArchitecture& arch_;
  std::map<std::pair<std::string, std::string>, PlanPtr> memo_;
  std::map<std::pair<std::string, std::string>, std::string> failures_;
  std::vector<std::pair<std::string, std::string>> lines_;
};

json node_to_json(const PlanNode& n, const MappedQuery& plan) {
  json j{{"step", step_kind_name(n.kind)},
         {"entity", n.entity},
         {"metric", n.metric},
         {"unit", n.unit},
         {"value_kind", value_kind_name(n.value_kind)},
         {"missing_data_policy", missing_data_policy_name(n.policy)}};
  if (!n.part.empty()) j["part"] = n.part;
  switch (n.kind) {
    case StepKind::kRetrieve:
      j["retrieval"] = n.retrieval;
      j["key"] = plan.retrievals.at(n.retrieval).key.to_string();
      break;
    case StepKind::kConvertUnit:
      j["factor"] = n.factor;
      j["input"] = node_to_json(*n.inputs.front(), plan);
      break;
    case StepKind::kEvaluateExpr: {
      j["expr"] = print_expr(*n.expr);
      json b = json::object();
      for (const auto& [token, sub] : n.bindings) b[token] = node_to_json(*sub, plan);
      j["bindings"] = std::move(b);
      break;
    }
    case StepKind::kAggregate: {
      j["aggregate"] = aggregate_fn_name(n.aggregate);
      json in = json::array();
      for (const auto& sub : n.inputs) in.push_back(node_to_json(*sub, plan));
      j["inputs"] = std::move(in);
      break;
    }
  }
  return j;
}

class Executor {
 public:
  Executor(const MappedQuery& plan, const BaseStore& store, Window window, Execution& run)
      : plan_(plan), store_(store), window_(window), run_(run) {}

  const std::vector<Sample>& run(const PlanNode& n) {
    if (auto it = run_.node_results.find(&n); it != run_.node_results.end()) return it->second;
    std::vector<Sample> out;
    switch (n.kind) {
      case StepKind::kRetrieve: {
        const Retrieval& r = plan_.retrievals.at(n.retrieval);
        if (!store_.has_series(r.key)) {
          throw Error(ErrorCode::kUnknownSeries, r.key.to_string() + " has semantics but no stored data");
        }
        out = store_.read_range(r.key, window_.begin, window_.end);
        if (r.state_at_start) {
          if (auto prev = store_.last_before(r.key, window_.begin)) out.insert(out.begin(), *prev);
        }
        if (out.empty()) {
          run_.notes.push_back("no data for " + r.key.to_string() + " in [" + std::to_string(window_.begin) + ", " +
                               std::to_string(window_.end) + ")");
        }
        break;
      }
      case StepKind::kConvertUnit:
        out = convert_units(run(*n.inputs.front()), n.factor);
        break;
      case StepKind::kEvaluateExpr: {
        EvalContext ctx;
        ctx.window = window_;
        ctx.missing_data_policy = n.policy;
        for (const auto& [token, sub] : n.bindings) ctx.bindings[token] = run(*sub);
        out = evaluate(*n.expr, ctx);
        if (out.empty()) run_.notes.push_back("no value for " + label(n.metric, n.entity) + " in the window");
        break;
      }
      case StepKind::kAggregate: {
        std::vector<std::vector<Sample>> inputs;
        for (const auto& sub : n.inputs) inputs.push_back(run(*sub));
        std::size_t dropped = 0;
        out = aggregate_aligned(inputs, n.aggregate, &dropped);
        if (dropped > 0) {
          run_.notes.push_back(label(n.metric, n.entity) + ": dropped " + std::to_string(dropped) +
                               " timestamps missing from some sub-entity");
        }
        break;
      }
    }
    return run_.node_results.emplace(&n, std::move(out)).first->second;
  }

 private:
  const MappedQuery& plan_;
  const BaseStore& store_;
  Window window_;
  Execution& run_;
};

Operation operation_for(const PlanNode& n) {
  switch (n.kind) {
    case StepKind::kConvertUnit:
      return Operation::compute("convert_unit", "factor=" + format_double(n.factor));
    case StepKind::kAggregate:
      return Operation::compute(n.aggregate == AggregateFn::kMean ? "mean_over_subentities" : "sum_over_subentities");
    case StepKind::kEvaluateExpr: {
      const auto* call = std::get_if<CallNode>(&n.expr->node);
      if (call && call->fn == Builtin::kUpRatio) return Operation::compute("up_ratio", print_expr(*n.expr));
      return Operation::compute("evaluate", print_expr(*n.expr));
    }
    case StepKind::kRetrieve:
      break;
  }
  return Operation::migrate();
}

}  // namespace

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kRetrieve: return "retrieve";
    case StepKind::kConvertUnit: return "convert_unit";
    case StepKind::kEvaluateExpr: return "evaluate_expr";
    case StepKind::kAggregate: return "aggregate";
  }
  return "retrieve";
}

std::string_view aggregate_fn_name(AggregateFn fn) { return fn == AggregateFn::kMean ? "mean" : "sum"; }

json plan_to_json(const MappedQuery& plan) {
  json q{{"entity", plan.query.entity},
         {"metric", plan.query.metric},
         {"t0", plan.query.window.begin},
         {"t1", plan.query.window.end}};
  if (plan.query.desired_unit) q["unit"] = *plan.query.desired_unit;
  if (plan.query.database) q["db"] = *plan.query.database;
  json retrievals = json::array();
  for (const auto& r : plan.retrievals) {
    retrievals.push_back({{"key", r.key.to_string()},
                          {"t0", r.window.begin},
                          {"t1", r.window.end},
                          {"state_at_start", r.state_at_start}});
  }
  return {{"query", std::move(q)},
          {"database", plan.database},
          {"retrievals", std::move(retrievals)},
          {"plan", plan.root ? node_to_json(*plan.root, plan) : json(nullptr)},
          {"explanation", plan.explanation}};
}

MappedQuery plan_exact(const SemanticQuery& q, const Catalog& catalog, const OntologySet& ontology) {
  if (q.window.begin >= q.window.end) throw Error(ErrorCode::kInvalidArgument, "query window must satisfy t0 < t1");
  const MetricNode& metric = ontology.resolve_metric(q.metric);

  std::string database;
  if (q.database) {
    database = *q.database;
    catalog.database(database).architecture->entity(q.entity);
  } else {
    for (const auto& name : catalog.databases()) {
      if (catalog.database(name).architecture->has_entity(q.entity)) {
        database = name;
        break;
      }
    }
    if (database.empty()) throw Error(ErrorCode::kUnknownEntity, "no registered architecture has '" + q.entity + "'");
  }
  const DatabaseSemantics db = catalog.database(database);

  Planner planner(catalog, ontology, database, q.window, *db.architecture);
  PlanPtr root = planner.plan(q.entity, metric);
  if (root->kind == StepKind::kRetrieve) {
    const Retrieval& r = planner.retrievals.at(root->retrieval);
    planner.add_line("direct", label(metric.name, q.entity) + " <- " + r.key.to_string() + " [" + root->unit + "]");
  }
  if (q.desired_unit) {
    const UnitNode& want = ontology.unit(*q.desired_unit);
    if (root->unit != want.name) root = planner.convert(root, want.name);
  }

  MappedQuery out;
  out.query = q;
  out.database = database;
  out.retrievals = planner.retrievals;
  out.root = std::move(root);
  out.explanation = planner.numbered_lines();
  return out;
}

std::vector<Sample> convert_units(std::span<const Sample> points, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorCode::kInvalidArgument, "conversion factor must be positive");
  std::vector<double> values;
  values.reserve(points.size());
  for (const auto& s : points) {
    if (!s.is_numeric()) throw Error(ErrorCode::kKindMismatch, "cannot convert units of a symbolic sample");
    values.push_back(std::get<double>(s.value));
  }
  std::vector<double> scaled(values.size());
  kernels::scale(values, factor, scaled);
  std::vector<Sample> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out.push_back(numeric_sample(points[i].timestamp, scaled[i]));
  return out;
}

std::vector<Sample> aggregate_aligned(const std::vector<std::vector<Sample>>& inputs, AggregateFn fn,
                                      std::size_t* dropped) {
  std::map<Millis, std::vector<double>> rows;
  for (const auto& series : inputs) {
    for (const auto& s : series) {
      if (!s.is_numeric()) throw Error(ErrorCode::kKindMismatch, "cannot aggregate symbolic samples");
      rows[s.timestamp].push_back(std::get<double>(s.value));
    }
  }
  std::vector<Sample> out;
  std::size_t incomplete = 0;
  for (const auto& [t, values] : rows) {
    if (values.size() != inputs.size()) {
      ++incomplete;
      continue;
    }
    out.push_back(numeric_sample(t, fn == AggregateFn::kMean ? kernels::mean(values) : kernels::sum(values)));
  }
  if (dropped) *dropped = incomplete;
  return out;
}

Execution execute(const MappedQuery& plan, const BaseStore& store) { return execute(plan, store, plan.query.window); }

Execution execute(const MappedQuery& plan, const BaseStore& store, Window window) {
  if (window.begin >= window.end) throw Error(ErrorCode::kInvalidArgument, "window must satisfy t0 < t1");
  Execution run;
  if (!plan.root) return run;
  Executor ex(plan, store, window, run);
  run.samples = ex.run(*plan.root);
  return run;
}

std::optional<SeriesKey> materialize(const MappedQuery& plan, const Execution& run, BaseStore& store,
                                     Catalog& catalog) {
  std::map<const PlanNode*, SeriesKey> keys;
  std::function<SeriesKey(const PlanNode&)> visit = [&](const PlanNode& n) -> SeriesKey {
    if (auto it = keys.find(&n); it != keys.end()) return it->second;
    if (n.kind == StepKind::kRetrieve) return keys.emplace(&n, plan.retrievals.at(n.retrieval).key).first->second;

    std::vector<SeriesKey> inputs;
    if (n.kind == StepKind::kEvaluateExpr) {
      for (const auto& [token, sub] : n.bindings) inputs.push_back(visit(*sub));
    } else {
      for (const auto& sub : n.inputs) inputs.push_back(visit(*sub));
    }
    SeriesKey key{plan.database, n.metric, {{"entity", n.entity}}};
    if (n.kind == StepKind::kConvertUnit) key.tags["unit"] = n.unit;
    if (!n.part.empty()) key.tags["part"] = n.part;

    auto results = run.node_results.find(&n);
    if (results == run.node_results.end()) {
      throw Error(ErrorCode::kInvalidArgument, "execution does not belong to this plan");
    }
    if (!results->second.empty()) store.write_points(key, results->second);

    const Operation op = operation_for(n);
    if (catalog.has_stream(key)) {
      const StreamSemantics existing = catalog.get_semantics(key);
      if (existing.entity != n.entity || existing.metric_ref != n.metric) {
        throw Error(ErrorCode::kDuplicateStream, key.to_string() + " is registered with other semantics");
      }
      catalog.record_derivation(key, op, inputs);
    } else {
      StreamSemantics sem;
      sem.key = key;
      sem.metric_ref = n.metric;
      sem.entity = n.entity;
      sem.unit = n.unit;
      sem.missing_data_policy = n.policy;
      sem.collection_procedure = "materialized query result";
      catalog.register_derived_stream(std::move(sem), op, inputs);
    }
    return keys.emplace(&n, key).first->second;
  };
  if (!plan.root || plan.root->kind == StepKind::kRetrieve) return std::nullopt;
  return visit(*plan.root);
}

}  // namespace setsdb
