// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact reasoning: rewrites a semantic query into a MappedQuery using, in
// order of preference, a direct stream, the metric's quantitative
// definition, or composition over sub-entities; then executes it.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/expr.hpp"
#include "setsdb/semantics.hpp"
#include "setsdb/store.hpp"

namespace setsdb {

struct SemanticQuery {
  std::string entity;
  std::string metric;  // name or synonym
  std::optional<std::string> desired_unit;
  Window window;
  std::optional<std::string> database;

  bool operator==(const SemanticQuery&) const = default;
};

struct Retrieval {
  SeriesKey key;
  Window window;
  // Symbolic streams also fetch the state in force at window.begin.
  bool state_at_start = false;

  bool operator==(const Retrieval&) const = default;
};

enum class StepKind { kRetrieve, kConvertUnit, kEvaluateExpr, kAggregate };
enum class AggregateFn { kMean, kSum };

std::string_view step_kind_name(StepKind kind);
std::string_view aggregate_fn_name(AggregateFn fn);

struct PlanNode;
using PlanPtr = std::shared_ptr<const PlanNode>;

struct PlanNode {
  StepKind kind = StepKind::kRetrieve;
  // What this node produces.
  std::string entity;
  std::string metric;  // canonical
  std::string unit;
  ValueKind value_kind = ValueKind::kNumeric;
  // Set on aggregates hoisted out of a larger definition, which share their
  // parent's (entity, metric).
  std::string part;

  std::size_t retrieval = 0;  // kRetrieve: index into MappedQuery::retrievals
  double factor = 1.0;        // kConvertUnit
  ExprPtr expr;               // kEvaluateExpr
  std::map<std::string, PlanPtr> bindings;  // kEvaluateExpr: reference -> sub-plan
  MissingDataPolicy policy = MissingDataPolicy::kIgnore;
  AggregateFn aggregate = AggregateFn::kMean;  // kAggregate
  std::vector<PlanPtr> inputs;  // kConvertUnit: one; kAggregate: one per sub-entity
};

struct MappedQuery {
  SemanticQuery query;
  std::string database;
  std::vector<Retrieval> retrievals;
  PlanPtr root;
  // `<step#> <rule> <detail>` lines, rule one of direct, metric,
  // composition, unit.
  std::vector<std::string> explanation;
};

nlohmann::json plan_to_json(const MappedQuery& plan);

// Throws kUnderivable, kUnitMismatch, kUnknownEntity, kUnknownMetric,
// kUnknownDatabase, kKindMismatch, kInvalidArgument.
MappedQuery plan_exact(const SemanticQuery& q, const Catalog& catalog, const OntologySet& ontology);

struct Execution {
  std::vector<Sample> samples;
  std::vector<std::string> notes;  // e.g. retrievals that found no data
  std::map<const PlanNode*, std::vector<Sample>> node_results;
};

Execution execute(const MappedQuery& plan, const BaseStore& store);
// Runs the plan over `window` instead of the query's window.
Execution execute(const MappedQuery& plan, const BaseStore& store, Window window);

// Persists every derived node of an executed plan as a stream keyed
// {database, metric, {entity=<path>}} (plus unit=<u> for conversions) and
// records its provenance. Idempotent. Returns the root's key when the root
// is derived.
std::optional<SeriesKey> materialize(const MappedQuery& plan, const Execution& run, BaseStore& store,
                                     Catalog& catalog);

// Aligns the inputs on timestamps present in every input (incomplete rows
// are dropped) and reduces each row. `dropped` receives the number of
// incomplete rows.
std::vector<Sample> aggregate_aligned(const std::vector<std::vector<Sample>>& inputs, AggregateFn fn,
                                      std::size_t* dropped = nullptr);

// Throws kKindMismatch on symbolic input, kInvalidArgument unless factor > 0.
std::vector<Sample> convert_units(std::span<const Sample> points, double factor);

}  // namespace setsdb
