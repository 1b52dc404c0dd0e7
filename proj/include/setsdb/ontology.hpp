// SPDX-License-Identifier: Apache-2.0
#pragma once

// Measurement-description ontologies (system, metric, unit) and the system
// architectures instantiated from them. An OntologySet is validated once at
// load and immutable afterwards, so it can be shared across threads freely.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/expr.hpp"
#include "setsdb/text.hpp"

namespace setsdb {

struct SystemOntology {
  std::set<std::string> concepts;
  std::set<std::pair<std::string, std::string>> has_relations;  // (parent, child)
};

struct MetricNode {
  std::string name;
  std::optional<std::string> parent;
  std::string description;
  std::vector<std::string> concept_pool;
  std::optional<std::string> quantitative_definition;
  ExprPtr definition;  // parsed quantitative_definition
  // Reference token in the definition -> canonical metric name.
  std::map<std::string, std::string> definition_refs;
  std::optional<std::string> unit_dimension;
};

enum class UnitKind { kBasic, kRatio, kVolume, kComplex };

std::string_view unit_kind_name(UnitKind kind);

struct UnitNode {
  std::string name;
  UnitKind kind = UnitKind::kBasic;
  std::string dimension;
  double factor_to_base = 1.0;
  std::vector<std::string> numerator;    // aggregate units only
  std::vector<std::string> denominator;
};

class OntologySet {
 public:
  const SystemOntology& system() const { return system_; }
  const std::map<std::string, MetricNode>& metrics() const { return metrics_; }
  const std::map<std::string, UnitNode>& units() const { return units_; }

  // Name or concept-pool synonym, case-insensitive and ignoring
  // punctuation. An exact name beats a synonym. Throws kUnknownMetric.
  const MetricNode& resolve_metric(std::string_view token) const;
  const MetricNode* find_metric(std::string_view token) const;

  // {m} plus every metric its definition refers to, transitively.
  std::set<std::string> expand_metric(std::string_view metric) const;

  const UnitNode& unit(std::string_view name) const;
  bool has_unit(std::string_view name) const;
  // The factor-1 unit of a dimension.
  const UnitNode& base_unit(std::string_view dimension) const;
  bool has_dimension(std::string_view dimension) const;

  // value_in_to = factor * value_in_from. Throws kUnknownUnit, kUnitMismatch.
  double unit_conversion_factor(std::string_view from, std::string_view to) const;

  // Replaces a normalized keyword with its metric's normalized canonical
  // name when it is a metric name or concept-pool synonym.
  std::string canonical_keyword(std::string_view keyword) const;

  // The document this set was loaded from.
  const nlohmann::json& document() const { return *document_; }

 private:
  friend OntologySet load_ontology(const nlohmann::json& doc);

  SystemOntology system_;
  std::map<std::string, MetricNode> metrics_;
  std::map<std::string, UnitNode> units_;
  std::map<std::string, std::string> name_index_;     // normalized name -> name
  std::map<std::string, std::string> synonym_index_;  // normalized synonym -> name
  std::map<std::string, std::string> base_units_;     // dimension -> unit
  std::shared_ptr<const nlohmann::json> document_;
};

// Throws kSchemaError, kCycleError, kDanglingReference, kExpressionParseError.
OntologySet load_ontology(const nlohmann::json& doc);
OntologySet load_ontology_text(std::string_view text);

enum class RelationLabel { kHas, kConnects, kInteracts };

std::string_view relation_label_name(RelationLabel label);

struct EntityIdentity {
  std::vector<std::string> id_numbers;
  std::string category;
  std::string manufacturer;
  std::string manufacture_time;
  std::string owner;
};

struct EntityContext {
  std::string location;
  std::string status_ref;
};

struct Entity {
  std::string name;  // hierarchical path, e.g. /dc1/c1/h1
  std::string concept_name;
  EntityIdentity identity;
  EntityContext context;
  std::string function;
  std::string description;

  // Descriptive keywords: concept, identity category/manufacturer,
  // function and description text. The path name is an identifier and is
  // left out.
  KeywordSet keywords() const;
};

struct Relation {
  std::string from;
  RelationLabel label = RelationLabel::kHas;
  std::string to;

  bool operator==(const Relation&) const = default;
};

class SystemArchitecture {
 public:
  const std::string& system_id() const { return system_id_; }
  const std::map<std::string, Entity, std::less<>>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }

  bool has_entity(std::string_view name) const;
  const Entity& entity(std::string_view name) const;  // throws kUnknownEntity

  // Direct `has` children in name order. Throws kUnknownEntity.
  std::vector<Entity> sub_entities(std::string_view name) const;
  std::optional<std::string> parent(std::string_view name) const;

  const nlohmann::json& document() const { return *document_; }

 private:
  friend SystemArchitecture load_architecture(const nlohmann::json& doc, const OntologySet& ontology);

  std::string system_id_;
  std::map<std::string, Entity, std::less<>> entities_;
  std::vector<Relation> relations_;
  std::map<std::string, std::string, std::less<>> parent_;
  std::map<std::string, std::vector<std::string>, std::less<>> children_;
  std::shared_ptr<const nlohmann::json> document_;
};

// Checks names are unique, concepts are declared, `has` relations form a
// forest and are permitted by the system ontology.
SystemArchitecture load_architecture(const nlohmann::json& doc, const OntologySet& ontology);

}  // namespace setsdb
