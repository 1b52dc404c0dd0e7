// SPDX-License-Identifier: Apache-2.0
#include "setsdb/ontology.hpp"

#include <algorithm>
#include <functional>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::kSchemaError, msg); }

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema_error(where + ": missing member '" + key + "'");
  return j.at(key);
}

std::string string_member(const json& j, const char* key, const std::string& where) {
  const json& v = member(j, key, where);
  if (!v.is_string()) schema_error(where + ": member '" + key + "' must be a string");
  std::string s = v.get<std::string>();
  if (s.empty()) schema_error(where + ": member '" + key + "' must be non-empty");
  return s;
}

std::optional<std::string> optional_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) schema_error(where + ": member '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  const json& arr = j.at(key);
  if (!arr.is_array()) schema_error(where + ": member '" + key + "' must be a list");
  for (const auto& v : arr) {
    if (!v.is_string()) schema_error(where + ": '" + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Returns one cycle as a readable path, or empty when the graph is acyclic.
std::string find_cycle(const std::map<std::string, std::vector<std::string>>& graph) {
  enum class Mark { kNone, kActive, kDone };
  std::map<std::string, Mark> marks;
  std::vector<std::string> stack;
  std::string found;
  std::function<bool(const std::string&)> visit = [&](const std::string& node) {
    Mark& m = marks[node];
    if (m == Mark::kDone) return false;
    if (m == Mark::kActive) {
      auto start = std::find(stack.begin(), stack.end(), node);
      for (auto it = start; it != stack.end(); ++it) found += *it + " -> ";
      found += node;
      return true;
    }
    m = Mark::kActive;
    stack.push_back(node);
    if (auto it = graph.find(node); it != graph.end()) {
      for (const auto& next : it->second) {
        if (visit(next)) return true;
      }
    }
    stack.pop_back();
    marks[node] = Mark::kDone;
    return false;
  };
  for (const auto& [node, edges] : graph) {
    if (visit(node)) return found;
  }
  return {};
}

UnitKind parse_unit_kind(const std::string& s, const std::string& where) {
  if (s == "basic") return UnitKind::kBasic;
  if (s == "ratio") return UnitKind::kRatio;
  if (s == "volume") return UnitKind::kVolume;
  if (s == "complex") return UnitKind::kComplex;
  schema_error(where + ": unit kind must be basic, ratio, volume or complex");
}

RelationLabel parse_relation_label(const std::string& s, const std::string& where) {
  if (s == "has") return RelationLabel::kHas;
  if (s == "connects") return RelationLabel::kConnects;
  if (s == "interacts") return RelationLabel::kInteracts;
  schema_error(where + ": relation label must be has, connects or interacts");
}

void load_system(const json& doc, SystemOntology& sys) {
  const json& so = member(doc, "system_ontology", "ontology");
  for (const auto& c : string_list(so, "concepts", "system_ontology")) {
    if (c.empty()) schema_error("system_ontology: empty concept name");
    if (!sys.concepts.insert(c).second) schema_error("system_ontology: duplicate concept '" + c + "'");
  }
  std::map<std::string, std::vector<std::string>> graph;
  if (so.contains("has_relations")) {
    for (const auto& pair : so.at("has_relations")) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
        schema_error("system_ontology: has_relations entries must be [parent, child]");
      }
      auto parent = pair[0].get<std::string>();
      auto child = pair[1].get<std::string>();
      for (const auto& end : {parent, child}) {
        if (!sys.concepts.contains(end)) {
          throw Error(ErrorCode::kDanglingReference, "has relation names undeclared concept '" + end + "'");
        }
      }
      sys.has_relations.emplace(parent, child);
      graph[parent].push_back(child);
    }
  }
  if (auto cycle = find_cycle(graph); !cycle.empty()) {
    throw Error(ErrorCode::kCycleError, "system ontology has relations form a cycle: " + cycle);
  }
}

}  // namespace

std::string_view unit_kind_name(UnitKind kind) {
  switch (kind) {
    case UnitKind::kBasic: return "basic";
    case UnitKind::kRatio: return "ratio";
    case UnitKind::kVolume: return "volume";
    case UnitKind::kComplex: return "complex";
  }
  return "basic";
}

std::string_view relation_label_name(RelationLabel label) {
  switch (label) {
    case RelationLabel::kHas: return "has";
    case RelationLabel::kConnects: return "connects";
    case RelationLabel::kInteracts: return "interacts";
  }
  return "has";
}

OntologySet load_ontology(const json& doc) {
  OntologySet set;
  try {
    load_system(doc, set.system_);

    // Units first: metrics refer to their dimensions.
    const json& units = member(doc, "unit_ontology", "ontology");
    if (!units.is_array()) schema_error("unit_ontology must be a list");
    std::map<std::string, std::vector<std::string>> base_candidates;
    for (const auto& u : units) {
      UnitNode node;
      node.name = string_member(u, "name", "unit");
      const std::string where = "unit '" + node.name + "'";
      node.kind = parse_unit_kind(string_member(u, "kind", where), where);
      node.dimension = string_member(u, "dimension", where);
      if (u.contains("factor_to_base") && !u.at("factor_to_base").is_null()) {
        if (!u.at("factor_to_base").is_number()) schema_error(where + ": factor_to_base must be a number");
        node.factor_to_base = u.at("factor_to_base").get<double>();
      }
      if (!(node.factor_to_base > 0.0)) schema_error(where + ": factor_to_base must be positive");
      if (u.contains("composition") && !u.at("composition").is_null()) {
        if (node.kind == UnitKind::kBasic) schema_error(where + ": basic units take no composition");
        const json& comp = u.at("composition");
        node.numerator = string_list(comp, "numerator", where);
        node.denominator = string_list(comp, "denominator", where);
      }
      if (node.factor_to_base == 1.0) base_candidates[node.dimension].push_back(node.name);
      if (!set.units_.emplace(node.name, node).second) schema_error("duplicate unit '" + node.name + "'");
    }
    std::set<std::string> dimensions;
    for (const auto& [name, u] : set.units_) dimensions.insert(u.dimension);
    for (const auto& dim : dimensions) {
      auto it = base_candidates.find(dim);
      if (it == base_candidates.end() || it->second.size() != 1) {
        schema_error("dimension '" + dim + "' needs exactly one base unit with factor_to_base 1");
      }
      set.base_units_[dim] = it->second.front();
    }
    for (const auto& [name, u] : set.units_) {
      for (const auto* list : {&u.numerator, &u.denominator}) {
        for (const auto& dim : *list) {
          if (!dimensions.contains(dim)) {
            throw Error(ErrorCode::kDanglingReference,
                        "unit '" + name + "' composition names undeclared dimension '" + dim + "'");
          }
        }
      }
    }

    const json& metrics = member(doc, "metric_ontology", "ontology");
    if (!metrics.is_array()) schema_error("metric_ontology must be a list");
    for (const auto& m : metrics) {
      MetricNode node;
      node.name = string_member(m, "name", "metric");
      const std::string where = "metric '" + node.name + "'";
      node.parent = optional_string(m, "parent", where);
      node.description = optional_string(m, "description", where).value_or("");
      node.concept_pool = string_list(m, "concept_pool", where);
      node.quantitative_definition = optional_string(m, "quantitative_definition", where);
      node.unit_dimension = optional_string(m, "unit_dimension", where);
      if (node.unit_dimension && !dimensions.contains(*node.unit_dimension)) {
        throw Error(ErrorCode::kDanglingReference,
                    where + " names undeclared unit dimension '" + *node.unit_dimension + "'");
      }
      const std::string norm = normalize_token(node.name);
      if (norm.empty()) schema_error(where + ": name has no alphanumeric characters");
      if (!set.name_index_.emplace(norm, node.name).second) {
        schema_error(where + " collides with '" + set.name_index_[norm] + "' after normalization");
      }
      if (!set.metrics_.emplace(node.name, std::move(node)).second) {
        schema_error("duplicate metric '" + m.at("name").get<std::string>() + "'");
      }
    }
    for (const auto& [name, node] : set.metrics_) {
      for (const auto& synonym : node.concept_pool) {
        const std::string norm = normalize_token(synonym);
        if (norm.empty()) schema_error("metric '" + name + "': empty concept pool entry");
        auto [it, inserted] = set.synonym_index_.emplace(norm, name);
        if (!inserted && it->second != name) {
          schema_error("concept pool entry '" + synonym + "' belongs to both '" + it->second + "' and '" + name + "'");
        }
      }
    }

    // hasMetric hierarchy.
    std::map<std::string, std::vector<std::string>> hierarchy;
    for (const auto& [name, node] : set.metrics_) {
      if (!node.parent) continue;
      if (!set.metrics_.contains(*node.parent)) {
        throw Error(ErrorCode::kDanglingReference, "metric '" + name + "' has unknown parent '" + *node.parent + "'");
      }
      hierarchy[*node.parent].push_back(name);
    }
    if (auto cycle = find_cycle(hierarchy); !cycle.empty()) {
      throw Error(ErrorCode::kCycleError, "metric hierarchy has a cycle: " + cycle);
    }

    // Quantitative definitions.
    std::map<std::string, std::vector<std::string>> depends;
    for (auto& [name, node] : set.metrics_) {
      if (!node.quantitative_definition) continue;
      try {
        node.definition = parse_expr(*node.quantitative_definition);
      } catch (const PositionedError& e) {
        throw PositionedError(ErrorCode::kExpressionParseError, e.position(),
                              "in definition of metric '" + name + "': " + e.what());
      }
      for (const auto& ref : free_metrics(*node.definition)) {
        const MetricNode* target = set.find_metric(ref);
        if (target == nullptr) {
          throw Error(ErrorCode::kDanglingReference,
                      "definition of metric '" + name + "' refers to unknown metric '" + ref + "'");
        }
        node.definition_refs[ref] = target->name;
        depends[name].push_back(target->name);
      }
    }
    if (auto cycle = find_cycle(depends); !cycle.empty()) {
      throw Error(ErrorCode::kCycleError, "metric definitions are circular: " + cycle);
    }
  } catch (const json::exception& e) {
    schema_error(std::string("malformed ontology document: ") + e.what());
  }
  set.document_ = std::make_shared<const json>(doc);
  return set;
}

OntologySet load_ontology_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    schema_error(std::string("ontology is not valid JSON: ") + e.what());
  }
  return load_ontology(doc);
}

const MetricNode* OntologySet::find_metric(std::string_view token) const {
  const std::string norm = normalize_token(token);
  if (norm.empty()) return nullptr;
  if (auto it = name_index_.find(norm); it != name_index_.end()) return &metrics_.at(it->second);
  if (auto it = synonym_index_.find(norm); it != synonym_index_.end()) return &metrics_.at(it->second);
  return nullptr;
}

const MetricNode& OntologySet::resolve_metric(std::string_view token) const {
  if (const MetricNode* m = find_metric(token)) return *m;
  throw Error(ErrorCode::kUnknownMetric, "no metric or synonym matches '" + std::string(token) + "'");
}

std::set<std::string> OntologySet::expand_metric(std::string_view metric) const {
  const MetricNode& root = resolve_metric(metric);
  std::set<std::string> out;
  std::vector<const MetricNode*> todo{&root};
  while (!todo.empty()) {
    const MetricNode* m = todo.back();
    todo.pop_back();
    if (!out.insert(m->name).second) continue;
    for (const auto& [ref, target] : m->definition_refs) todo.push_back(&metrics_.at(target));
  }
  return out;
}

const UnitNode& OntologySet::unit(std::string_view name) const {
  auto it = units_.find(std::string(name));
  if (it == units_.end()) throw Error(ErrorCode::kUnknownUnit, "no unit '" + std::string(name) + "'");
  return it->second;
}

bool OntologySet::has_unit(std::string_view name) const { return units_.contains(std::string(name)); }

bool OntologySet::has_dimension(std::string_view dimension) const {
  return base_units_.contains(std::string(dimension));
}

const UnitNode& OntologySet::base_unit(std::string_view dimension) const {
  auto it = base_units_.find(std::string(dimension));
  if (it == base_units_.end()) throw Error(ErrorCode::kUnknownUnit, "no dimension '" + std::string(dimension) + "'");
  return units_.at(it->second);
}

double OntologySet::unit_conversion_factor(std::string_view from, std::string_view to) const {
  const UnitNode& a = unit(from);
  const UnitNode& b = unit(to);
  if (a.dimension != b.dimension) {
    throw Error(ErrorCode::kUnitMismatch, "cannot convert " + a.name + " (" + a.dimension + ") to " + b.name +
                                              " (" + b.dimension + ")");
  }
  if (a.name == b.name) return 1.0;
  return a.factor_to_base / b.factor_to_base;
}

std::string OntologySet::canonical_keyword(std::string_view keyword) const {
  std::string norm = normalize_token(keyword);
  if (const MetricNode* m = find_metric(norm)) return normalize_token(m->name);
  return norm;
}

KeywordSet Entity::keywords() const {
  KeywordSet out;
  add_keywords(out, concept_name);
  add_keywords(out, identity.category);
  add_keywords(out, identity.manufacturer);
  add_keywords(out, function);
  add_keywords(out, description);
  return out;
}

bool SystemArchitecture::has_entity(std::string_view name) const { return entities_.find(name) != entities_.end(); }

const Entity& SystemArchitecture::entity(std::string_view name) const {
  auto it = entities_.find(name);
  if (it == entities_.end()) {
    throw Error(ErrorCode::kUnknownEntity, "no entity '" + std::string(name) + "' in system '" + system_id_ + "'");
  }
  return it->second;
}

std::vector<Entity> SystemArchitecture::sub_entities(std::string_view name) const {
  entity(name);
  std::vector<Entity> out;
  if (auto it = children_.find(name); it != children_.end()) {
    for (const auto& child : it->second) out.push_back(entities_.find(child)->second);
  }
  return out;
}

std::optional<std::string> SystemArchitecture::parent(std::string_view name) const {
  entity(name);
  if (auto it = parent_.find(name); it != parent_.end()) return it->second;
  return std::nullopt;
}

SystemArchitecture load_architecture(const json& doc, const OntologySet& ontology) {
  SystemArchitecture arch;
  try {
    arch.system_id_ = string_member(doc, "system_id", "architecture");
    const json& entities = member(doc, "entities", "architecture");
    if (!entities.is_array()) schema_error("architecture: entities must be a list");
    for (const auto& e : entities) {
      Entity ent;
      ent.name = string_member(e, "name", "entity");
      const std::string where = "entity '" + ent.name + "'";
      ent.concept_name = string_member(e, "concept", where);
      if (!ontology.system().concepts.contains(ent.concept_name)) {
        throw Error(ErrorCode::kDanglingReference, where + " has undeclared concept '" + ent.concept_name + "'");
      }
      if (e.contains("identity") && e.at("identity").is_object()) {
        const json& id = e.at("identity");
        ent.identity.id_numbers = string_list(id, "id_numbers", where);
        ent.identity.category = optional_string(id, "category", where).value_or("");
        ent.identity.manufacturer = optional_string(id, "manufacturer", where).value_or("");
        ent.identity.manufacture_time = optional_string(id, "manufacture_time", where).value_or("");
        ent.identity.owner = optional_string(id, "owner", where).value_or("");
      }
      if (e.contains("context") && e.at("context").is_object()) {
        ent.context.location = optional_string(e.at("context"), "location", where).value_or("");
        ent.context.status_ref = optional_string(e.at("context"), "status_ref", where).value_or("");
      }
      ent.function = optional_string(e, "function", where).value_or("");
      ent.description = optional_string(e, "description", where).value_or("");
      if (!arch.entities_.emplace(ent.name, ent).second) schema_error("duplicate entity '" + ent.name + "'");
    }

    std::map<std::string, std::vector<std::string>> has_graph;
    if (doc.contains("relations")) {
      for (const auto& r : doc.at("relations")) {
        if (!r.is_array() || r.size() != 3 || !r[0].is_string() || !r[1].is_string() || !r[2].is_string()) {
          schema_error("architecture: relations must be [from, label, to]");
        }
        Relation rel{r[0].get<std::string>(), parse_relation_label(r[1].get<std::string>(), "relation"),
                     r[2].get<std::string>()};
        for (const auto& end : {rel.from, rel.to}) {
          if (!arch.has_entity(end)) {
            throw Error(ErrorCode::kDanglingReference, "relation names unknown entity '" + end + "'");
          }
        }
        if (rel.label == RelationLabel::kHas) {
          const auto& pc = arch.entities_.at(rel.from).concept_name;
          const auto& cc = arch.entities_.at(rel.to).concept_name;
          if (!ontology.system().has_relations.contains({pc, cc})) {
            schema_error("'" + rel.from + "' has '" + rel.to + "' but the system ontology has no " + pc + " -> " + cc);
          }
          auto [it, inserted] = arch.parent_.emplace(rel.to, rel.from);
          if (!inserted && it->second != rel.from) {
            schema_error("entity '" + rel.to + "' has two parents: '" + it->second + "' and '" + rel.from + "'");
          }
          if (inserted) {
            arch.children_[rel.from].push_back(rel.to);
            has_graph[rel.from].push_back(rel.to);
          }
        }
        arch.relations_.push_back(std::move(rel));
      }
    }
    if (auto cycle = find_cycle(has_graph); !cycle.empty()) {
      throw Error(ErrorCode::kCycleError, "architecture has relations form a cycle: " + cycle);
    }
    for (auto& [parent, kids] : arch.children_) std::sort(kids.begin(), kids.end());
  } catch (const json::exception& e) {
    schema_error(std::string("malformed architecture document: ") + e.what());
  }
  arch.document_ = std::make_shared<const json>(doc);
  return arch;
}

}  // namespace setsdb
