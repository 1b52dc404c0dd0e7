// SPDX-License-Identifier: Apache-2.0
#include "setsdb/semantics.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"

namespace setsdb {

using json = nlohmann::json;

namespace {

class Fnv {
 public:
  Fnv& add(std::string_view field) {
    for (char c : field) mix(static_cast<unsigned char>(c));
    mix(0x1f);
    return *this;
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  void mix(unsigned char c) {
    h_ ^= c;
    h_ *= 1099511628211ULL;
  }
  std::uint64_t h_ = 1469598103934665603ULL;
};

std::string raw_node_id(const SeriesKey& key, const std::optional<std::string>& sensor) {
  Fnv f;
  f.add("raw").add(key.to_string()).add(sensor ? "1" : "0").add(sensor.value_or(""));
  return f.hex();
}

std::string derived_node_id(const SeriesKey& output, const Operation& op, const std::vector<std::string>& inputs) {
  Fnv f;
  f.add("derived").add(output.to_string()).add(operation_kind_name(op.kind)).add(op.name).add(op.features);
  f.add(op.url ? "1" : "0").add(op.url.value_or(""));
  for (const auto& in : inputs) f.add(in);
  return f.hex();
}

OperationKind parse_operation_kind(std::string_view s) {
  if (s == "migrate") return OperationKind::kMigrate;
  if (s == "downsample") return OperationKind::kDownsample;
  if (s == "compute") return OperationKind::kCompute;
  throw Error(ErrorCode::kSchemaError, "operation must be migrate, downsample or compute");
}

json operation_to_json(const Operation& op) {
  json j{{"kind", operation_kind_name(op.kind)}};
  if (op.kind == OperationKind::kCompute) j["name"] = op.name;
  if (!op.features.empty()) j["features"] = op.features;
  if (op.url) j["url"] = *op.url;
  return j;
}

Operation operation_from_json(const json& j) {
  Operation op;
  op.kind = parse_operation_kind(j.at("kind").get<std::string>());
  op.name = j.value("name", "");
  op.features = j.value("features", "");
  if (j.contains("url") && !j.at("url").is_null()) op.url = j.at("url").get<std::string>();
  return op;
}

json node_to_json(const ProvenanceNode& n) {
  json j{{"id", n.id}, {"output", n.output.to_string()}, {"kind", n.raw ? "raw" : "derived"}};
  if (n.raw) {
    j["sensor_entity"] = n.sensor_entity ? json(*n.sensor_entity) : json(nullptr);
  } else {
    j["operation"] = operation_to_json(n.operation);
    j["inputs"] = n.inputs;
  }
  return j;
}

ProvenanceNode node_from_json(const json& j) {
  ProvenanceNode n;
  n.id = j.at("id").get<std::string>();
  n.output = SeriesKey::parse(j.at("output").get<std::string>());
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "raw") {
    n.raw = true;
    if (j.contains("sensor_entity") && !j.at("sensor_entity").is_null()) {
      n.sensor_entity = j.at("sensor_entity").get<std::string>();
    }
  } else if (kind == "derived") {
    n.raw = false;
    n.operation = operation_from_json(j.at("operation"));
    n.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (n.inputs.empty()) throw Error(ErrorCode::kSchemaError, "derived node " + n.id + " has no inputs");
  } else {
    throw Error(ErrorCode::kSchemaError, "provenance node kind must be raw or derived");
  }
  return n;
}

// Resolves the stream's references against its database and the ontology,
// canonicalizing the metric name.
StreamSemantics resolve_stream(StreamSemantics sem, const DatabaseSemantics& db, const OntologySet& ont) {
  const std::string where = "stream " + sem.key.to_string();
  const MetricNode* metric = ont.find_metric(sem.metric_ref);
  if (metric == nullptr) {
    throw Error(ErrorCode::kUnresolvedReference, where + ": no metric '" + sem.metric_ref + "'");
  }
  sem.metric_ref = metric->name;
  if (!db.architecture || !db.architecture->has_entity(sem.entity)) {
    throw Error(ErrorCode::kUnresolvedReference, where + ": no entity '" + sem.entity + "' in " + db.database);
  }
  if (!ont.has_unit(sem.unit)) {
    throw Error(ErrorCode::kUnresolvedReference, where + ": no unit '" + sem.unit + "'");
  }
  const UnitNode& unit = ont.unit(sem.unit);
  if (metric->unit_dimension && unit.dimension != *metric->unit_dimension) {
    throw Error(ErrorCode::kUnitMismatch, where + ": unit " + unit.name + " measures " + unit.dimension + " but " +
                                              metric->name + " is measured in " + *metric->unit_dimension);
  }
  if (sem.sensor_entity && !db.architecture->has_entity(*sem.sensor_entity)) {
    throw Error(ErrorCode::kUnresolvedReference, where + ": no sensor entity '" + *sem.sensor_entity + "'");
  }
  return sem;
}

std::shared_ptr<const SystemArchitecture> reload_architecture(const DatabaseSemantics& db, const OntologySet& ont) {
  if (!db.architecture) return nullptr;
  return std::make_shared<const SystemArchitecture>(load_architecture(db.architecture->document(), ont));
}

}  // namespace

std::string_view operation_kind_name(OperationKind kind) {
  switch (kind) {
    case OperationKind::kMigrate: return "migrate";
    case OperationKind::kDownsample: return "downsample";
    case OperationKind::kCompute: return "compute";
  }
  return "compute";
}

json stream_semantics_to_json(const StreamSemantics& s) {
  json j{{"database", s.key.database},
         {"metric", s.key.metric},
         {"tags", s.key.tags},
         {"metric_ref", s.metric_ref},
         {"entity", s.entity},
         {"unit", s.unit},
         {"missing_data_policy", missing_data_policy_name(s.missing_data_policy)},
         {"value_kind", value_kind_name(s.value_kind)}};
  if (s.timing) j["timing"] = {{"frequency_ms", s.timing->frequency_ms}, {"period", s.timing->period}};
  if (!s.collection_procedure.empty()) j["collection_procedure"] = s.collection_procedure;
  if (s.sensor_entity) j["sensor_entity"] = *s.sensor_entity;
  if (!s.provenance.empty()) j["provenance"] = s.provenance;
  return j;
}

StreamSemantics stream_semantics_from_json(const json& j) {
  try {
    StreamSemantics s;
    s.key.database = j.at("database").get<std::string>();
    s.key.metric = j.at("metric").get<std::string>();
    if (j.contains("tags") && !j.at("tags").is_null()) s.key.tags = j.at("tags").get<Tags>();
    validate_key(s.key);
    s.metric_ref = j.at("metric_ref").get<std::string>();
    s.entity = j.at("entity").get<std::string>();
    s.unit = j.at("unit").get<std::string>();
    if (j.contains("timing") && !j.at("timing").is_null()) {
      const json& t = j.at("timing");
      s.timing = Timing{t.at("frequency_ms").get<Millis>(), t.value("period", "")};
      if (s.timing->frequency_ms <= 0) throw Error(ErrorCode::kSchemaError, "timing.frequency_ms must be positive");
    }
    s.collection_procedure = j.value("collection_procedure", "");
    s.missing_data_policy = parse_missing_data_policy(j.value("missing_data_policy", "ignore"));
    if (j.contains("sensor_entity") && !j.at("sensor_entity").is_null()) {
      s.sensor_entity = j.at("sensor_entity").get<std::string>();
    }
    const auto kind = j.value("value_kind", "numeric");
    if (kind == "symbolic") {
      s.value_kind = ValueKind::kSymbolic;
    } else if (kind != "numeric") {
      throw Error(ErrorCode::kSchemaError, "value_kind must be numeric or symbolic");
    }
    s.provenance = j.value("provenance", "");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed stream semantics: ") + e.what());
  }
}

Catalog::Catalog(std::shared_ptr<const OntologySet> ontology) : ontology_(std::move(ontology)) {}

std::shared_ptr<const OntologySet> Catalog::ontology() const {
  std::shared_lock lock(mutex_);
  return ontology_;
}

void Catalog::set_ontology(std::shared_ptr<const OntologySet> ontology) {
  std::unique_lock lock(mutex_);
  auto databases = databases_;
  for (auto& [name, db] : databases) db.architecture = reload_architecture(db, *ontology);
  auto streams = streams_;
  for (auto& [key, sem] : streams) sem = resolve_stream(sem, databases.at(key.database), *ontology);
  ontology_ = std::move(ontology);
  databases_ = std::move(databases);
  streams_ = std::move(streams);
}

void Catalog::register_database(DatabaseSemantics db) {
  validate_name("database", db.database);
  std::unique_lock lock(mutex_);
  if (!ontology_) throw Error(ErrorCode::kUnresolvedReference, "no ontology loaded");
  if (!db.architecture) throw Error(ErrorCode::kSchemaError, "database semantics need an architecture");
  for (const auto& [key, sem] : streams_) {
    if (key.database == db.database) resolve_stream(sem, db, *ontology_);
  }
  databases_.insert_or_assign(db.database, std::move(db));
}

bool Catalog::has_database(std::string_view db) const {
  std::shared_lock lock(mutex_);
  return databases_.find(db) != databases_.end();
}

DatabaseSemantics Catalog::database(std::string_view db) const {
  std::shared_lock lock(mutex_);
  auto it = databases_.find(db);
  if (it == databases_.end()) {
    throw Error(ErrorCode::kUnknownDatabase, "no semantics registered for database '" + std::string(db) + "'");
  }
  return it->second;
}

std::vector<std::string> Catalog::databases() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, db] : databases_) out.push_back(name);
  return out;
}

StreamSemantics Catalog::prepare_stream_locked(StreamSemantics sem) const {
  validate_key(sem.key);
  if (!ontology_) throw Error(ErrorCode::kUnresolvedReference, "no ontology loaded");
  auto db = databases_.find(sem.key.database);
  if (db == databases_.end()) {
    throw Error(ErrorCode::kUnknownDatabase, "no semantics registered for database '" + sem.key.database + "'");
  }
  if (streams_.contains(sem.key)) {
    throw Error(ErrorCode::kDuplicateStream, sem.key.to_string() + " is already registered");
  }
  return resolve_stream(std::move(sem), db->second, *ontology_);
}

void Catalog::add_node_locked(ProvenanceNode node) {
  for (const auto& in : node.inputs) consumers_[in].insert(node.id);
  nodes_.emplace(node.id, std::move(node));
}

std::string Catalog::register_stream(StreamSemantics sem) {
  std::unique_lock lock(mutex_);
  sem = prepare_stream_locked(std::move(sem));
  if (!sem.provenance.empty()) {
    if (!nodes_.contains(sem.provenance)) {
      throw Error(ErrorCode::kUnresolvedReference, "no provenance node '" + sem.provenance + "'");
    }
  } else {
    ProvenanceNode node;
    node.id = raw_node_id(sem.key, sem.sensor_entity);
    node.output = sem.key;
    node.raw = true;
    node.sensor_entity = sem.sensor_entity;
    sem.provenance = node.id;
    if (!nodes_.contains(node.id)) add_node_locked(std::move(node));
  }
  std::string id = sem.key.to_string();
  streams_.emplace(sem.key, std::move(sem));
  return id;
}

std::string Catalog::register_derived_stream(StreamSemantics sem, const Operation& op,
                                             const std::vector<SeriesKey>& inputs) {
  std::unique_lock lock(mutex_);
  sem = prepare_stream_locked(std::move(sem));
  const SeriesKey key = sem.key;
  streams_.emplace(key, std::move(sem));
  try {
    return derive_locked(key, op, inputs);
  } catch (...) {
    streams_.erase(key);
    throw;
  }
}

bool Catalog::has_stream(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  return streams_.contains(key);
}

const StreamSemantics& Catalog::stream_locked(const SeriesKey& key) const {
  auto it = streams_.find(key);
  if (it == streams_.end()) throw Error(ErrorCode::kUnknownStream, "no semantics registered for " + key.to_string());
  return it->second;
}

StreamSemantics Catalog::get_semantics(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  return stream_locked(key);
}

std::vector<StreamSemantics> Catalog::streams() const {
  std::shared_lock lock(mutex_);
  std::vector<StreamSemantics> out;
  for (const auto& [key, sem] : streams_) out.push_back(sem);
  return out;
}

std::vector<StreamSemantics> Catalog::streams_in(std::string_view db) const {
  std::shared_lock lock(mutex_);
  std::vector<StreamSemantics> out;
  for (const auto& [key, sem] : streams_) {
    if (key.database == db) out.push_back(sem);
  }
  return out;
}

std::vector<StreamSemantics> Catalog::find_streams(std::string_view db, std::string_view entity,
                                                   std::string_view metric) const {
  std::shared_lock lock(mutex_);
  std::vector<StreamSemantics> out;
  for (const auto& [key, sem] : streams_) {
    if (!db.empty() && key.database != db) continue;
    if (sem.entity == entity && sem.metric_ref == metric) out.push_back(sem);
  }
  return out;
}

std::set<std::string> Catalog::ancestors_locked(const std::string& node_id) const {
  std::set<std::string> seen;
  std::vector<std::string> todo{node_id};
  while (!todo.empty()) {
    std::string id = std::move(todo.back());
    todo.pop_back();
    if (!seen.insert(id).second) continue;
    auto it = nodes_.find(id);
    if (it == nodes_.end()) continue;
    for (const auto& in : it->second.inputs) todo.push_back(in);
  }
  return seen;
}

std::string Catalog::derive_locked(const SeriesKey& output, const Operation& op,
                                   const std::vector<SeriesKey>& inputs) {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "a derivation needs at least one input");
  if (op.kind == OperationKind::kCompute && op.name.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "compute operations need a name");
  }
  StreamSemantics& out = streams_.at(output);
  std::vector<std::string> input_ids;
  for (const auto& in : inputs) {
    if (in == output) throw Error(ErrorCode::kCycleError, output.to_string() + " cannot derive from itself");
    input_ids.push_back(stream_locked(in).provenance);
  }
  for (const auto& id : input_ids) {
    for (const auto& anc : ancestors_locked(id)) {
      if (nodes_.at(anc).output == output) {
        throw Error(ErrorCode::kCycleError,
                    output.to_string() + " already feeds one of the inputs of this derivation");
      }
    }
  }
  ProvenanceNode node;
  node.id = derived_node_id(output, op, input_ids);
  node.output = output;
  node.raw = false;
  node.operation = op;
  node.inputs = std::move(input_ids);
  out.provenance = node.id;
  std::string id = node.id;
  if (!nodes_.contains(id)) add_node_locked(std::move(node));
  return id;
}

std::string Catalog::record_derivation(const SeriesKey& output, const Operation& op,
                                       const std::vector<SeriesKey>& inputs) {
  std::unique_lock lock(mutex_);
  stream_locked(output);
  return derive_locked(output, op, inputs);
}

std::vector<ProvenanceNode> Catalog::lineage_sources(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  std::vector<ProvenanceNode> out;
  for (const auto& id : ancestors_locked(stream_locked(key).provenance)) {
    const ProvenanceNode& n = nodes_.at(id);
    if (n.raw) out.push_back(n);
  }
  return out;
}

std::set<SeriesKey> Catalog::lineage_descendants(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  std::set<std::string> reached;
  std::vector<std::string> todo{stream_locked(key).provenance};
  while (!todo.empty()) {
    std::string id = std::move(todo.back());
    todo.pop_back();
    if (!reached.insert(id).second) continue;
    if (auto it = consumers_.find(id); it != consumers_.end()) {
      for (const auto& c : it->second) todo.push_back(c);
    }
  }
  std::set<SeriesKey> out;
  for (const auto& [k, sem] : streams_) {
    if (k != key && reached.contains(sem.provenance)) out.insert(k);
  }
  return out;
}

std::set<SeriesKey> Catalog::lineage_upstream(const SeriesKey& key) const {
  std::shared_lock lock(mutex_);
  const auto ancestors = ancestors_locked(stream_locked(key).provenance);
  std::set<SeriesKey> out;
  for (const auto& [k, sem] : streams_) {
    if (k != key && ancestors.contains(sem.provenance)) out.insert(k);
  }
  return out;
}

std::vector<ProvenanceNode> Catalog::provenance_nodes() const {
  std::shared_lock lock(mutex_);
  std::vector<ProvenanceNode> out;
  for (const auto& [id, n] : nodes_) out.push_back(n);
  return out;
}

std::optional<ProvenanceNode> Catalog::provenance_node(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (auto it = nodes_.find(id); it != nodes_.end()) return it->second;
  return std::nullopt;
}

json Catalog::export_provenance() const {
  std::shared_lock lock(mutex_);
  json nodes = json::array();
  for (const auto& [id, n] : nodes_) nodes.push_back(node_to_json(n));
  json current = json::object();
  for (const auto& [key, sem] : streams_) current[key.to_string()] = sem.provenance;
  // A single local repository; the address is kept for schema compatibility.
  return {{"repository", "local"}, {"nodes", std::move(nodes)}, {"streams", std::move(current)}};
}

json Catalog::to_json() const {
  json dbs = json::array();
  {
    std::shared_lock lock(mutex_);
    for (const auto& [name, db] : databases_) {
      dbs.push_back({{"database", name},
                     {"architecture", db.architecture->document()},
                     {"storage_architecture", db.storage_architecture},
                     {"retention_sharding_notes", db.retention_sharding_notes},
                     {"storage_scheme", db.storage_scheme}});
    }
  }
  json streams = json::array();
  for (const auto& s : this->streams()) streams.push_back(stream_semantics_to_json(s));
  return {{"databases", std::move(dbs)}, {"streams", std::move(streams)}, {"provenance", export_provenance()}};
}

void Catalog::load_json(const json& j) {
  std::unique_lock lock(mutex_);
  try {
    std::map<std::string, DatabaseSemantics, std::less<>> databases;
    std::map<SeriesKey, StreamSemantics> streams;
    std::map<std::string, ProvenanceNode, std::less<>> nodes;
    const bool empty = j.value("databases", json::array()).empty() && j.value("streams", json::array()).empty();
    if (!ontology_ && !empty) throw Error(ErrorCode::kUnresolvedReference, "no ontology loaded");
    for (const auto& d : j.value("databases", json::array())) {
      DatabaseSemantics db;
      db.database = d.at("database").get<std::string>();
      db.architecture = std::make_shared<const SystemArchitecture>(load_architecture(d.at("architecture"), *ontology_));
      db.storage_architecture = d.value("storage_architecture", "single-node");
      db.retention_sharding_notes = d.value("retention_sharding_notes", "");
      db.storage_scheme = d.value("storage_scheme", "");
      std::string name = db.database;
      databases.emplace(std::move(name), std::move(db));
    }
    if (j.contains("provenance")) {
      for (const auto& n : j.at("provenance").value("nodes", json::array())) {
        ProvenanceNode node = node_from_json(n);
        std::string id = node.id;
        nodes.emplace(std::move(id), std::move(node));
      }
    }
    for (const auto& [id, n] : nodes) {
      for (const auto& in : n.inputs) {
        if (!nodes.contains(in)) throw Error(ErrorCode::kDanglingReference, "provenance node " + id + " input " + in);
      }
    }
    for (const auto& s : j.value("streams", json::array())) {
      StreamSemantics sem = stream_semantics_from_json(s);
      auto db = databases.find(sem.key.database);
      if (db == databases.end()) {
        throw Error(ErrorCode::kUnknownDatabase, "stream " + sem.key.to_string() + " names an unknown database");
      }
      sem = resolve_stream(std::move(sem), db->second, *ontology_);
      if (!nodes.contains(sem.provenance)) {
        throw Error(ErrorCode::kDanglingReference, "stream " + sem.key.to_string() + " has no provenance node");
      }
      SeriesKey key = sem.key;
      if (!streams.emplace(std::move(key), std::move(sem)).second) {
        throw Error(ErrorCode::kDuplicateStream, "duplicate stream " + s.dump());
      }
    }
    databases_ = std::move(databases);
    streams_ = std::move(streams);
    nodes_.clear();
    consumers_.clear();
    for (auto& [id, n] : nodes) add_node_locked(std::move(n));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed catalog: ") + e.what());
  }
}

}  // namespace setsdb
