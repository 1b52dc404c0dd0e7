// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-stream and per-database semantics, associated with stored data purely
// by SeriesKey, plus the provenance DAG over streams.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/expr.hpp"
#include "setsdb/ontology.hpp"
#include "setsdb/series.hpp"

namespace setsdb {

struct Timing {
  Millis frequency_ms = 0;
  std::string period;

  bool operator==(const Timing&) const = default;
};

struct StreamSemantics {
  SeriesKey key;
  std::string metric_ref;  // ontology metric as written; canonical after registration
  std::string entity;
  std::string unit;
  std::optional<Timing> timing;
  std::string collection_procedure;
  MissingDataPolicy missing_data_policy = MissingDataPolicy::kIgnore;
  std::optional<std::string> sensor_entity;
  ValueKind value_kind = ValueKind::kNumeric;
  std::string provenance;  // current provenance node id; filled on registration

  bool operator==(const StreamSemantics&) const = default;
};

nlohmann::json stream_semantics_to_json(const StreamSemantics& s);
// Throws kSchemaError.
StreamSemantics stream_semantics_from_json(const nlohmann::json& j);

struct DatabaseSemantics {
  std::string database;
  std::shared_ptr<const SystemArchitecture> architecture;
  std::string storage_architecture = "single-node";
  std::string retention_sharding_notes;
  std::string storage_scheme;
};

enum class OperationKind { kMigrate, kDownsample, kCompute };

std::string_view operation_kind_name(OperationKind kind);

struct Operation {
  OperationKind kind = OperationKind::kCompute;
  std::string name;  // compute only
  std::string features;
  std::optional<std::string> url;

  bool operator==(const Operation&) const = default;

  static Operation migrate() { return {OperationKind::kMigrate, "", "", std::nullopt}; }
  static Operation downsample(std::string features = {}) {
    return {OperationKind::kDownsample, "", std::move(features), std::nullopt};
  }
  static Operation compute(std::string name, std::string features = {}) {
    return {OperationKind::kCompute, std::move(name), std::move(features), std::nullopt};
  }
};

struct ProvenanceNode {
  std::string id;
  SeriesKey output;  // the stream this node was created for
  bool raw = true;
  std::optional<std::string> sensor_entity;  // raw only
  Operation operation;                       // derived only
  std::vector<std::string> inputs;           // derived only

  bool operator==(const ProvenanceNode&) const = default;
};

class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::shared_ptr<const OntologySet> ontology);

  // Replaces the ontology. Registered semantics are re-validated against the
  // new one; on failure nothing changes.
  void set_ontology(std::shared_ptr<const OntologySet> ontology);
  std::shared_ptr<const OntologySet> ontology() const;

  // Adds or replaces a database's semantics. Replacing is refused while
  // registered streams would no longer resolve.
  void register_database(DatabaseSemantics db);
  bool has_database(std::string_view db) const;
  DatabaseSemantics database(std::string_view db) const;  // throws kUnknownDatabase
  std::vector<std::string> databases() const;

  // Returns the canonical key string. Throws kUnknownDatabase,
  // kUnresolvedReference, kDuplicateStream, kUnitMismatch.
  std::string register_stream(StreamSemantics sem);
  bool has_stream(const SeriesKey& key) const;
  StreamSemantics get_semantics(const SeriesKey& key) const;  // throws kUnknownStream
  std::vector<StreamSemantics> streams() const;                // key order
  std::vector<StreamSemantics> streams_in(std::string_view db) const;
  // Streams of `db` (or every database when empty) bound to (entity, metric).
  std::vector<StreamSemantics> find_streams(std::string_view db, std::string_view entity,
                                            std::string_view metric) const;

  // Registers a stream whose provenance starts as a Derived node instead of
  // a Raw one. Returns the node id.
  std::string register_derived_stream(StreamSemantics sem, const Operation& op,
                                      const std::vector<SeriesKey>& inputs);

  // Throws kUnknownStream, kCycleError, kInvalidArgument (no inputs).
  std::string record_derivation(const SeriesKey& output, const Operation& op,
                                const std::vector<SeriesKey>& inputs);

  // Raw nodes reachable from the stream's current node, id order.
  std::vector<ProvenanceNode> lineage_sources(const SeriesKey& key) const;
  // Streams whose provenance reaches this stream's current node.
  std::set<SeriesKey> lineage_descendants(const SeriesKey& key) const;
  // Streams whose current node this stream's provenance reaches; the
  // inverse of lineage_descendants.
  std::set<SeriesKey> lineage_upstream(const SeriesKey& key) const;

  std::vector<ProvenanceNode> provenance_nodes() const;  // id order
  std::optional<ProvenanceNode> provenance_node(std::string_view id) const;

  // Adjacency-list export of the provenance DAG.
  nlohmann::json export_provenance() const;

  // Full state (databases with architecture documents, streams, provenance).
  nlohmann::json to_json() const;
  // Replaces all state with a to_json() document, validated against the
  // current ontology. On failure nothing changes.
  void load_json(const nlohmann::json& j);

 private:
  StreamSemantics prepare_stream_locked(StreamSemantics sem) const;
  std::string derive_locked(const SeriesKey& output, const Operation& op,
                            const std::vector<SeriesKey>& inputs);
  std::set<std::string> ancestors_locked(const std::string& node_id) const;
  const StreamSemantics& stream_locked(const SeriesKey& key) const;
  void add_node_locked(ProvenanceNode node);

  mutable std::shared_mutex mutex_;
  std::shared_ptr<const OntologySet> ontology_;
  std::map<std::string, DatabaseSemantics, std::less<>> databases_;
  std::map<SeriesKey, StreamSemantics> streams_;
  std::map<std::string, ProvenanceNode, std::less<>> nodes_;
  std::map<std::string, std::set<std::string>, std::less<>> consumers_;  // node -> nodes using it
};

}  // namespace setsdb
