// SPDX-License-Identifier: Apache-2.0
#pragma once

// Everything one setsdb instance knows: the store, the ontology set, the
// semantics catalog and the similarity configuration. With a data
// directory, state is reloaded on construction and saved after each change:
//
//   <dir>/ontology.json  <dir>/similarity.json  <dir>/catalog.json  <dir>/store/

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "setsdb/ontology.hpp"
#include "setsdb/semantics.hpp"
#include "setsdb/similarity.hpp"
#include "setsdb/store.hpp"

namespace setsdb {

class System {
 public:
  System();
  explicit System(std::filesystem::path dir);

  MemoryStore& store() { return *store_; }
  const MemoryStore& store() const { return *store_; }
  Catalog& catalog() { return catalog_; }
  const Catalog& catalog() const { return catalog_; }
  // Throws kSchemaError until an ontology has been loaded.
  const OntologySet& ontology() const;
  bool has_ontology() const { return catalog_.ontology() != nullptr; }
  const SimilarityConfig& similarity_config() const { return similarity_; }

  DatabaseHandle create_database(const std::string& name, std::optional<RetentionPolicy> retention);
  void load_ontology(const nlohmann::json& doc);
  // The database must exist in the store. Optional members
  // storage_architecture, retention_sharding_notes and storage_scheme are
  // taken from the document.
  void load_architecture(const std::string& db, const nlohmann::json& doc);
  // A single stream-semantics object or a list of them. Returns the ids.
  std::vector<std::string> register_streams(const nlohmann::json& doc);
  void set_similarity_config(SimilarityConfig cfg);

  // Line-protocol records; every record must belong to `db`. Blank lines
  // and lines starting with '#' are skipped. Returns points accepted.
  std::size_t write_lines(std::string_view db, std::istream& in);

  // Writes catalog, ontology and configuration when a directory is set.
  void save() const;

 private:
  void load_state();

  std::optional<std::filesystem::path> dir_;
  std::unique_ptr<MemoryStore> store_;
  Catalog catalog_;
  SimilarityConfig similarity_;
};

// Reads a whole file into a JSON document. Throws kIoError, kSchemaError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace setsdb
