// SPDX-License-Identifier: Apache-2.0
#include "setsdb/system.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "setsdb/error.hpp"

namespace setsdb {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_json_file(const fs::path& path, const json& doc) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, path.string() + " is not valid JSON: " + e.what());
  }
}

System::System() : store_(std::make_unique<MemoryStore>()) {}

System::System(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(*dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir_->string() + ": " + ec.message());
  store_ = std::make_unique<MemoryStore>(*dir_ / "store");
  load_state();
}

void System::load_state() {
  if (fs::exists(*dir_ / "ontology.json")) {
    auto doc = read_json_file(*dir_ / "ontology.json");
    catalog_.set_ontology(std::make_shared<const OntologySet>(setsdb::load_ontology(doc)));
  }
  if (fs::exists(*dir_ / "similarity.json")) {
    similarity_ = similarity_config_from_json(read_json_file(*dir_ / "similarity.json"));
  }
  if (fs::exists(*dir_ / "catalog.json")) catalog_.load_json(read_json_file(*dir_ / "catalog.json"));
}

void System::save() const {
  if (!dir_) return;
  if (auto ont = catalog_.ontology()) write_json_file(*dir_ / "ontology.json", ont->document());
  write_json_file(*dir_ / "similarity.json", similarity_config_to_json(similarity_));
  write_json_file(*dir_ / "catalog.json", catalog_.to_json());
}

const OntologySet& System::ontology() const {
  auto ont = catalog_.ontology();
  if (!ont) throw Error(ErrorCode::kSchemaError, "no ontology loaded; run load-ontology first");
  return *ont;
}

DatabaseHandle System::create_database(const std::string& name, std::optional<RetentionPolicy> retention) {
  return store_->create_database(name, std::move(retention));
}

void System::load_ontology(const json& doc) {
  catalog_.set_ontology(std::make_shared<const OntologySet>(setsdb::load_ontology(doc)));
  save();
}

void System::load_architecture(const std::string& db, const json& doc) {
  if (!store_->has_database(db)) throw Error(ErrorCode::kUnknownDatabase, "no database '" + db + "'; create it first");
  DatabaseSemantics sem;
  sem.database = db;
  sem.architecture = std::make_shared<const SystemArchitecture>(setsdb::load_architecture(doc, ontology()));
  sem.storage_architecture = doc.value("storage_architecture", sem.storage_architecture);
  sem.retention_sharding_notes = doc.value("retention_sharding_notes", store_->retention(db).to_string());
  sem.storage_scheme = doc.value("storage_scheme", "columnar per-stream, append-only line protocol files");
  catalog_.register_database(std::move(sem));
  save();
}

std::vector<std::string> System::register_streams(const json& doc) {
  std::vector<StreamSemantics> parsed;
  if (doc.is_array()) {
    for (const auto& s : doc) parsed.push_back(stream_semantics_from_json(s));
  } else {
    parsed.push_back(stream_semantics_from_json(doc));
  }
  std::vector<std::string> ids;
  try {
    for (auto& s : parsed) ids.push_back(catalog_.register_stream(std::move(s)));
  } catch (...) {
    // Keep what was registered before the failure; the caller sees the error.
    save();
    throw;
  }
  save();
  return ids;
}

void System::set_similarity_config(SimilarityConfig cfg) {
  cfg.validate();
  similarity_ = std::move(cfg);
  save();
}

std::size_t System::write_lines(std::string_view db, std::istream& in) {
  if (!store_->has_database(db)) throw Error(ErrorCode::kUnknownDatabase, "no database '" + std::string(db) + "'");
  std::map<SeriesKey, std::vector<Sample>> batches;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    LineRecord rec;
    try {
      rec = parse_line(line);
    } catch (const Error& e) {
      // what() already starts with the code name; keep only the message.
      std::string_view msg = e.what();
      msg.remove_prefix(std::min(msg.size(), error_code_name(e.code()).size() + 2));
      throw Error(e.code(), "line " + std::to_string(number) + ": " + std::string(msg));
    }
    if (rec.key.database != db) {
      throw Error(ErrorCode::kInvalidArgument,
                  "line " + std::to_string(number) + " belongs to database '" + rec.key.database + "'");
    }
    batches[rec.key].push_back(std::move(rec.sample));
  }
  std::size_t accepted = 0;
  for (const auto& [key, samples] : batches) accepted += store_->write_points(key, samples);
  return accepted;
}

}  // namespace setsdb
