// SPDX-License-Identifier: Apache-2.0
// setsdb command-line interface.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "setsdb/cloud.hpp"
#include "setsdb/error.hpp"
#include "setsdb/query.hpp"
#include "setsdb/system.hpp"

namespace {

using setsdb::System;
using json = nlohmann::json;

std::string default_data_dir() {
  if (const char* env = std::getenv("SETSDB_DATA")) return env;
  return "setsdb-data";
}

void print_sample(const setsdb::Sample& s) {
  std::cout << s.timestamp << ' ' << setsdb::format_value(s.value) << '\n';
}

void print_result(const setsdb::Query& q, const setsdb::QueryResult& r, bool explain) {
  for (const auto& s : r.samples) print_sample(s);
  std::size_t rank = 0;
  for (const auto& m : r.matches) {
    std::cout << "# " << ++rank << ' ' << m.match.key.to_string() << " score=" << setsdb::format_double(m.match.score);
    if (m.match.plan) std::cout << " metric=" << m.match.plan->query.metric;
    std::cout << '\n';
    for (const auto& s : m.samples) print_sample(s);
    if (explain && m.match.plan) {
      for (const auto& line : m.match.plan->explanation) std::cout << "#   " << line << '\n';
    }
    for (const auto& n : m.notes) std::cout << "#   note: " << n << '\n';
  }
  if (explain) {
    for (const auto& line : r.explanation) std::cout << "# " << line << '\n';
  }
  for (const auto& n : r.notes) std::cout << "# note: " << n << '\n';
  if (r.materialized) std::cout << "# materialized " << r.materialized->to_string() << '\n';
  (void)q;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"setsdb: a time series store with semantic queries"};
  app.require_subcommand(1);
  std::string data_dir = default_data_dir();
  app.add_option("--data-dir", data_dir, "State directory (default $SETSDB_DATA or ./setsdb-data)");

  std::string name;
  std::string file;
  std::string text;
  std::string retention;
  bool materialize = false;
  bool explain = false;
  bool as_json = false;
  bool sources = false;
  bool descendants = false;
  std::uint64_t seed = 1;
  std::size_t hosts = 2;
  setsdb::Millis duration = 100000;
  bool scripted = false;
  setsdb::Millis now = 0;

  auto* create = app.add_subcommand("create-db", "Create a database");
  create->add_option("name", name)->required();
  create->add_option("--retention", retention, "inf or <raw_ms>[,<window_ms>:<agg>:<keep_ms|inf>]...");

  auto* load_ont = app.add_subcommand("load-ontology", "Load system, metric and unit ontologies");
  load_ont->add_option("file", file)->required();

  auto* load_arch = app.add_subcommand("load-architecture", "Load a database's system architecture");
  load_arch->add_option("db", name)->required();
  load_arch->add_option("file", file)->required();

  auto* reg = app.add_subcommand("register-stream", "Register stream semantics (object or list)");
  reg->add_option("file", file)->required();

  auto* write = app.add_subcommand("write", "Write line-protocol records");
  write->add_option("db", name)->required();
  write->add_option("--file", file, "Line-protocol file (default stdin)");

  auto* query = app.add_subcommand("query", "Run a SELECT, DERIVE or MATCH query");
  query->add_option("text", text)->required();
  query->add_flag("--materialize", materialize, "Persist derived results with provenance");
  query->add_flag("--explain", explain, "Print the reasoning trace");
  query->add_flag("--json", as_json, "Print a JSON document");

  auto* lineage = app.add_subcommand("lineage", "Show provenance of a stream");
  lineage->add_option("key", text)->required();
  auto* src_flag = lineage->add_flag("--sources", sources, "Raw source nodes (default)");
  lineage->add_flag("--descendants", descendants, "Streams derived from this one")->excludes(src_flag);

  auto* load_sim = app.add_subcommand("load-similarity", "Load a similarity configuration");
  load_sim->add_option("file", file)->required();

  auto* retain = app.add_subcommand("apply-retention", "Apply a database's retention policy");
  retain->add_option("db", name)->required();
  retain->add_option("--now", now, "Current time in epoch ms")->required();

  auto* provenance = app.add_subcommand("export-provenance", "Print the provenance DAG as JSON");

  auto* fixture = app.add_subcommand("fixture", "Write the cloud fixture files");
  fixture->add_option("dir", file)->required();
  fixture->add_flag("--scripted", scripted, "The two-host scripted scenario");
  fixture->add_option("--seed", seed);
  fixture->add_option("--hosts", hosts);
  fixture->add_option("--duration", duration, "Milliseconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fixture->parsed()) {
      auto f = scripted ? setsdb::cloud::scripted_fixture() : setsdb::cloud::generate_fixture(seed, hosts, duration);
      setsdb::cloud::write_fixture_files(f, file);
      std::cout << "wrote fixture to " << file << '\n';
      return 0;
    }

    System system{std::filesystem::path(data_dir)};
    if (create->parsed()) {
      std::optional<setsdb::RetentionPolicy> policy;
      if (!retention.empty()) policy = setsdb::RetentionPolicy::parse(retention);
      system.create_database(name, policy);
      std::cout << "created " << name << '\n';
    } else if (load_ont->parsed()) {
      system.load_ontology(setsdb::read_json_file(file));
      std::cout << "loaded ontology with " << system.ontology().metrics().size() << " metrics and "
                << system.ontology().units().size() << " units\n";
    } else if (load_arch->parsed()) {
      system.load_architecture(name, setsdb::read_json_file(file));
      std::cout << "loaded architecture for " << name << '\n';
    } else if (reg->parsed()) {
      for (const auto& id : system.register_streams(setsdb::read_json_file(file))) {
        std::cout << "registered " << id << '\n';
      }
    } else if (write->parsed()) {
      std::size_t n = 0;
      if (file.empty()) {
        n = system.write_lines(name, std::cin);
      } else {
        std::ifstream in(file);
        if (!in) throw setsdb::Error(setsdb::ErrorCode::kIoError, "cannot read " + file);
        n = system.write_lines(name, in);
      }
      std::cout << "wrote " << n << " points\n";
    } else if (query->parsed()) {
      const setsdb::Query q = setsdb::parse_query(text);
      const setsdb::QueryResult r = setsdb::run_query(q, system, {materialize});
      if (as_json) {
        std::cout << setsdb::query_result_to_json(q, r).dump(2) << '\n';
      } else {
        print_result(q, r, explain);
      }
    } else if (lineage->parsed()) {
      const setsdb::SeriesKey key = setsdb::SeriesKey::parse(text);
      if (descendants) {
        for (const auto& k : system.catalog().lineage_descendants(key)) std::cout << k.to_string() << '\n';
      } else {
        for (const auto& n : system.catalog().lineage_sources(key)) {
          std::cout << n.id << ' ' << n.output.to_string() << " sensor=" << n.sensor_entity.value_or("-") << '\n';
        }
      }
    } else if (load_sim->parsed()) {
      system.set_similarity_config(setsdb::similarity_config_from_json(setsdb::read_json_file(file)));
      std::cout << "loaded similarity configuration\n";
    } else if (retain->parsed()) {
      std::cout << "dropped " << system.store().apply_retention(name, now) << " points\n";
    } else if (provenance->parsed()) {
      std::cout << system.catalog().export_provenance().dump(2) << '\n';
    }
    return 0;
  } catch (const setsdb::Error& e) {
    std::cerr << "setsdb: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "setsdb: internal error: " << e.what() << '\n';
    return 2;
  }
}
