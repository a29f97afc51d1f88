#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "inopca/errors.hpp"
#include "inopca/harness.hpp"
#include "inopca/parse.hpp"

namespace inopca {

/// Minimal CSV emitter; numbers use the shortest round-trip form so reruns are byte-identical.
class CsvWriter {
public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names) { row_strings(names); }

  void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

private:
  std::ostream& out_;
};

inline void write_aggregate_csv(std::ostream& out, const Aggregate& agg) {
  CsvWriter csv(out);
  const bool theory = agg.q_theory.has_value();
  std::vector<std::string> head{"t", "Q_mean", "Q_std", "lambda_mean", "lambda_std"};
  if (theory) {
    head.push_back("Q_theory");
    head.push_back("lambda_theory");
  }
  csv.header(head);
  for (std::size_t i = 0; i < agg.t.size(); ++i) {
    std::vector<double> r{agg.t[i], agg.q_mean[i], agg.q_std[i], agg.lambda_mean[i], agg.lambda_std[i]};
    if (theory) {
      r.push_back((*agg.q_theory)[i]);
      r.push_back((*agg.lambda_theory)[i]);
    }
    csv.row(r);
  }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw ConfigError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto f = open_output(path);
  f << text;
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Flat key → string table from a TOML file. Nested tables are flattened to `a.b`; dashes and
/// underscores in keys are interchangeable.
inline std::map<std::string, std::string> load_toml_settings(const std::filesystem::path& path) {
  toml::table tbl;
  try {
    tbl = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ParseError(path.string() + ":" + std::to_string(src.begin.line) + ":" + std::to_string(src.begin.column) + ": " +
                         std::string(e.description()),
                     src.begin.line, src.begin.column);
  }
  std::map<std::string, std::string> out;
  std::function<void(const toml::table&, const std::string&)> walk = [&](const toml::table& t, const std::string& prefix) {
    for (const auto& [k, v] : t) {
      std::string key = prefix + std::string(k.str());
      for (char& c : key)
        if (c == '_') c = '-';
      if (const auto* sub = v.as_table()) {
        walk(*sub, key + ".");
      } else if (const auto* s = v.as_string()) {
        out[key] = s->get();
      } else if (const auto* i = v.as_integer()) {
        out[key] = std::to_string(i->get());
      } else if (const auto* d = v.as_floating_point()) {
        out[key] = format_number(d->get());
      } else if (const auto* b = v.as_boolean()) {
        out[key] = b->get() ? "true" : "false";
      } else if (const auto* a = v.as_array()) {
        std::string joined;
        for (const auto& e : *a) {
          if (!joined.empty()) joined += ',';
          if (const auto* ed = e.as_floating_point()) joined += format_number(ed->get());
          else if (const auto* ei = e.as_integer()) joined += std::to_string(ei->get());
          else if (const auto* es = e.as_string()) joined += es->get();
          else throw ConfigError(path.string() + ": unsupported array element in '" + key + "'");
        }
        out[key] = joined;
      } else {
        throw ConfigError(path.string() + ": unsupported value type for '" + key + "'");
      }
    }
  };
  walk(tbl, "");
  return out;
}

#ifndef INOPCA_GIT_DESCRIBE
#define INOPCA_GIT_DESCRIBE "unknown"
#endif

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string git_describe() { return INOPCA_GIT_DESCRIBE; }

/// Everything needed to rerun a command: its argv with every setting resolved.
struct RunManifest {
  std::vector<std::string> command; ///< subcommand path, e.g. {"theory", "pde"}
  std::map<std::string, std::string> settings;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;

  std::vector<std::string> argv() const {
    std::vector<std::string> a = command;
    for (const auto& [k, v] : settings) {
      if (k == "out" || k == "config" || v.empty()) continue;
      if (v == "true") {
        a.push_back("--" + k);
      } else if (v != "false") {
        a.push_back("--" + k);
        a.push_back(v);
      }
    }
    return a;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "inopca";
    j["version"] = kToolVersion;
    j["git_describe"] = git_describe();
    j["subcommand"] = command;
    j["config"] = settings;
    j["seed"] = seed;
    j["outputs"] = outputs;
    j["argv"] = argv();
    j["wall_time_s"] = wall_time_s;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
      m.command = j.at("subcommand").get<std::vector<std::string>>();
      m.settings = j.at("config").get<std::map<std::string, std::string>>();
      m.seed = j.value("seed", std::uint64_t{0});
      m.outputs = j.value("outputs", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    if (m.command.empty()) throw ConfigError("manifest has an empty subcommand");
    return m;
  }
};

} // namespace inopca
