// Experiment runner: verify one config, run a directory of configs, dump
// martingale traces, or replay a run manifest.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "brpath/config.hpp"
#include "brpath/experiments.hpp"
#include "brpath/parallel.hpp"

#ifndef BRPATH_VERSION
#define BRPATH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Relative outputs live next to the config file.
fs::path output_path(const brpath::ExperimentConfig& cfg, const fs::path& config_file, const std::string& override,
                     const char* suffix) {
  if (!override.empty()) return override;
  const fs::path dir = config_file.parent_path();
  if (cfg.output.empty()) return dir / (config_file.stem().string() + suffix);
  const fs::path out = cfg.output;
  return out.is_absolute() ? out : dir / out;
}

std::optional<brpath::ExperimentConfig> load(const fs::path& file, std::ostream& err) {
  const auto parsed = brpath::parse_config(read_file(file));
  for (const auto& e : parsed.errors) err << file.string() << ": " << e.format() << '\n';
  return parsed.config;
}

struct Outcome {
  brpath::RunResult result;
  fs::path output;
  int code = 0;
};

Outcome run_and_record(const brpath::ExperimentConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  brpath::RunResult r = brpath::run_experiment(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(out, r.csv);
  const int code = brpath::exit_code(r.verdict);
  json m{{"config", cfg.text},
         {"experiment", cfg.experiment},
         {"model", cfg.model},
         {"seed", cfg.seed},
         {"output", fs::absolute(out).string()},
         {"workers", brpath::worker_count()},
         {"version", BRPATH_VERSION},
         {"compiler", __VERSION__},
         {"wall_time_s", wall},
         {"rows", r.rows},
         {"verdict", std::string(brpath::mc::to_string(r.verdict))},
         {"exit_code", code},
         {"csv_fnv1a64", fnv1a(r.csv)}};
  write_file(out.string() + ".manifest.json", m.dump(2) + "\n");
  return {std::move(r), out, code};
}

int cmd_verify(const fs::path& config, const std::string& output) {
  const auto cfg = load(config, std::cerr);
  if (!cfg) return 2;
  const Outcome o = run_and_record(*cfg, output_path(*cfg, config, output, ".csv"));
  std::cout << cfg->experiment << ' ' << brpath::mc::to_string(o.result.verdict) << ' ' << o.result.rows
            << " rows -> " << o.output.string() << '\n';
  return o.code;
}

int cmd_suite(const fs::path& dir, const std::string& summary) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".cfg") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  std::ostringstream table;
  table << "config,experiment,status,rows,output\n";
  bool failed = false, inconclusive = false;
  for (const auto& c : configs) {
    std::string experiment, status, out;
    std::size_t rows = 0;
    try {
      const auto cfg = load(c, std::cerr);
      if (!cfg) {
        status = "error";
        failed = true;
      } else {
        experiment = cfg->experiment;
        const Outcome o = run_and_record(*cfg, output_path(*cfg, c, "", ".csv"));
        status = std::string(brpath::mc::to_string(o.result.verdict));
        rows = o.result.rows;
        out = o.output.string();
        failed = failed || o.code == 2;
        inconclusive = inconclusive || o.code == 3;
      }
    } catch (const std::exception& ex) {
      std::cerr << c.string() << ": " << ex.what() << '\n';
      status = "error";
      failed = true;
    }
    table << c.filename().string() << ',' << experiment << ',' << status << ',' << rows << ',' << out << '\n';
  }
  std::cout << table.str();
  if (!summary.empty()) write_file(summary, table.str());
  return failed ? 2 : inconclusive ? 3 : 0;
}

int cmd_sample(const fs::path& config, const std::string& output) {
  const auto cfg = load(config, std::cerr);
  if (!cfg) return 2;
  const fs::path out =
      output.empty() ? config.parent_path() / (config.stem().string() + ".trace.csv") : fs::path(output);
  write_file(out, brpath::sample_traces(*cfg));
  std::cout << "traces -> " << out.string() << '\n';
  return 0;
}

int cmd_replay(const fs::path& manifest, const std::string& output) {
  json m;
  try {
    m = json::parse(read_file(manifest));
  } catch (const json::exception& ex) {
    throw IoError("malformed manifest " + manifest.string() + ": " + ex.what());
  }
  const auto parsed = brpath::parse_config(m.at("config").get<std::string>());
  for (const auto& e : parsed.errors) std::cerr << manifest.string() << ": " << e.format() << '\n';
  if (!parsed.config) return 2;
  const fs::path out = output.empty() ? fs::path(m.at("output").get<std::string>()) : fs::path(output);
  const Outcome o = run_and_record(*parsed.config, out);
  const bool same = fnv1a(o.result.csv) == m.at("csv_fnv1a64").get<std::string>();
  std::cout << "replay " << (same ? "identical" : "DIFFERENT") << " -> " << out.string() << '\n';
  if (!same) return 1;
  return o.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-space curvature experiments. Worker threads: BRPATH_WORKERS."};
  app.require_subcommand(1);
  app.set_version_flag("--version", BRPATH_VERSION);

  std::string config, output, dir, summary, manifest;
  auto* verify = app.add_subcommand("verify", "Run one experiment config");
  verify->add_option("config", config, "Config file")->required();
  verify->add_option("-o,--output", output, "CSV path (overrides the config)");

  auto* suite = app.add_subcommand("suite", "Run every *.cfg in a directory");
  suite->add_option("dir", dir, "Config directory")->required();
  suite->add_option("--summary", summary, "Also write the summary table here");

  auto* sample = app.add_subcommand("sample", "Dump martingale traces (path_id,t,F_t,cumulative_qv)");
  sample->add_option("config", config, "Config file")->required();
  sample->add_option("-o,--output", output, "Trace CSV path");

  auto* replay = app.add_subcommand("replay", "Re-run from a manifest and compare the CSV");
  replay->add_option("manifest", manifest, "Manifest JSON")->required();
  replay->add_option("-o,--output", output, "CSV path (default: the recorded one)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*verify) return cmd_verify(config, output);
    if (*suite) return cmd_suite(dir, summary);
    if (*sample) return cmd_sample(config, output);
    if (*replay) return cmd_replay(manifest, output);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
