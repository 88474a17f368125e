// Batch front end: run, validate, compare and decompose experiment configs.
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gbandit/experiment.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitPartial = 2;
constexpr int kExitError = 3;

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    const auto dash = field.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = std::stoull(field.substr(0, dash));
      const auto hi = std::stoull(field.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("empty seed range " + field);
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(std::stoull(field));
    }
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds given");
  return seeds;
}

gbandit::ExperimentConfig load(const std::string &path, const std::string &seeds, const std::string &out) {
  auto config = gbandit::load_config(path);
  if (!seeds.empty()) config.seeds = parse_seeds(seeds);
  if (!out.empty()) config.output = out;
  return config;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Graphical bandit experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds;
  std::string out;
  bool validate_only = false;

  auto *run = app.add_subcommand("run", "Run an experiment config and write CSV outputs");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--seeds", seeds, "Seeds to run, e.g. 0,1,2 or 0-19 (overrides the config)");
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_flag("--validate-only", validate_only, "Validate the config and exit");

  auto *validate = app.add_subcommand("validate", "Validate a config without running it");
  validate->add_option("config", config_path, "Config file")->required();

  std::string dir_a;
  std::string dir_b;
  auto *compare = app.add_subcommand("compare", "Compare two output directories");
  compare->add_option("dir_a", dir_a, "First output directory")->required();
  compare->add_option("dir_b", dir_b, "Second output directory")->required();

  auto *decompose = app.add_subcommand("decompose", "Print the tree decomposition of a config's model as JSON");
  decompose->add_option("config", config_path, "Config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate || (*run && validate_only)) {
      const auto config = load(config_path, seeds, out);
      std::cout << gbandit::resolved_config(config).dump(2) << "\n";
      std::cerr << config_path << ": ok\n";
      return kExitOk;
    }
    if (*run) {
      const auto config = load(config_path, seeds, out);
      const auto result = gbandit::run_experiment(config);
      for (const auto &f : result.files) std::cout << config.output << "/" << f << "\n";
      for (const auto &e : result.errors) std::cerr << "error: " << e << "\n";
      if (!result.complete) {
        std::cerr << "partial outputs written; see manifest.json\n";
        return kExitPartial;
      }
      return kExitOk;
    }
    if (*compare) {
      const auto report = gbandit::compare_runs(dir_a, dir_b);
      std::cout << "status: " << gbandit::to_string(report.status) << "\n";
      for (const auto &line : report.lines) std::cout << line << "\n";
      return kExitOk;
    }
    if (*decompose) {
      std::cout << gbandit::decomposition_dump(load(config_path, "", "")).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const gbandit::ConfigError &e) {
    for (const auto &d : e.diagnostics()) std::cerr << d << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
