#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbandit/bandit.h"
#include "gbandit/env.h"

namespace gbandit {

inline constexpr const char *kLibraryVersion = "0.1.0";
inline constexpr const char *kRngScheme = Rng::kScheme;
inline constexpr const char *kRoundsSchema = "gbandit-rounds/v1";
inline constexpr const char *kSummarySchema = "gbandit-summary/v1";
inline constexpr const char *kTradeoffSchema = "gbandit-tradeoff/v1";
inline constexpr const char *kManifestFormat = "gbandit-manifest";

/// A rejected config. Each diagnostic reads "file:line: /json/pointer: message".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string> &diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct ModelConfig {
  enum class Source { kPreset, kGenerate, kFile };
  Source source = Source::kPreset;
  std::string preset = "sponsored_search";
  SponsoredSearchSizes sizes;
  GeneratorSpec generator;
  /// Model dump path, resolved against the config file's directory.
  std::string file;
  std::uint64_t seed = 0;
};

struct ContextConfig {
  enum class Kind { kUniform, kMarginals, kSupport, kReplay, kRankGreedy };
  Kind kind = Kind::kUniform;
  /// Variable name to distribution over its values.
  std::map<std::string, std::vector<double>> marginals;
  std::vector<std::vector<int>> support;
  std::vector<double> weights;
  std::string replay_file;
};

struct AnalysisConfig {
  bool rank = false;
  bool exponent_fit = true;
  bool tradeoff = false;
};

struct ExperimentConfig {
  ModelConfig model;
  ContextConfig contexts;
  NoiseModel noise;
  RunConfig run;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "out";
  AnalysisConfig analysis;
  /// Directory relative paths are resolved against.
  std::string base_dir = ".";
};

/// Parses and fully validates a config document, including building the
/// model and context source. `path` is used only in diagnostics.
ExperimentConfig parse_config(const std::string &text, const std::string &path);
ExperimentConfig load_config(const std::string &path);

/// The config with every default and "auto" value written out.
nlohmann::ordered_json resolved_config(const ExperimentConfig &config);

/// Model, truth and context source a config describes.
struct Instance {
  GeneratedInstance generated;
  ContextSource contexts;
};

Instance build_instance(const ExperimentConfig &config);

struct ExperimentResult {
  bool complete = true;
  std::vector<std::string> files;
  std::vector<std::string> errors;
};

/// Runs every seed (on GBANDIT_WORKERS threads, default 1) and writes
/// rounds_<seed>.csv, summary.csv, model.dump and manifest.json to the
/// output directory, plus rank/tradeoff tables when enabled.
ExperimentResult run_experiment(const ExperimentConfig &config);

std::size_t worker_count_from_env(std::size_t jobs);

/// Shortest round-trip decimal form.
std::string format_real(double x);

std::string rounds_csv(const DecomposableModel &model, const std::vector<RoundRecord> &records);

struct CompareReport {
  enum class Status { kIdentical, kDifferent, kNonComparable };
  Status status = Status::kIdentical;
  std::vector<std::string> lines;
};

std::string to_string(CompareReport::Status status);

/// Diff of two output directories' manifests and summaries.
CompareReport compare_runs(const std::string &dir_a, const std::string &dir_b);

/// Tree decomposition of the config's action subgraph as JSON.
nlohmann::ordered_json decomposition_dump(const ExperimentConfig &config);

}  // namespace gbandit
