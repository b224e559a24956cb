#pragma once

// Experiment configuration (JSON) and end-to-end runs that write every
// artifact under one output directory.
//
// Output root: $AGT_OUTPUT_ROOT, default ./results. A config's output_dir is
// resolved against it unless absolute.

#include "agt/attacks.hpp"
#include "agt/checkpoint.hpp"
#include "agt/data.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace agt {

struct DatasetSpec {
  std::string kind = "halfmoons";  // halfmoons | csv | idx
  // halfmoons
  int n = 1000;
  double noise = 0.1;
  // csv
  std::filesystem::path path;
  std::vector<std::string> label_columns;
  bool normalize = true;
  std::optional<std::size_t> row_limit;
  // idx
  std::filesystem::path images, labels;
  std::optional<std::size_t> limit;  // first rows only
  std::optional<int> pca;            // project to this many components
  // common
  double test_fraction = 0.2;
  std::vector<int> poisonable_classes;  // empty: every sample is poisonable
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  std::vector<int> hidden;
  LossKind loss = LossKind::CrossEntropy;
  AgtConfig agt;
  Adversary adversary = BoundedAdversary{};
  double backdoor_radius = 0.0;
  std::vector<int> safe_classes;
  std::vector<AttackSpec> attacks;
  SoundnessOptions soundness;  // loss_probe is filled in at run time
  std::filesystem::path output_dir;

  /// Cross-field checks: budgets vs batch size, loss vs label type.
  void validate() const;
};

/// Parses the JSON text; relative data paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

std::filesystem::path output_root();
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Loads and splits the configured dataset.
std::pair<Dataset, Dataset> prepare_data(const ExperimentConfig& cfg);
DenseReluNetwork initial_network(const ExperimentConfig& cfg, const Dataset& train);

struct ExperimentResult {
  std::filesystem::path out_dir;
  AgtResult training;
  CertificationSummary certification;
  std::optional<SoundnessReport> soundness;
  int exit_code = 0;  // 0 iff no soundness violation
};

/// Trains, certifies the test split and, when attacks are configured, runs the soundness harness.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
/// Soundness harness only.
ExperimentResult run_attacks(const ExperimentConfig& cfg);
/// Certifies a dataset CSV against a checkpoint and writes the reports to out_dir.
CertificationSummary certify_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                                        const std::filesystem::path& out_dir, double backdoor_radius = 0.0,
                                        const std::vector<int>& safe = {}, BoundMode mode = BoundMode::Tightest);

}  // namespace agt
