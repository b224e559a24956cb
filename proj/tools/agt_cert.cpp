// agt-cert: train with certified poisoning bounds, certify checkpoints, run attack harnesses.

#include "agt/experiment.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace {

void print_certification(const agt::CertificationSummary& s) {
  std::printf("points              %zu\n", s.points);
  if (s.classification) {
    std::printf("nominal accuracy    %.4f\n", s.nominal_accuracy);
    std::printf("certified accuracy  %.4f\n", s.certified_accuracy);
  }
  std::printf("nominal loss        %.6g\n", s.nominal_loss);
  std::printf("mean loss bounds    [%.6g, %.6g]\n", s.mean_loss_lo, s.mean_loss_hi);
}

void print_soundness(const agt::SoundnessReport& r) {
  double worst = std::numeric_limits<double>::infinity();
  for (double m : r.step_min_margin) worst = std::min(worst, m);
  std::printf("attacked runs       %d\n", r.trials);
  std::printf("violations          %d\n", r.violations);
  std::printf("loss violations     %d\n", r.loss_violations);
  std::printf("min margin          %.3g\n", worst);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abstract gradient training with certified poisoning bounds.\n"
               "Artifacts go to $AGT_OUTPUT_ROOT (default ./results)/<output_dir>."};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "train, certify the test split, and run configured attacks");
  run->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* attack = app.add_subcommand("attack", "run only the attack soundness harness");
  attack->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string checkpoint, dataset, out_dir, mode = "tightest";
  double radius = 0.0;
  std::vector<int> safe;
  auto* cert = app.add_subcommand("certify", "certify a dataset CSV against a checkpoint");
  cert->add_option("checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  cert->add_option("dataset", dataset, "dataset CSV (as written by run: test_set.csv)")
      ->required()
      ->check(CLI::ExistingFile);
  cert->add_option("--out", out_dir, "output directory (default $AGT_OUTPUT_ROOT/certify)");
  cert->add_option("--backdoor-radius", radius, "l-infinity trigger radius")->check(CLI::NonNegativeNumber);
  cert->add_option("--safe", safe, "safe classes for the backdoor verdict (default: true label)");
  cert->add_option("--bound-mode", mode, "ibp | crown | tightest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto r = agt::run_experiment(agt::load_config(config));
      std::printf("output              %s\n", r.out_dir.string().c_str());
      print_certification(r.certification);
      if (r.soundness) print_soundness(*r.soundness);
      return r.exit_code;
    }
    if (attack->parsed()) {
      const auto r = agt::run_attacks(agt::load_config(config));
      std::printf("output              %s\n", r.out_dir.string().c_str());
      print_soundness(*r.soundness);
      return r.exit_code;
    }
    const std::filesystem::path dir = out_dir.empty() ? agt::output_root() / "certify" : std::filesystem::path(out_dir);
    const auto s = agt::certify_checkpoint(checkpoint, dataset, dir, radius, safe, agt::bound_mode_from_string(mode));
    std::printf("output              %s\n", dir.string().c_str());
    print_certification(s);
    return 0;
  } catch (const agt::InvalidInput& e) {
    std::cerr << "error: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const agt::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
