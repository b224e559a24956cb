#pragma once

// On-disk formats: binary (theta, lower, upper) checkpoints, the long-format
// training history, certification and soundness reports.

#include "agt/attacks.hpp"
#include "agt/certify.hpp"
#include "agt/trainer.hpp"

#include <string>
#include <vector>

namespace agt {

/// Binary checkpoint: "AGTC", u32 version, u32 loss kind, u32 layer count,
/// u32 widths[layers + 1], then per layer W nominal/lo/hi (row-major) and
/// b nominal/lo/hi as little-endian doubles. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamBox& box);
ParamBox load_checkpoint(const std::string& path);

/// Long-format CSV: step,metric,value with metrics lr, nominal_loss, mean_width, max_width.
void write_history_csv(const std::string& path, const std::vector<StepRecord>& history);
std::vector<StepRecord> read_history_csv(const std::string& path);

struct CertificationSummary {
  std::size_t points = 0;
  bool classification = true;
  double nominal_accuracy = 0.0;     // classification only
  double certified_accuracy = 0.0;   // classification only
  double mean_loss_lo = 0.0;
  double mean_loss_hi = 0.0;
  double nominal_loss = 0.0;
  double backdoor_radius = 0.0;
};

CertificationSummary summarize(const std::vector<Certificate>& certs, double nominal_loss, double backdoor_radius);

/// One row per point: index, nominal_pred, label, reachable_mask, logit bounds, loss bounds, verdict.
void write_certification_csv(const std::string& path, const std::vector<Certificate>& certs);
void write_certification_json(const std::string& path, const CertificationSummary& s);
CertificationSummary read_certification_json(const std::string& path);

void write_soundness_json(const std::string& path, const SoundnessReport& r);
SoundnessReport read_soundness_json(const std::string& path);

}  // namespace agt
