// SPDX-License-Identifier: Apache-2.0
//
// Reference estimators: one-shot LMMSE (flat and genie priors), the
// unstructured Bernoulli-Gaussian turbo loop, and per-antenna OMP.

#pragma once

#include "xlce/estimator.hpp"

namespace xlce {

struct BaselineConfig {
  // VAMP-BG loop
  int i_max = 30;
  double bg_rate_init = 0.1;
  double bg_var_init = 1.0;
  bool em_enabled = true;
  // OMP
  int omp_budget = 0;            // 0 = default cap B/2
  double omp_threshold_scale = 1.2;  // residual threshold scale on sqrt(B)*sigma_z
};

// One-shot Module A with mu = 0, gamma = N/L. Shares the Module A code path
// with the turbo loop (bitwise equal to its first iteration).
std::vector<CMat> lmmse_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                                 const DftOperators& ops, const SystemConfig& sys);

// One-shot Module A with the true per-(tap, antenna) power as prior variance.
std::vector<CMat> lmmse_genie_estimate(const std::vector<CMat>& y,
                                       const PilotAllocation& alloc,
                                       const DftOperators& ops, const SystemConfig& sys,
                                       const std::vector<CMat>& x_true);

// Turbo loop with an i.i.d. Bernoulli-Gaussian denoiser: scalar learned rate
// and slab variance per user, no MRFs, no sub-array aggregation.
EstimatorResult vamp_bg_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                                 const DftOperators& ops, const SystemConfig& sys,
                                 const BaselineConfig& cfg,
                                 const std::vector<CMat>* truth = nullptr);

// Greedy support selection + least-squares refit per (group, antenna) on the
// stacked per-group dictionary.
std::vector<CMat> omp_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                               const DftOperators& ops, const SystemConfig& sys,
                               const BaselineConfig& cfg);

}  // namespace xlce
