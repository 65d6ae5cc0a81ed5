// SPDX-License-Identifier: Apache-2.0
//
// Pilot-pattern optimization: minimize the initialized-LMMSE MSE (trace
// objective with inter-group interference) over a continuous relaxation of
// the group-selection matrix, by projected Adam on C with b = C.^2.

#pragma once

#include "xlce/pilots.hpp"
#include "xlce/transforms.hpp"
#include "xlce/types.hpp"

namespace xlce {

struct OptimizerConfig {
  // lambda_0; 0 lets optimize_pattern default it to N / L. The standalone
  // objective/gradient entry points require a resolved positive value.
  double prior_var = 0.0;
  double noise_var = 0.01;
  double learning_rate = 0.1;
  int steps = 300;
  double beta1 = 0.9;       // Adam moment decays
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double round_threshold = 0.25;  // assign n to argmax_g C^2 when max >= this
  double reg = 1e-10;       // ridge inside every inverse
};

struct OptimizeTrace {
  std::vector<double> objective;  // relaxed objective per step
  bool converged = true;
  double final_objective = 0.0;
  double rounded_objective = 0.0;
};

// The per-group code-stacked delay dictionary F_P,g = [diag(code_1) F_D, ...]
// (N x L*|K_g|), fixed while the pattern varies.
std::vector<CMat> build_group_dictionaries(const std::vector<PilotGroup>& groups,
                                           const DftOperators& ops);

// sum_g Tr[(lambda0^-1 I + A_g^H Sigma_g^-1 A_g)^-1] with
// A_g(b) = sqrt(PTr / 1^T b) diag(b) F_P,g and
// Sigma_g = sigma_z^2 I_N + lambda0 sum_{g' != g} A_g' A_g'^H.
// `b` columns are the relaxed per-group selections (entries in [0,1]).
double mse_objective(const RMat& b, const std::vector<CMat>& dicts, double pilot_power,
                     const OptimizerConfig& cfg);

// Analytic gradient of mse_objective w.r.t. the relaxation variable C
// (b = C.^2, chain rule included). Verified against central differences.
RMat objective_gradient(const RMat& c, const std::vector<CMat>& dicts,
                        double pilot_power, const OptimizerConfig& cfg);

// Feasibility projection: clip to [0,1], then rescale rows whose sum exceeds 1.
void project_pattern(RMat& c);

// Adam loop + rounding (argmax with threshold, then repair every group to at
// least L subcarriers). Returns the binary N x G selection.
IMat optimize_pattern(const RMat& c_init, const std::vector<PilotGroup>& groups,
                      const DftOperators& ops, double pilot_power,
                      const OptimizerConfig& cfg, OptimizeTrace* trace = nullptr);

// Uniform interior init C[n,g] = 1/(G+1).
RMat uniform_relaxed_init(int n, int g);

}  // namespace xlce
