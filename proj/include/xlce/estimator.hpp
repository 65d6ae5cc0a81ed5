// SPDX-License-Identifier: Apache-2.0
//
// Turbo message-passing channel estimator: group-wise per-antenna LMMSE
// (Module A) exchanging extrinsic Gaussian messages with a structured
// spike-and-slab denoiser (Module B) whose support prior couples an
// individual and a common 2-D MRF per user, plus EM hyperparameter learning.

#pragma once

#include "xlce/mrf.hpp"
#include "xlce/pilots.hpp"
#include "xlce/transforms.hpp"
#include "xlce/types.hpp"

namespace xlce {

struct GaussianMessage {
  CVec mean;             // length L
  double variance = 1.0; // shared across taps, > 0
};

struct HyperParams {
  RVec eta;                 // K, sparsity rate per user
  std::vector<PGrid> sigma2;  // per user, L x Mbar slab variance
  std::vector<MrfParams> w_user;  // per user
  MrfParams w_common;

  static HyperParams defaults(int n_users, int n_taps, int n_subarrays);
};

struct SupportBeliefs {
  // Antenna-resolved planes are L x M, sub-array planes are L x Mbar.
  std::vector<PGrid> pi1_in;    // per user, L x M   (Eq. 36 family)
  std::vector<PGrid> pi1_out;   // per user, L x Mbar (aggregated)
  std::vector<PGrid> pi_in_s;   // per user, L x Mbar, into individual MRF
  std::vector<PGrid> pi_out_s;  // per user, L x Mbar, out of individual MRF
  std::vector<PGrid> pi_in_sc;  // per user, L x Mbar, toward common MRF
  std::vector<PGrid> pi_out_sc; // per user, L x Mbar, leave-one-out common out
  PGrid pi_in_sc_all;           // L x Mbar, normalized product over users
  std::vector<PGrid> pi2_in;    // per user, L x Mbar, forward support prob
  std::vector<PGrid> pi2_out;   // per user, L x M, leave-one-out over antennas
  std::vector<PGrid> posterior; // per user, L x M, p(x != 0 | everything)
};

struct EstimatorConfig {
  int i_max = 30;
  int i_mrf = 4;
  double damping = 1.0;        // 1 = off; convex weight on the new message
  int em_w_period = 3;         // MRF weights updated every em_w_period-th iteration
  double variance_floor = 1e-8;
  bool em_enabled = true;
  double em_w_step_scale = 0.1;  // gradient step = scale / (L * Mbar)
  double init_prior_variance = 0.0;  // 0 means "default to N / L"
  double conv_tol = 1e-6;      // relative-change plateau for diagnostics
};

struct IterationStats {
  double nmse = -1.0;      // vs truth when supplied, else -1
  double residual = 0.0;   // ||Y - sum_k diag(u_k) H_k|| per symbol, summed
  double mean_change = 0.0;  // relative change of the Module B mean estimate
  int clamp_flags = 0;     // extrinsic-variance guard activations
};

struct EstimatorDiagnostics {
  std::vector<IterationStats> iterations;
  int iterations_to_converge = 0;  // first iteration with change < conv_tol
  int total_clamp_flags = 0;
};

struct EstimatorResult {
  std::vector<CMat> h_hat;  // per user, N x M
  std::vector<CMat> x_hat;  // per user, L x M
  EstimatorDiagnostics diag;
  HyperParams hyper;        // final learned values
};

// --- Module-level operations (exposed for tests and for the baselines) ---

// Extrinsic Gaussian message: precision difference, mean decorrelation.
// Non-positive or non-finite variance is clamped to
// max(floor, |value|) (or floor when infinite), counted via *flags.
GaussianMessage extrinsic(const GaussianMessage& post, const GaussianMessage& pri,
                          double floor, int* flags);

// Per-(group, antenna) LMMSE with per-user Gaussian priors. `prior_var_taps`
// (empty, or one L x M grid per user) switches to a per-tap diagonal prior
// (the genie path) instead of the messages' scalar variance. Emitted variance
// is the tap-averaged posterior trace. When every prior variance is
// antenna-independent the B x B inverse is computed once and reused.
void module_a_lmmse(const std::vector<std::vector<GaussianMessage>>& priors,  // [K_g][M]
                    const CMat& y_beam,                                       // B x M
                    const std::vector<const SensingMatrix*>& mats,            // K_g
                    double noise_var,
                    const std::vector<const PGrid*>& prior_var_taps,
                    std::vector<std::vector<GaussianMessage>>& posteriors);

// Module B: structured spike-slab denoise of the extrinsic Gaussian field.
// `state` carries the common-MRF feedback between turbo iterations.
struct ModuleBState {
  std::vector<PGrid> pi_out_sc_prev;  // per user, init 0.5
};
void module_b_denoise(const std::vector<std::vector<GaussianMessage>>& pri,  // [K][M]
                      const HyperParams& hyper, const SystemConfig& sys,
                      const EstimatorConfig& cfg, ModuleBState& state,
                      std::vector<std::vector<GaussianMessage>>& post,
                      SupportBeliefs& beliefs);

// EM refresh of eta, sigma2 and (every em_w_period-th call) the MRF weights.
void em_update(const SupportBeliefs& beliefs,
               const std::vector<std::vector<GaussianMessage>>& b_pri,
               const SystemConfig& sys, const EstimatorConfig& cfg, int iter,
               HyperParams& hyper);

// Full loop. `y` holds one received N x M matrix per OFDM pilot symbol.
// `truth` (optional) enables per-iteration NMSE diagnostics.
EstimatorResult run_turbo_mrf(const std::vector<CMat>& y, const PilotAllocation& alloc,
                              const DftOperators& ops, const SystemConfig& sys,
                              const EstimatorConfig& cfg, const HyperParams& hyper_init,
                              const std::vector<CMat>* truth = nullptr);

}  // namespace xlce
