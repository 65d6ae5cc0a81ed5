// SPDX-License-Identifier: Apache-2.0
//
// 2-D Ising belief propagation over the (tap, sub-array) support grid.
//
// Model: p(S) prop exp(w1 * sum_<ij> s_i s_j - (w2/2) * sum_i s_i) * prod_i ev_i(s_i)
// with s in {-1,+1} and per-cell evidence ev_i(+1) = pi_in. Four directional
// message planes are swept sequentially in raster order; outputs are
// extrinsic (the cell's own evidence is excluded).

#pragma once

#include "xlce/types.hpp"

namespace xlce {

struct MrfParams {
  double w1 = 0.4;  // edge correlation, kept >= 0
  double w2 = 0.4;  // local sparsity bias
};

enum class SweepDir { kLeft, kRight, kUp, kDown };

// Probability clamp applied to every stored message.
inline constexpr double kMrfEps = 1e-12;

struct MrfState {
  PGrid pi_in;                       // L x Mbar evidence, p(s=+1)
  PGrid lam_l, lam_r, lam_t, lam_b;  // directional messages arriving per cell

  static MrfState init(const PGrid& pi_in);
  int rows() const { return static_cast<int>(pi_in.rows()); }
  int cols() const { return static_cast<int>(pi_in.cols()); }
};

// One directional pass; messages are recomputed sequentially so information
// crosses the whole grid within a single sweep.
void sweep(MrfState& state, const MrfParams& params, SweepDir dir);

// Extrinsic output per cell: local bias and the four incoming messages, own
// evidence excluded.
PGrid mrf_output(const MrfState& state, const MrfParams& params);

// Full run: init messages at 0.5, then per iteration one rightward, leftward,
// upward and downward pass (in that order), then output.
PGrid run_mrf(const PGrid& pi_in, const MrfParams& params, int i_mrf);

// Same as run_mrf but returns the swept state for leave-one-out outputs.
MrfState run_mrf_state(const PGrid& pi_in, const MrfParams& params, int i_mrf);

// Leave-one-out output of a shared field: the combined evidence `pi_in_all`
// entered the sweeps, user k's own contribution `pi_in_user` is divided out.
PGrid common_output(const MrfState& state, const MrfParams& params,
                    const PGrid& pi_in_user);

// Normalized product of Bernoulli messages: p*q / (p*q + (1-p)*(1-q)).
PGrid combine_beliefs(const PGrid& p, const PGrid& q);
double combine_beliefs(double p, double q);

}  // namespace xlce
