// SPDX-License-Identifier: Apache-2.0
//
// Delay-frequency and antenna-beam transform operators.
//
// Conventions (fixed across the whole library):
//   F_D[n,l] = exp(-j 2 pi n l / N), unnormalized; the inverse absorbs 1/N.
//   F_A = blockdiag of Mbar copies of the Mtilde-point unitary DFT
//         (1/sqrt(Mtilde) scaling), so F_A F_A^H = I.
// The sparse-domain tensor X (delay taps x beams) maps to the frequency-
// antenna response via H = F_D X F_A.

#pragma once

#include "xlce/types.hpp"

namespace xlce {

struct DftOperators {
  CMat f_delay;  // N x L
  CMat f_array;  // M x M, block-diagonal, unitary
  int n_subcarriers = 0;
  int n_taps = 0;
  int n_subarrays = 0;
  int subarray_size = 0;

  static DftOperators make(const SystemConfig& cfg);
  static DftOperators make(int n, int l, int mbar, int mtilde);
};

// Rows of F_D selected by subcarrier index (the F_P of a pilot group).
CMat partial_dft_rows(const DftOperators& ops, const std::vector<int>& rows);

// H = F_D X F_A  (X is L x M, H is N x M).
CMat cir_to_frequency(const DftOperators& ops, const CMat& x);

// Exact inverse of cir_to_frequency: X = (1/N) F_D^H H F_A^H.
CMat frequency_to_cir(const DftOperators& ops, const CMat& h);

// Y F_A^H; column m feeds the per-antenna LMMSE of Module A.
CMat beam_transform(const DftOperators& ops, const CMat& y);

// ||est - truth||_F^2 / ||truth||_F^2.
double nmse(const CMat& est, const CMat& truth);

// Multi-user aggregate: sum_k ||est_k - truth_k||^2 / sum_k ||truth_k||^2.
double nmse(const std::vector<CMat>& est, const std::vector<CMat>& truth);

}  // namespace xlce
