// SPDX-License-Identifier: Apache-2.0
//
// Common scalar/tensor aliases, system configuration and RNG plumbing shared
// by every module of the library.

#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace xlce {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IMat = Eigen::MatrixXi;
// Support masks and probability grids over the (tap, sub-array) plane are
// stored L x Mbar, taps down the rows.
using BGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using PGrid = Eigen::ArrayXXd;

// One seedable generator handle; all randomness flows through references to
// this type so a (seed -> output) run is fully replayable.
using Rng = std::mt19937_64;

// Derives an independent child seed for a Monte Carlo cell. splitmix64 mixing
// keeps nearby (master, cell) pairs statistically unrelated.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell);

struct SystemConfig {
  int n_subcarriers = 128;  // N
  int n_taps = 16;          // L, cyclic-prefix length in taps
  int n_subarrays = 16;     // Mbar
  int subarray_size = 4;    // Mtilde, antennas per sub-array
  int n_users = 8;          // K
  int n_groups = 4;         // G
  double snr_db = 20.0;
  double pilot_power = 0.0;  // PTr; 0 means "default to N" (unit power per subcarrier)

  int antennas() const { return n_subarrays * subarray_size; }
  double effective_pilot_power() const {
    return pilot_power > 0.0 ? pilot_power : static_cast<double>(n_subcarriers);
  }
  // sigma_z^2 from the per-user SNR definition SNR = PTr / (N sigma_z^2).
  double noise_var() const {
    return effective_pilot_power() / n_subcarriers / std::pow(10.0, snr_db / 10.0);
  }
  void validate() const;  // throws std::invalid_argument
};

}  // namespace xlce
