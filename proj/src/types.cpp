// SPDX-License-Identifier: Apache-2.0

#include "xlce/types.hpp"

#include <cmath>

namespace xlce {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell) {
  // splitmix64 finalizer over the combined state; avalanche keeps per-cell
  // streams independent even for adjacent cells.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (cell + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (n_subcarriers <= 0) fail("n_subcarriers must be positive");
  if (n_taps <= 0 || n_taps > n_subcarriers) fail("n_taps must be in [1, n_subcarriers]");
  if (n_subarrays <= 0) fail("n_subarrays must be positive");
  if (subarray_size <= 0) fail("subarray_size must be positive");
  if (n_users <= 0) fail("n_users must be positive");
  if (n_groups <= 0 || n_groups > n_users) fail("n_groups must be in [1, n_users]");
  if (pilot_power < 0) fail("pilot_power must be >= 0");
  if (!std::isfinite(snr_db)) fail("snr_db must be finite");
}

}  // namespace xlce
