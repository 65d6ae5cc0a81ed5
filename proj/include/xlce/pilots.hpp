// SPDX-License-Identifier: Apache-2.0
//
// Pilot allocation construction: grouped frequency-division patterns with
// cyclic-shift code multiplexing inside each group, plus the baseline
// schemes (full-band CDM, per-user FDM, random-phase superposition, and the
// multi-symbol orthogonal reference).

#pragma once

#include <string>

#include "xlce/transforms.hpp"
#include "xlce/types.hpp"

namespace xlce {

enum class PilotScheme {
  kGroupedCdm,     // frequency groups + cyclic codes inside each group
  kFullBandCdm,    // single group spanning all subcarriers (G = 1 degeneracy)
  kPerUserFdm,     // one user per group, periodic combs (G = K degeneracy)
  kRandomPhase,    // all users superimposed on all subcarriers, random codes
  kOrthogonalMultiSymbol,  // <= 8 users per extra OFDM symbol, interference-free
};

std::string scheme_name(PilotScheme s);
PilotScheme scheme_from_name(const std::string& name);

struct PilotGroup {
  std::vector<int> users;        // member user indexes, ascending
  std::vector<int> subcarriers;  // rows with b[n,g] = 1, ascending
  std::vector<double> shifts;    // artificial delay tap per member
  int symbol = 0;                // OFDM symbol carrying this group
};

struct PilotAllocation {
  PilotScheme scheme = PilotScheme::kGroupedCdm;
  int n_subcarriers = 0;
  int n_symbols = 1;
  double pilot_power = 0.0;          // ||u_k||^2, identical for every user
  IMat selection;                    // N x G binary group-selection matrix
  std::vector<PilotGroup> groups;
  std::vector<CVec> codes;           // per user, length N (zero off-group)
  std::vector<CVec> u;               // per user, length N, ||u||^2 = PTr
  std::vector<int> group_of_user;

  void validate() const;  // enforces the construction invariants, throws
};

struct SensingMatrix {
  CMat a;                 // B x L, diag(u restricted to rows) * F_P
  int group = 0;
  std::vector<int> rows;  // subcarrier indexes backing the B dimension
};

// Partition users into G groups maximizing summed intra-group pairwise
// distance (far-apart users share a group). Greedy max-weight matching for
// pair groups; deterministic, ties to the lowest user index.
std::vector<std::vector<int>> group_users(const std::vector<Eigen::Vector3d>& positions,
                                          int n_groups);

// Cyclic shift code, entry n = exp(-j 2 pi tau n / N) for n = 0..N-1.
CVec cyclic_shift_code(int n, double tau);

// Periodic comb selection matrix: group g takes {n : n mod G = g}.
IMat periodic_selection(int n, int g);

// Default grouped-CDM selection: group g owns runs of |K_g| adjacent
// subcarriers repeating every sum-of-group-sizes subcarriers. A length-R run
// nulls the selection DFT at every multiple of N/R, which is exactly the
// intra-group shift spacing, so the cyclic-shift codes stay orthogonal after
// frequency division. Degenerates to the whole band for one group and to
// periodic_selection for singleton groups.
IMat run_interleaved_selection(int n, const std::vector<std::vector<int>>& groups);

// Run-interleaved selection thinned to floor(ratio * Q) evenly chosen runs
// per group. Runs are dropped whole so the code-orthogonality nulls survive;
// ratio = 1 recovers run_interleaved_selection.
IMat thinned_selection(int n, const std::vector<std::vector<int>>& groups,
                       double ratio);

// Assembles u_k = b_g (.) code_k scaled to ||u_k||^2 = PTr. `selection` is
// ignored for the random-phase and multi-symbol schemes, which own their
// allocation shape. `rng` is consumed only by the random-phase scheme.
PilotAllocation assemble_pilots(PilotScheme scheme, const IMat& selection,
                                const std::vector<std::vector<int>>& groups,
                                const SystemConfig& sys, Rng& rng);

// A_k = diag(u_k restricted to the group rows) F_P, one per user.
std::vector<SensingMatrix> build_sensing_matrices(const PilotAllocation& alloc,
                                                  const DftOperators& ops);

// JSON round-trip for reuse by the optimizer and the harness.
std::string allocation_to_json(const PilotAllocation& alloc);
PilotAllocation allocation_from_json(const std::string& text);

}  // namespace xlce
