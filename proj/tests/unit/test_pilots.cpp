// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "xlce/pilots.hpp"

using namespace xlce;

namespace {

SystemConfig pilot_system(int n, int l, int k, int g) {
  SystemConfig sys;
  sys.n_subcarriers = n;
  sys.n_taps = l;
  sys.n_subarrays = 4;
  sys.subarray_size = 2;
  sys.n_users = k;
  sys.n_groups = g;
  return sys;
}

std::vector<std::vector<int>> round_robin_groups(int k, int g) {
  std::vector<std::vector<int>> groups(g);
  for (int i = 0; i < k; ++i) groups[i % g].push_back(i);
  return groups;
}

}  // namespace

TEST_SUITE("pilots") {

TEST_CASE("scheme names round trip") {
  for (const auto* name : {"nfdcdm", "ocdm", "srfdm", "nocdm", "nr-orthogonal"})
    CHECK(scheme_name(scheme_from_name(name)) != "");
  CHECK(scheme_from_name("nfdcdm-optimized") == PilotScheme::kGroupedCdm);
  CHECK_THROWS(scheme_from_name("bogus"));
}

TEST_CASE("periodic selection is a disjoint complete comb") {
  const IMat sel = periodic_selection(16, 4);
  REQUIRE(sel.rows() == 16);
  REQUIRE(sel.cols() == 4);
  for (int n = 0; n < 16; ++n) {
    int sum = 0;
    for (int g = 0; g < 4; ++g) sum += sel(n, g);
    CHECK(sum == 1);
    CHECK(sel(n, n % 4) == 1);
  }
}

TEST_CASE("run interleaved selection degenerates to band and comb") {
  // One group: the whole band. Singleton groups: the periodic comb.
  const std::vector<std::vector<int>> one = {{0, 1, 2, 3}};
  CHECK((run_interleaved_selection(16, one) - IMat::Ones(16, 1)).norm() == 0);
  const std::vector<std::vector<int>> singles = {{0}, {1}, {2}, {3}};
  CHECK((run_interleaved_selection(16, singles) - periodic_selection(16, 4)).norm() == 0);
  // Pair groups: runs of two adjacent subcarriers repeating every four.
  const std::vector<std::vector<int>> pairs = {{0, 1}, {2, 3}};
  const IMat sel = run_interleaved_selection(16, pairs);
  for (int n = 0; n < 16; ++n) {
    CHECK(sel(n, 0) + sel(n, 1) == 1);
    CHECK(sel(n, (n % 4) / 2) == 1);
  }
}

TEST_CASE("run interleaved selection keeps intra group codes orthogonal") {
  // Runs of |K_g| adjacent subcarriers null the selection DFT at the shift
  // spacing N/|K_g|, so shifted codes within a group stay orthogonal.
  const SystemConfig sys = pilot_system(32, 4, 4, 2);
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(1);
  const auto groups = round_robin_groups(4, 2);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm,
                      run_interleaved_selection(32, groups), groups, sys, rng);
  const auto mats = build_sensing_matrices(alloc, ops);
  for (const auto& grp : alloc.groups) {
    REQUIRE(grp.users.size() == 2);
    const CMat cross = mats[grp.users[0]].a.adjoint() * mats[grp.users[1]].a;
    CHECK(cross.norm() < 1e-9 * mats[grp.users[0]].a.norm() *
                             mats[grp.users[1]].a.norm());
  }
}

TEST_CASE("thinned selection keeps the requested fraction of runs") {
  const std::vector<std::vector<int>> singles = {{0}, {1}, {2}, {3}};
  CHECK((thinned_selection(16, singles, 1.0) - periodic_selection(16, 4)).norm() == 0);
  const IMat half = thinned_selection(32, singles, 0.5);
  for (int g = 0; g < 4; ++g) {
    int count = 0;
    for (int n = 0; n < 32; ++n) {
      if (half(n, g) != 0) {
        ++count;
        CHECK(n % 4 == g);  // thinned rows stay on the parent comb
      }
    }
    CHECK(count == 4);  // floor(0.5 * 8) of the 8 runs
  }
  // Pair groups are thinned run by run, never splitting a run.
  const std::vector<std::vector<int>> pairs = {{0, 1}, {2, 3}};
  const IMat thin = thinned_selection(32, pairs, 0.5);
  for (int g = 0; g < 2; ++g) {
    int count = 0;
    for (int n = 0; n < 32; n += 2) {
      CHECK(thin(n, g) == thin(n + 1, g));  // runs stay atomic
      count += thin(n, g) + thin(n + 1, g);
    }
    CHECK(count == 8);  // floor(0.5 * 8) runs of length 2
  }
}

TEST_CASE("cyclic shift code is a unit modulus phase ramp") {
  const CVec c = cyclic_shift_code(8, 2.0);
  for (int n = 0; n < 8; ++n) {
    CHECK(std::abs(c(n)) == doctest::Approx(1.0));
    const cplx expected = std::exp(cplx(0.0, -2.0 * 3.14159265358979323846 * 2.0 * n / 8.0));
    CHECK(std::abs(c(n) - expected) < 1e-12);
  }
  CHECK((cyclic_shift_code(8, 0.0) - CVec::Ones(8)).norm() == 0.0);
}

TEST_CASE("grouped assembly meets the power and membership invariants") {
  const SystemConfig sys = pilot_system(32, 4, 6, 3);
  Rng rng(1);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm, periodic_selection(32, 3),
                      round_robin_groups(6, 3), sys, rng);
  alloc.validate();
  for (int k = 0; k < 6; ++k) {
    CHECK(alloc.u[k].squaredNorm() == doctest::Approx(sys.effective_pilot_power()));
    const int g = alloc.group_of_user[k];
    for (int n = 0; n < 32; ++n) {
      const bool on = alloc.selection(n, g) != 0;
      if (!on) CHECK(std::abs(alloc.u[k](n)) == 0.0);
    }
  }
}

TEST_CASE("intra pair codes are orthogonal on the full grid") {
  // Two users sharing all subcarriers with shifts {0, N/2}: the stacked
  // sensing matrix has orthogonal blocks as long as L <= N/2.
  const SystemConfig sys = pilot_system(16, 4, 2, 1);
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(1);
  const auto alloc = assemble_pilots(PilotScheme::kFullBandCdm, IMat(), {}, sys, rng);
  const auto mats = build_sensing_matrices(alloc, ops);
  REQUIRE(mats.size() == 2);
  const CMat cross = mats[0].a.adjoint() * mats[1].a;
  CHECK(cross.norm() < 1e-9 * mats[0].a.norm() * mats[1].a.norm());
}

TEST_CASE("sensing matrix rows are pilot scaled dft rows") {
  const SystemConfig sys = pilot_system(16, 4, 4, 2);
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(1);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm, periodic_selection(16, 2),
                      round_robin_groups(4, 2), sys, rng);
  const auto mats = build_sensing_matrices(alloc, ops);
  for (int k = 0; k < 4; ++k) {
    const auto& sm = mats[k];
    for (std::size_t r = 0; r < sm.rows.size(); ++r)
      CHECK((sm.a.row(r) -
             alloc.u[k](sm.rows[r]) * ops.f_delay.row(sm.rows[r]))
                .norm() < 1e-12);
  }
}

TEST_CASE("random phase scheme loads every subcarrier for every user") {
  const SystemConfig sys = pilot_system(16, 4, 3, 1);
  Rng rng(2);
  const auto alloc = assemble_pilots(PilotScheme::kRandomPhase, IMat(), {}, sys, rng);
  alloc.validate();
  for (int k = 0; k < 3; ++k)
    for (int n = 0; n < 16; ++n) CHECK(std::abs(alloc.u[k](n)) > 0.0);
}

TEST_CASE("multi symbol scheme isolates every user") {
  SystemConfig sys = pilot_system(64, 4, 10, 1);
  Rng rng(2);
  const auto alloc =
      assemble_pilots(PilotScheme::kOrthogonalMultiSymbol, IMat(), {}, sys, rng);
  alloc.validate();
  CHECK(alloc.n_symbols == 2);  // ceil(10 / 8)
  // Inside one symbol, the per-user subcarrier sets are disjoint.
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) {
      const auto& gi = alloc.groups[alloc.group_of_user[i]];
      const auto& gj = alloc.groups[alloc.group_of_user[j]];
      if (gi.symbol != gj.symbol) continue;
      for (int n : gi.subcarriers)
        CHECK(std::abs(alloc.u[j](n)) == 0.0);
    }
}

TEST_CASE("far apart users end up in the same group") {
  // Two tight clusters of four users each: grouping into 4 pair-groups must
  // always pair one user from each cluster (never two neighbors).
  std::vector<Eigen::Vector3d> pos;
  for (int i = 0; i < 4; ++i) pos.emplace_back(20.0 + 0.3 * i, 10.0, 1.5);
  for (int i = 0; i < 4; ++i) pos.emplace_back(-20.0 - 0.3 * i, -18.0, 1.5);
  const auto groups = group_users(pos, 4);
  REQUIRE(groups.size() == 4);
  for (const auto& g : groups) {
    REQUIRE(g.size() == 2);
    const bool a_left = g[0] < 4, b_left = g[1] < 4;
    CHECK(a_left != b_left);
  }
}

TEST_CASE("allocation json round trips") {
  const SystemConfig sys = pilot_system(32, 4, 4, 2);
  Rng rng(1);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm, periodic_selection(32, 2),
                      round_robin_groups(4, 2), sys, rng);
  const auto copy = allocation_from_json(allocation_to_json(alloc));
  copy.validate();
  CHECK(copy.n_subcarriers == alloc.n_subcarriers);
  CHECK((copy.selection - alloc.selection).norm() == 0);
  for (int k = 0; k < 4; ++k) CHECK((copy.u[k] - alloc.u[k]).norm() < 1e-12);
}

}  // TEST_SUITE
