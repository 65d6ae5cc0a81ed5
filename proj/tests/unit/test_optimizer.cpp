// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "xlce/optimizer.hpp"
#include "xlce/pilots.hpp"

using namespace xlce;

namespace {

struct Setup {
  SystemConfig sys;
  DftOperators ops;
  PilotAllocation alloc;
  std::vector<CMat> dicts;
};

Setup make_setup(int n, int l, int k, int g) {
  SystemConfig sys;
  sys.n_subcarriers = n;
  sys.n_taps = l;
  sys.n_subarrays = 2;
  sys.subarray_size = 2;
  sys.n_users = k;
  sys.n_groups = g;
  DftOperators ops = DftOperators::make(sys);
  std::vector<std::vector<int>> groups(g);
  for (int i = 0; i < k; ++i) groups[i % g].push_back(i);
  Rng rng(1);
  PilotAllocation alloc = assemble_pilots(
      PilotScheme::kGroupedCdm, periodic_selection(n, g), groups, sys, rng);
  std::vector<CMat> dicts = build_group_dictionaries(alloc.groups, ops);
  return {sys, std::move(ops), std::move(alloc), std::move(dicts)};
}

RMat random_relaxed(int n, int g, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.6);
  RMat c(n, g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j) c(i, j) = u(rng);
  return c;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("group dictionaries stack the coded delay columns") {
  const Setup s = make_setup(16, 4, 4, 2);
  REQUIRE(s.dicts.size() == 2);
  for (std::size_t g = 0; g < 2; ++g) {
    const auto& grp = s.alloc.groups[g];
    REQUIRE(s.dicts[g].rows() == 16);
    REQUIRE(s.dicts[g].cols() == 4 * static_cast<int>(grp.users.size()));
    // First member block: code-modulated delay columns.
    const CVec code = cyclic_shift_code(16, grp.shifts[0]);
    for (int l = 0; l < 4; ++l)
      for (int n = 0; n < 16; ++n)
        CHECK(std::abs(s.dicts[g](n, l) - code(n) * s.ops.f_delay(n, l)) < 1e-12);
  }
}

TEST_CASE("objective requires a resolved prior variance") {
  const Setup s = make_setup(16, 4, 4, 2);
  OptimizerConfig cfg;  // prior_var left at 0
  const RMat b = RMat::Constant(16, 2, 0.5);
  CHECK_THROWS_AS(mse_objective(b, s.dicts, s.alloc.pilot_power, cfg),
                  std::invalid_argument);
}

TEST_CASE("analytic gradient matches central differences") {
  const Setup s = make_setup(16, 4, 4, 2);
  OptimizerConfig cfg;
  cfg.prior_var = 16.0 / 4.0;
  cfg.noise_var = 0.05;
  Rng rng(2);
  const RMat c = random_relaxed(16, 2, rng);
  const RMat grad = objective_gradient(c, s.dicts, s.alloc.pilot_power, cfg);

  const double h = 1e-6;
  double max_rel = 0.0;
  for (int n = 0; n < 16; ++n)
    for (int g = 0; g < 2; ++g) {
      RMat cp = c, cm = c;
      cp(n, g) += h;
      cm(n, g) -= h;
      const double fd = (mse_objective(cp.array().square().matrix(), s.dicts,
                                       s.alloc.pilot_power, cfg) -
                         mse_objective(cm.array().square().matrix(), s.dicts,
                                       s.alloc.pilot_power, cfg)) /
                        (2.0 * h);
      const double denom = std::max(std::abs(fd), 1e-12);
      max_rel = std::max(max_rel, std::abs(grad(n, g) - fd) / denom);
    }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("projection clips and rescales the row mass") {
  RMat c(2, 3);
  c << 1.4, -0.2, 0.6, 0.9, 0.9, 0.9;
  project_pattern(c);
  CHECK(c.minCoeff() >= 0.0);
  CHECK(c.maxCoeff() <= 1.0);
  for (int n = 0; n < 2; ++n) {
    double mass = 0.0;
    for (int g = 0; g < 3; ++g) mass += c(n, g) * c(n, g);
    CHECK(mass <= 1.0 + 1e-12);
  }
}

TEST_CASE("uniform init sits strictly inside the feasible set") {
  const RMat c = uniform_relaxed_init(8, 3);
  CHECK((c.array() == 1.0 / 4.0).all());
  double mass = 0.0;
  for (int g = 0; g < 3; ++g) mass += c(0, g) * c(0, g);
  CHECK(mass < 1.0);
}

TEST_CASE("optimized pattern is feasible and lowers the objective") {
  const Setup s = make_setup(32, 4, 4, 2);
  OptimizerConfig cfg;
  cfg.noise_var = 0.05;
  cfg.steps = 120;
  OptimizeTrace trace;
  const IMat sel =
      optimize_pattern(uniform_relaxed_init(32, 2), s.alloc.groups, s.ops,
                       s.alloc.pilot_power, cfg, &trace);

  REQUIRE(sel.rows() == 32);
  REQUIRE(sel.cols() == 2);
  for (int n = 0; n < 32; ++n) {
    int sum = 0;
    for (int g = 0; g < 2; ++g) {
      CHECK((sel(n, g) == 0 || sel(n, g) == 1));
      sum += sel(n, g);
    }
    CHECK(sum <= 1);
  }
  int counts[2] = {0, 0};
  for (int g = 0; g < 2; ++g)
    for (int n = 0; n < 32; ++n) counts[g] += sel(n, g);
  CHECK(counts[0] >= s.sys.n_taps);  // repair guarantees identifiability
  CHECK(counts[1] >= s.sys.n_taps);
  // Identical groups must come out balanced, not collapsed by tie ordering.
  CHECK(std::abs(counts[0] - counts[1]) <= 1);
  REQUIRE(static_cast<int>(trace.objective.size()) == cfg.steps);
  CHECK(trace.final_objective < trace.objective.front());
  CHECK(std::isfinite(trace.rounded_objective));
  // The returned pattern must beat the naive periodic comb, whose spacing
  // aliases the intra-group cyclic shifts.
  OptimizerConfig ocfg = cfg;
  ocfg.prior_var = 32.0 / 4.0;
  const std::vector<CMat> dicts = build_group_dictionaries(s.alloc.groups, s.ops);
  const double periodic_obj =
      mse_objective(periodic_selection(32, 2).cast<double>(), dicts,
                    s.alloc.pilot_power, ocfg);
  CHECK(trace.rounded_objective <= periodic_obj);
}

TEST_CASE("rounded reassembly feeds back into pilot construction") {
  const Setup s = make_setup(32, 4, 4, 2);
  OptimizerConfig cfg;
  cfg.noise_var = 0.05;
  cfg.steps = 60;
  const IMat sel =
      optimize_pattern(uniform_relaxed_init(32, 2), s.alloc.groups, s.ops,
                       s.alloc.pilot_power, cfg);
  std::vector<std::vector<int>> groups(2);
  for (int i = 0; i < 4; ++i) groups[i % 2].push_back(i);
  Rng rng(3);
  const auto optimized =
      assemble_pilots(PilotScheme::kGroupedCdm, sel, groups, s.sys, rng);
  optimized.validate();
}

}  // TEST_SUITE
