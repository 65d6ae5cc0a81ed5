// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "xlce/channel.hpp"
#include "xlce/estimator.hpp"

using namespace xlce;

namespace {

CMat random_cmat(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = cplx(nd(rng), nd(rng));
  return m;
}

// Scene whose delay span fits a 4-tap cyclic prefix.
SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.cluster_delay_spread = 1.0;
  return cfg;
}

GaussianMessage msg(const CVec& mean, double var) {
  GaussianMessage g;
  g.mean = mean;
  g.variance = var;
  return g;
}

SensingMatrix make_mat(const CMat& a) {
  SensingMatrix sm;
  sm.a = a;
  sm.rows.resize(a.rows());
  return sm;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("extrinsic precision subtraction") {
  CVec mp(2), mq(2);
  mp << cplx(0.4, 0.0), cplx(0.0, 0.2);
  mq << cplx(0.1, 0.0), cplx(0.0, 0.0);
  int flags = 0;
  const GaussianMessage out =
      extrinsic(msg(mp, 0.5), msg(mq, 1.0), 1e-6, &flags);
  CHECK(out.variance == doctest::Approx(1.0));
  CHECK((out.mean - (2.0 * mp - mq)).norm() < 1e-12);
  CHECK(flags == 0);
}

TEST_CASE("extrinsic guards the degenerate variances") {
  const CVec m = CVec::Ones(2);
  int flags = 0;
  SUBCASE("equal variances floor the result") {
    const GaussianMessage out = extrinsic(msg(m, 0.7), msg(m, 0.7), 1e-3, &flags);
    CHECK(out.variance == doctest::Approx(1e-3));
    CHECK(flags == 1);
    CHECK(out.mean.allFinite());
  }
  SUBCASE("posterior wider than prior flips the sign") {
    const GaussianMessage out = extrinsic(msg(m, 2.0), msg(m, 1.0), 1e-3, &flags);
    CHECK(out.variance == doctest::Approx(2.0));  // |1/(1/2 - 1/1)|
    CHECK(flags == 1);
  }
  SUBCASE("uninformative prior passes the posterior through") {
    const GaussianMessage out = extrinsic(msg(m, 0.5), msg(CVec::Zero(2), 1e30), 1e-6, &flags);
    CHECK(out.variance == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((out.mean - m).norm() < 1e-9);
    CHECK(flags == 0);
  }
}

TEST_CASE("module a ignores a zero sensing matrix") {
  Rng rng(2);
  const int b = 4, l = 2, m = 3;
  std::vector<std::vector<GaussianMessage>> priors(1), post;
  for (int i = 0; i < m; ++i)
    priors[0].push_back(msg(random_cmat(l, 1, rng).col(0), 0.8));
  const SensingMatrix sm = make_mat(CMat::Zero(b, l));
  module_a_lmmse(priors, random_cmat(b, m, rng), {&sm}, 0.1, {}, post);
  for (int i = 0; i < m; ++i) {
    CHECK((post[0][i].mean - priors[0][i].mean).norm() < 1e-12);
    CHECK(post[0][i].variance == doctest::Approx(0.8));
  }
}

TEST_CASE("module a equals the direct joint lmmse") {
  Rng rng(3);
  const int b = 6, l = 3, m = 2;
  const double noise = 0.05, g1 = 0.7, g2 = 1.3;
  const CMat a1 = random_cmat(b, l, rng), a2 = random_cmat(b, l, rng);
  const SensingMatrix s1 = make_mat(a1), s2 = make_mat(a2);
  std::vector<std::vector<GaussianMessage>> priors(2), post;
  for (int i = 0; i < m; ++i) {
    priors[0].push_back(msg(random_cmat(l, 1, rng).col(0), g1));
    priors[1].push_back(msg(random_cmat(l, 1, rng).col(0), g2));
  }
  const CMat y = random_cmat(b, m, rng);
  module_a_lmmse(priors, y, {&s1, &s2}, noise, {}, post);

  const CMat sigma = g1 * a1 * a1.adjoint() + g2 * a2 * a2.adjoint() +
                     noise * CMat::Identity(b, b);
  const CMat sigma_inv = sigma.inverse();
  for (int i = 0; i < m; ++i) {
    const CVec resid = y.col(i) - a1 * priors[0][i].mean - a2 * priors[1][i].mean;
    const CVec want1 = priors[0][i].mean + g1 * a1.adjoint() * (sigma_inv * resid);
    CHECK((post[0][i].mean - want1).norm() < 1e-9);
    const double trace1 = (a1.adjoint() * sigma_inv * a1).trace().real();
    CHECK(post[0][i].variance ==
          doctest::Approx(g1 - g1 * g1 / l * trace1).epsilon(1e-9));
  }
}

TEST_CASE("module a per tap prior matches the diagonal prior formula") {
  Rng rng(4);
  const int b = 6, l = 3;
  const double noise = 0.08;
  const CMat a = random_cmat(b, l, rng);
  const SensingMatrix sm = make_mat(a);
  PGrid d(l, 1);
  d << 2.0, 0.25, 1.0;
  std::vector<std::vector<GaussianMessage>> priors(1), post;
  priors[0].push_back(msg(CVec::Zero(l), 1.0));  // scalar var unused on this path
  const CMat y = random_cmat(b, 1, rng);
  module_a_lmmse(priors, y, {&sm}, noise, {&d}, post);

  const CMat dm = d.col(0).matrix().asDiagonal();
  const CMat sigma = a * dm * a.adjoint() + noise * CMat::Identity(b, b);
  const CVec want = dm * a.adjoint() * sigma.inverse() * y.col(0);
  CHECK((post[0][0].mean - want).norm() < 1e-9);
  const CMat g = a.adjoint() * sigma.inverse() * a;
  double var = 0.0;
  for (int i = 0; i < l; ++i)
    var += d(i, 0) - d(i, 0) * d(i, 0) * g(i, i).real();
  CHECK(post[0][0].variance == doctest::Approx(var / l).epsilon(1e-9));
}

TEST_CASE("module b reduces to the scalar spike slab posterior") {
  // Single user, single-antenna sub-arrays, all field couplings off: each
  // element is an independent Bernoulli-Gaussian denoise problem.
  SystemConfig sys;
  sys.n_subcarriers = 8;
  sys.n_taps = 3;
  sys.n_subarrays = 2;
  sys.subarray_size = 1;
  sys.n_users = 1;
  sys.n_groups = 1;
  const double rho = 0.3, slab = 1.5, gamma = 0.8;

  HyperParams hyper;
  hyper.eta = RVec::Constant(1, 4.0 * rho);
  hyper.sigma2.assign(1, PGrid::Constant(3, 2, slab));
  hyper.w_user.assign(1, MrfParams{0.0, 0.0});
  hyper.w_common = MrfParams{0.0, 0.0};

  Rng rng(5);
  std::vector<std::vector<GaussianMessage>> pri(1), post;
  for (int m = 0; m < 2; ++m)
    pri[0].push_back(msg(random_cmat(3, 1, rng).col(0), gamma));

  EstimatorConfig cfg;
  ModuleBState state;
  SupportBeliefs beliefs;
  module_b_denoise(pri, hyper, sys, cfg, state, post, beliefs);

  for (int m = 0; m < 2; ++m)
    for (int l = 0; l < 3; ++l) {
      const cplx r = pri[0][m].mean(l);
      const double ev = -(std::log((gamma + slab) / gamma) -
                          std::norm(r) * slab / (gamma * (gamma + slab)));
      const double pi =
          1.0 / (1.0 + std::exp(-(std::log(rho / (1.0 - rho)) + ev)));
      const cplx rhat = r * slab / (slab + gamma);
      CHECK(std::abs(post[0][m].mean(l) - pi * rhat) < 1e-9);
      CHECK(beliefs.posterior[0](l, m) == doctest::Approx(pi).epsilon(1e-9));
    }
}

TEST_CASE("em keeps the learned quantities inside their ranges") {
  SystemConfig sys;
  sys.n_subcarriers = 16;
  sys.n_taps = 4;
  sys.n_subarrays = 3;
  sys.subarray_size = 2;
  sys.n_users = 2;
  sys.n_groups = 1;
  HyperParams hyper = HyperParams::defaults(2, 4, 3);
  Rng rng(6);
  std::vector<std::vector<GaussianMessage>> pri(2), post;
  for (int k = 0; k < 2; ++k)
    for (int m = 0; m < 6; ++m)
      pri[k].push_back(msg(random_cmat(4, 1, rng).col(0), 0.5));
  EstimatorConfig cfg;
  ModuleBState state;
  SupportBeliefs beliefs;
  module_b_denoise(pri, hyper, sys, cfg, state, post, beliefs);
  for (int iter = 0; iter < 4; ++iter) {
    em_update(beliefs, pri, sys, cfg, iter, hyper);
    for (int k = 0; k < 2; ++k) {
      CHECK(hyper.eta(k) >= 0.0);
      CHECK(hyper.eta(k) <= 1.0);
      CHECK(hyper.sigma2[k].minCoeff() >= cfg.variance_floor);
      CHECK(hyper.w_user[k].w1 >= 0.0);
      CHECK(std::isfinite(hyper.w_user[k].w2));
    }
  }
}

TEST_CASE("full loop runs and reports diagnostics") {
  SystemConfig sys;
  sys.n_subcarriers = 32;
  sys.n_taps = 4;
  sys.n_subarrays = 4;
  sys.subarray_size = 2;
  sys.n_users = 2;
  sys.n_groups = 2;
  sys.snr_db = 15.0;
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(7);
  const ChannelRealization ch = realize_channels(small_scene(), sys, ops, rng);
  Rng prng(8);
  const auto groups = group_users(
      generate_scene(small_scene(), sys, rng).user_positions, sys.n_groups);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm,
                      run_interleaved_selection(sys.n_subcarriers, groups), groups,
                      sys, prng);
  std::vector<CMat> y = {CMat::Zero(sys.n_subcarriers, sys.antennas())};
  for (int k = 0; k < sys.n_users; ++k)
    y[0] += alloc.u[k].asDiagonal() * ch.h[k];
  std::normal_distribution<double> nd(0.0, std::sqrt(sys.noise_var() / 2.0));
  for (int c = 0; c < y[0].cols(); ++c)
    for (int r = 0; r < y[0].rows(); ++r) y[0](r, c) += cplx(nd(rng), nd(rng));

  EstimatorConfig cfg;
  cfg.i_max = 8;
  const auto hyper = HyperParams::defaults(sys.n_users, sys.n_taps, sys.n_subarrays);
  const EstimatorResult res = run_turbo_mrf(y, alloc, ops, sys, cfg, hyper, &ch.h);

  REQUIRE(static_cast<int>(res.h_hat.size()) == sys.n_users);
  CHECK(res.h_hat[0].rows() == sys.n_subcarriers);
  CHECK(res.h_hat[0].cols() == sys.antennas());
  REQUIRE(static_cast<int>(res.diag.iterations.size()) == cfg.i_max);
  for (const auto& it : res.diag.iterations) {
    CHECK(std::isfinite(it.residual));
    CHECK(it.nmse >= 0.0);
  }
  // The iterative estimate must beat the all-zero estimate by a wide margin.
  CHECK(res.diag.iterations.back().nmse < 0.5);
  // Frequency and tap domain estimates stay consistent.
  for (int k = 0; k < sys.n_users; ++k)
    CHECK((cir_to_frequency(ops, res.x_hat[k]) - res.h_hat[k]).norm() <
          1e-8 * res.h_hat[k].norm());
}

TEST_CASE("channel reconstruction improves over the first iteration") {
  SystemConfig sys;
  sys.n_subcarriers = 32;
  sys.n_taps = 4;
  sys.n_subarrays = 4;
  sys.subarray_size = 2;
  sys.n_users = 2;
  sys.n_groups = 2;
  sys.snr_db = 20.0;
  const DftOperators ops = DftOperators::make(sys);
  Rng rng(17);
  const ChannelRealization ch = realize_channels(small_scene(), sys, ops, rng);
  Rng prng(18);
  const auto groups = group_users(
      generate_scene(small_scene(), sys, rng).user_positions, sys.n_groups);
  const auto alloc =
      assemble_pilots(PilotScheme::kGroupedCdm,
                      run_interleaved_selection(sys.n_subcarriers, groups), groups,
                      sys, prng);
  std::vector<CMat> y = {CMat::Zero(sys.n_subcarriers, sys.antennas())};
  for (int k = 0; k < sys.n_users; ++k)
    y[0] += alloc.u[k].asDiagonal() * ch.h[k];
  std::normal_distribution<double> nd(0.0, std::sqrt(sys.noise_var() / 2.0));
  for (int c = 0; c < y[0].cols(); ++c)
    for (int r = 0; r < y[0].rows(); ++r) y[0](r, c) += cplx(nd(rng), nd(rng));

  EstimatorConfig cfg;
  cfg.i_max = 10;
  const auto hyper = HyperParams::defaults(sys.n_users, sys.n_taps, sys.n_subarrays);
  const EstimatorResult res = run_turbo_mrf(y, alloc, ops, sys, cfg, hyper, &ch.h);
  CHECK(res.diag.iterations.back().nmse <= res.diag.iterations.front().nmse);
}

}  // TEST_SUITE
