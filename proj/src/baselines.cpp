// SPDX-License-Identifier: Apache-2.0

#include "xlce/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

namespace xlce {

namespace {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Module A over every group with the supplied priors; returns posterior
// means as per-user L x M grids.
std::vector<CMat> run_module_a(const std::vector<CMat>& y, const PilotAllocation& alloc,
                               const DftOperators& ops, const SystemConfig& sys,
                               const std::vector<const PGrid*>& genie_var) {
  const int n_ant = sys.antennas();
  const int n_taps = sys.n_taps;
  const double lambda0 = static_cast<double>(sys.n_subcarriers) / n_taps;
  const std::vector<SensingMatrix> mats = build_sensing_matrices(alloc, ops);

  std::vector<CMat> y_beam;
  for (const CMat& ys : y) y_beam.push_back(beam_transform(ops, ys));

  std::vector<CMat> x_hat(sys.n_users, CMat::Zero(n_taps, n_ant));
  GaussianMessage flat;
  flat.mean = CVec::Zero(n_taps);
  flat.variance = lambda0;

  for (std::size_t g = 0; g < alloc.groups.size(); ++g) {
    const auto& grp = alloc.groups[g];
    CMat yg(grp.subcarriers.size(), n_ant);
    for (std::size_t r = 0; r < grp.subcarriers.size(); ++r)
      yg.row(static_cast<Eigen::Index>(r)) =
          y_beam.at(grp.symbol).row(grp.subcarriers[r]);

    std::vector<std::vector<GaussianMessage>> priors(
        grp.users.size(), std::vector<GaussianMessage>(n_ant, flat));
    std::vector<const SensingMatrix*> group_mats(grp.users.size());
    std::vector<const PGrid*> group_var;
    for (std::size_t i = 0; i < grp.users.size(); ++i) {
      group_mats[i] = &mats[grp.users[i]];
      if (!genie_var.empty()) group_var.push_back(genie_var[grp.users[i]]);
    }
    std::vector<std::vector<GaussianMessage>> posteriors;
    module_a_lmmse(priors, yg, group_mats, sys.noise_var(), group_var, posteriors);
    for (std::size_t i = 0; i < grp.users.size(); ++i)
      for (int m = 0; m < n_ant; ++m)
        x_hat[grp.users[i]].col(m) = posteriors[i][m].mean;
  }
  return x_hat;
}

std::vector<CMat> to_frequency(const DftOperators& ops, const std::vector<CMat>& x) {
  std::vector<CMat> h;
  h.reserve(x.size());
  for (const CMat& xk : x) h.push_back(cir_to_frequency(ops, xk));
  return h;
}

}  // namespace

std::vector<CMat> lmmse_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                                 const DftOperators& ops, const SystemConfig& sys) {
  return to_frequency(ops, run_module_a(y, alloc, ops, sys, {}));
}

std::vector<CMat> lmmse_genie_estimate(const std::vector<CMat>& y,
                                       const PilotAllocation& alloc,
                                       const DftOperators& ops, const SystemConfig& sys,
                                       const std::vector<CMat>& x_true) {
  std::vector<PGrid> power(x_true.size());
  std::vector<const PGrid*> ptrs(x_true.size());
  for (std::size_t k = 0; k < x_true.size(); ++k) {
    power[k] = x_true[k].cwiseAbs2().array();
    ptrs[k] = &power[k];
  }
  return to_frequency(ops, run_module_a(y, alloc, ops, sys, ptrs));
}

EstimatorResult vamp_bg_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                                 const DftOperators& ops, const SystemConfig& sys,
                                 const BaselineConfig& cfg,
                                 const std::vector<CMat>* truth) {
  const int k_users = sys.n_users;
  const int n_ant = sys.antennas();
  const int n_taps = sys.n_taps;
  const int n_groups = static_cast<int>(alloc.groups.size());
  const double lambda0 = static_cast<double>(sys.n_subcarriers) / n_taps;
  const double ext_floor = 1e-8 * sys.n_subcarriers / n_taps;
  const double noise_var = sys.noise_var();
  const std::vector<SensingMatrix> mats = build_sensing_matrices(alloc, ops);

  std::vector<CMat> y_beam;
  for (const CMat& ys : y) y_beam.push_back(beam_transform(ops, ys));
  std::vector<CMat> y_group(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    const auto& grp = alloc.groups[g];
    y_group[g].resize(grp.subcarriers.size(), n_ant);
    for (std::size_t r = 0; r < grp.subcarriers.size(); ++r)
      y_group[g].row(static_cast<Eigen::Index>(r)) =
          y_beam.at(grp.symbol).row(grp.subcarriers[r]);
  }

  RVec rate = RVec::Constant(k_users, cfg.bg_rate_init);
  RVec slab = RVec::Constant(k_users, cfg.bg_var_init);

  EstimatorResult result;
  GaussianMessage init;
  init.mean = CVec::Zero(n_taps);
  init.variance = lambda0;
  std::vector<std::vector<GaussianMessage>> a_pri(
      k_users, std::vector<GaussianMessage>(n_ant, init));
  std::vector<std::vector<GaussianMessage>> b_pri = a_pri, b_pos = a_pri;
  std::vector<CMat> x_prev(k_users, CMat::Zero(n_taps, n_ant));

  for (int iter = 1; iter <= cfg.i_max; ++iter) {
    IterationStats stats;
    int flags = 0;

    for (int g = 0; g < n_groups; ++g) {
      const auto& users = alloc.groups[g].users;
      std::vector<std::vector<GaussianMessage>> priors(users.size());
      std::vector<const SensingMatrix*> group_mats(users.size());
      for (std::size_t i = 0; i < users.size(); ++i) {
        priors[i] = a_pri[users[i]];
        group_mats[i] = &mats[users[i]];
      }
      std::vector<std::vector<GaussianMessage>> posteriors;
      module_a_lmmse(priors, y_group[g], group_mats, noise_var, {}, posteriors);
      for (std::size_t i = 0; i < users.size(); ++i)
        for (int m = 0; m < n_ant; ++m)
          b_pri[users[i]][m] =
              extrinsic(posteriors[i][m], a_pri[users[i]][m], ext_floor, &flags);
    }

    // Unstructured Bernoulli-Gaussian denoiser, elementwise per user.
    for (int k = 0; k < k_users; ++k) {
      double post_sum = 0.0, moment_sum = 0.0;
      const double v = slab(k);
      const double rate_logit = logit(std::clamp(rate(k), kMrfEps, 1.0 - kMrfEps));
      for (int m = 0; m < n_ant; ++m) {
        const double g0 = b_pri[k][m].variance;
        b_pos[k][m].mean.resize(n_taps);
        double var_acc = 0.0;
        for (int l = 0; l < n_taps; ++l) {
          const double mu2 = std::norm(b_pri[k][m].mean(l));
          const double ev =
              -(std::log((g0 + v) / g0) - mu2 * v / (g0 * (g0 + v)));
          const double p = std::clamp(sigmoid(rate_logit + ev), kMrfEps,
                                      1.0 - kMrfEps);
          const cplx r_hat = b_pri[k][m].mean(l) * (v / (v + g0));
          const double c_hat = g0 * v / (v + g0);
          b_pos[k][m].mean(l) = p * r_hat;
          var_acc += p * (c_hat + std::norm(r_hat)) - p * p * std::norm(r_hat);
          post_sum += p;
          moment_sum += p * (std::norm(r_hat) + c_hat);
        }
        b_pos[k][m].variance = std::max(var_acc / n_taps, 1e-12);
      }
      if (cfg.em_enabled && iter < cfg.i_max) {
        rate(k) = std::clamp(post_sum / (n_taps * n_ant), 0.0, 1.0);
        if (post_sum > 1e-12) slab(k) = std::max(moment_sum / post_sum, 1e-12);
      }
    }

    for (int k = 0; k < k_users; ++k)
      for (int m = 0; m < n_ant; ++m)
        a_pri[k][m] = extrinsic(b_pos[k][m], b_pri[k][m], ext_floor, &flags);

    double change_num = 0.0, change_den = 0.0;
    std::vector<CMat> x_hat(k_users, CMat(n_taps, n_ant));
    for (int k = 0; k < k_users; ++k) {
      for (int m = 0; m < n_ant; ++m) x_hat[k].col(m) = b_pos[k][m].mean;
      change_num += (x_hat[k] - x_prev[k]).squaredNorm();
      change_den += x_prev[k].squaredNorm();
    }
    stats.mean_change = std::sqrt(change_num / std::max(change_den, 1e-30));
    x_prev = x_hat;

    std::vector<CMat> h_hat(k_users);
    for (int k = 0; k < k_users; ++k) h_hat[k] = cir_to_frequency(ops, x_hat[k]);
    std::vector<CMat> resid = y;
    for (int k = 0; k < k_users; ++k) {
      const int sym = alloc.groups[alloc.group_of_user[k]].symbol;
      resid[sym].noalias() -= alloc.u[k].asDiagonal() * h_hat[k];
    }
    for (const CMat& r : resid) stats.residual += r.norm();
    if (truth) stats.nmse = nmse(h_hat, *truth);
    stats.clamp_flags = flags;
    result.diag.total_clamp_flags += flags;
    result.diag.iterations.push_back(stats);
    if (result.diag.iterations_to_converge == 0 &&
        stats.mean_change < 1e-6)
      result.diag.iterations_to_converge = iter;

    if (iter == cfg.i_max) {
      result.x_hat = std::move(x_hat);
      result.h_hat = std::move(h_hat);
    }
  }
  return result;
}

std::vector<CMat> omp_estimate(const std::vector<CMat>& y, const PilotAllocation& alloc,
                               const DftOperators& ops, const SystemConfig& sys,
                               const BaselineConfig& cfg) {
  const int n_ant = sys.antennas();
  const int n_taps = sys.n_taps;
  const double sigma_z = std::sqrt(sys.noise_var());
  const std::vector<SensingMatrix> mats = build_sensing_matrices(alloc, ops);

  std::vector<CMat> y_beam;
  for (const CMat& ys : y) y_beam.push_back(beam_transform(ops, ys));

  std::vector<CMat> x_hat(sys.n_users, CMat::Zero(n_taps, n_ant));

  for (std::size_t g = 0; g < alloc.groups.size(); ++g) {
    const auto& grp = alloc.groups[g];
    const int b_dim = static_cast<int>(grp.subcarriers.size());
    const int n_cols = n_taps * static_cast<int>(grp.users.size());
    const int budget =
        std::min(n_cols, cfg.omp_budget > 0 ? cfg.omp_budget : b_dim / 2);
    const double threshold =
        cfg.omp_threshold_scale * std::sqrt(static_cast<double>(b_dim)) * sigma_z;

    CMat dict(b_dim, n_cols);
    for (std::size_t i = 0; i < grp.users.size(); ++i)
      dict.middleCols(static_cast<Eigen::Index>(i) * n_taps, n_taps) =
          mats[grp.users[i]].a;
    const RVec col_norm = dict.colwise().norm();

    for (int m = 0; m < n_ant; ++m) {
      CVec y_m(b_dim);
      for (int r = 0; r < b_dim; ++r)
        y_m(r) = y_beam.at(grp.symbol)(grp.subcarriers[r], m);

      std::vector<int> support;
      std::vector<char> used(n_cols, 0);
      CVec resid = y_m;
      CVec coef;
      while (static_cast<int>(support.size()) < budget &&
             resid.norm() > threshold) {
        int best = -1;
        double best_corr = 0.0;
        for (int c = 0; c < n_cols; ++c) {
          if (used[c] || col_norm(c) < 1e-12) continue;
          const double corr = std::abs(dict.col(c).dot(resid)) / col_norm(c);
          if (corr > best_corr) { best_corr = corr; best = c; }
        }
        if (best < 0) break;
        used[best] = 1;
        support.push_back(best);
        CMat sub(b_dim, support.size());
        for (std::size_t i = 0; i < support.size(); ++i)
          sub.col(static_cast<Eigen::Index>(i)) = dict.col(support[i]);
        coef = sub.colPivHouseholderQr().solve(y_m);
        resid = y_m - sub * coef;
      }
      for (std::size_t i = 0; i < support.size(); ++i) {
        const int user = grp.users[support[i] / n_taps];
        const int tap = support[i] % n_taps;
        x_hat[user](tap, m) = coef(static_cast<Eigen::Index>(i));
      }
    }
  }
  return to_frequency(ops, x_hat);
}

}  // namespace xlce
