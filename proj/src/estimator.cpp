// SPDX-License-Identifier: Apache-2.0

#include "xlce/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace xlce {

namespace {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) {
  return std::clamp(p, kMrfEps, 1.0 - kMrfEps);
}

}  // namespace

HyperParams HyperParams::defaults(int n_users, int n_taps, int n_subarrays) {
  HyperParams h;
  h.eta = RVec::Constant(n_users, 0.1);
  h.sigma2.assign(n_users, PGrid::Constant(n_taps, n_subarrays, 1.0));
  h.w_user.assign(n_users, MrfParams{});
  h.w_common = MrfParams{};
  return h;
}

GaussianMessage extrinsic(const GaussianMessage& post, const GaussianMessage& pri,
                          double floor, int* flags) {
  GaussianMessage out;
  const double d = 1.0 / post.variance - 1.0 / pri.variance;
  const double v = 1.0 / d;
  if (!std::isfinite(v)) {
    out.variance = floor;
    if (flags) ++*flags;
  } else if (v <= 0.0) {
    out.variance = std::max(floor, std::abs(v));
    if (flags) ++*flags;
  } else {
    out.variance = v;
  }
  out.mean = out.variance *
             (post.mean / post.variance - pri.mean / pri.variance);
  return out;
}

void module_a_lmmse(const std::vector<std::vector<GaussianMessage>>& priors,
                    const CMat& y_beam,
                    const std::vector<const SensingMatrix*>& mats,
                    double noise_var,
                    const std::vector<const PGrid*>& prior_var_taps,
                    std::vector<std::vector<GaussianMessage>>& posteriors) {
  const int n_group_users = static_cast<int>(priors.size());
  const int n_ant = static_cast<int>(y_beam.cols());
  const int b_dim = static_cast<int>(y_beam.rows());
  const int n_taps = n_group_users > 0 ? static_cast<int>(mats[0]->a.cols()) : 0;
  const bool per_tap = !prior_var_taps.empty();

  posteriors.assign(n_group_users, std::vector<GaussianMessage>(n_ant));

  bool uniform = !per_tap;
  if (uniform) {
    for (int i = 0; i < n_group_users && uniform; ++i) {
      double lo = priors[i][0].variance, hi = lo;
      for (int m = 1; m < n_ant; ++m) {
        lo = std::min(lo, priors[i][m].variance);
        hi = std::max(hi, priors[i][m].variance);
      }
      if (hi - lo > 1e-12 * std::max(1.0, hi)) uniform = false;
    }
  }

  if (uniform) {
    // Prior variances are antenna-independent: one B x B inverse serves
    // every antenna of the group.
    CMat s = noise_var * CMat::Identity(b_dim, b_dim);
    for (int i = 0; i < n_group_users; ++i)
      s.noalias() += priors[i][0].variance * (mats[i]->a * mats[i]->a.adjoint());
    const Eigen::LLT<CMat> llt(s);
    std::vector<double> trace_term(n_group_users);
    for (int i = 0; i < n_group_users; ++i) {
      const CMat w = llt.solve(mats[i]->a);
      trace_term[i] = (mats[i]->a.adjoint() * w).trace().real();
    }
    CVec m_vec(b_dim), w(b_dim);
    for (int m = 0; m < n_ant; ++m) {
      m_vec = y_beam.col(m);
      for (int i = 0; i < n_group_users; ++i)
        m_vec.noalias() -= mats[i]->a * priors[i][m].mean;
      w = llt.solve(m_vec);
      for (int i = 0; i < n_group_users; ++i) {
        const double g = priors[i][m].variance;
        posteriors[i][m].mean = g * (mats[i]->a.adjoint() * w) + priors[i][m].mean;
        posteriors[i][m].variance =
            std::max(g - g * g / n_taps * trace_term[i], 1e-15);
      }
    }
    return;
  }

  CMat s(b_dim, b_dim);
  CVec m_vec(b_dim), w(b_dim);
  for (int m = 0; m < n_ant; ++m) {
    s = noise_var * CMat::Identity(b_dim, b_dim);
    for (int i = 0; i < n_group_users; ++i) {
      if (per_tap) {
        const RVec d = prior_var_taps[i]->col(m).matrix();
        s.noalias() += mats[i]->a * d.asDiagonal() * mats[i]->a.adjoint();
      } else {
        s.noalias() += priors[i][m].variance * (mats[i]->a * mats[i]->a.adjoint());
      }
    }
    const Eigen::LLT<CMat> llt(s);
    m_vec = y_beam.col(m);
    for (int i = 0; i < n_group_users; ++i)
      m_vec.noalias() -= mats[i]->a * priors[i][m].mean;
    w = llt.solve(m_vec);
    for (int i = 0; i < n_group_users; ++i) {
      const CVec proj = mats[i]->a.adjoint() * w;
      if (per_tap) {
        const RVec d = prior_var_taps[i]->col(m).matrix();
        posteriors[i][m].mean =
            d.asDiagonal() * proj + priors[i][m].mean;
        const CMat g = mats[i]->a.adjoint() * llt.solve(mats[i]->a);
        double acc = 0.0;
        for (int l = 0; l < n_taps; ++l)
          acc += d(l) - d(l) * d(l) * g(l, l).real();
        posteriors[i][m].variance = std::max(acc / n_taps, 1e-15);
      } else {
        const double g0 = priors[i][m].variance;
        posteriors[i][m].mean = g0 * proj + priors[i][m].mean;
        const double trace_term =
            (mats[i]->a.adjoint() * llt.solve(mats[i]->a)).trace().real();
        posteriors[i][m].variance =
            std::max(g0 - g0 * g0 / n_taps * trace_term, 1e-15);
      }
    }
  }
}

void module_b_denoise(const std::vector<std::vector<GaussianMessage>>& pri,
                      const HyperParams& hyper, const SystemConfig& sys,
                      const EstimatorConfig& cfg, ModuleBState& state,
                      std::vector<std::vector<GaussianMessage>>& post,
                      SupportBeliefs& beliefs) {
  const int k_users = static_cast<int>(pri.size());
  const int n_ant = static_cast<int>(pri[0].size());
  const int n_taps = static_cast<int>(pri[0][0].mean.size());
  const int mt = sys.subarray_size;
  const int mb = n_ant / mt;

  if (static_cast<int>(state.pi_out_sc_prev.size()) != k_users)
    state.pi_out_sc_prev.assign(k_users, PGrid::Constant(n_taps, mb, 0.5));

  auto resize = [&](std::vector<PGrid>& v) { v.resize(k_users); };
  resize(beliefs.pi1_in);
  resize(beliefs.pi1_out);
  resize(beliefs.pi_in_s);
  resize(beliefs.pi_out_s);
  resize(beliefs.pi_in_sc);
  resize(beliefs.pi_out_sc);
  resize(beliefs.pi2_in);
  resize(beliefs.pi2_out);
  resize(beliefs.posterior);
  post.assign(k_users, std::vector<GaussianMessage>(n_ant));

  // Per-element support log-odds from the spike/slab likelihood ratio.
  std::vector<PGrid> ev(k_users), ev_sum(k_users);
  for (int k = 0; k < k_users; ++k) {
    ev[k].resize(n_taps, n_ant);
    ev_sum[k] = PGrid::Zero(n_taps, mb);
    for (int m = 0; m < n_ant; ++m) {
      const double g = pri[k][m].variance;
      const int sub = m / mt;
      for (int l = 0; l < n_taps; ++l) {
        const double s2 = hyper.sigma2[k](l, sub);
        const double mu2 = std::norm(pri[k][m].mean(l));
        const double log_ratio =
            std::log((g + s2) / g) - mu2 * s2 / (g * (g + s2));
        ev[k](l, m) = -log_ratio;
        ev_sum[k](l, sub) += ev[k](l, m);
      }
    }
    beliefs.pi1_in[k] = ev[k].unaryExpr([](double t) { return clamp_prob(sigmoid(t)); });
    beliefs.pi1_out[k] =
        ev_sum[k].unaryExpr([](double t) { return clamp_prob(sigmoid(t)); });
  }

  // Individual support chain, with the common-field feedback of the previous
  // turbo iteration gating each user's evidence.
  auto support_input = [](const PGrid& a, const PGrid& c, double eta) {
    const PGrid x = (1.0 - c * eta) * (1.0 - a) + c * a * eta;
    return (x / (x + (1.0 - a))).max(kMrfEps).min(1.0 - kMrfEps).eval();
  };
  for (int k = 0; k < k_users; ++k) {
    beliefs.pi_in_s[k] =
        support_input(beliefs.pi1_out[k], state.pi_out_sc_prev[k], hyper.eta(k));
    beliefs.pi_out_s[k] = run_mrf(beliefs.pi_in_s[k], hyper.w_user[k], cfg.i_mrf);
    beliefs.pi_in_sc[k] =
        support_input(beliefs.pi1_out[k], beliefs.pi_out_s[k], hyper.eta(k));
  }

  // Common field: normalized product of the per-user messages in, swept once,
  // leave-one-out outputs back to every user.
  PGrid logit_all = PGrid::Zero(n_taps, mb);
  for (int k = 0; k < k_users; ++k)
    logit_all += beliefs.pi_in_sc[k].unaryExpr([](double p) { return logit(p); });
  beliefs.pi_in_sc_all =
      logit_all.unaryExpr([](double t) { return clamp_prob(sigmoid(t)); });
  const MrfState common_state =
      run_mrf_state(beliefs.pi_in_sc_all, hyper.w_common, cfg.i_mrf);
  for (int k = 0; k < k_users; ++k) {
    beliefs.pi_out_sc[k] =
        common_output(common_state, hyper.w_common, beliefs.pi_in_sc[k]);
    state.pi_out_sc_prev[k] = beliefs.pi_out_sc[k];
  }

  // Forward supports and the spike/slab posterior per element.
  for (int k = 0; k < k_users; ++k) {
    beliefs.pi2_in[k] = (beliefs.pi_out_s[k] * beliefs.pi_out_sc[k] * hyper.eta(k))
                            .max(kMrfEps)
                            .min(1.0 - kMrfEps);
    beliefs.pi2_out[k].resize(n_taps, n_ant);
    beliefs.posterior[k].resize(n_taps, n_ant);
    for (int m = 0; m < n_ant; ++m) {
      const int sub = m / mt;
      const double g = pri[k][m].variance;
      double var_acc = 0.0;
      GaussianMessage& out = post[k][m];
      out.mean.resize(n_taps);
      for (int l = 0; l < n_taps; ++l) {
        const double base = logit(beliefs.pi2_in[k](l, sub)) + ev_sum[k](l, sub);
        beliefs.pi2_out[k](l, m) = clamp_prob(sigmoid(base - ev[k](l, m)));
        const double p = clamp_prob(sigmoid(base));
        beliefs.posterior[k](l, m) = p;
        const double s2 = hyper.sigma2[k](l, sub);
        const cplx r_hat = pri[k][m].mean(l) * (s2 / (s2 + g));
        const double c_hat = g * s2 / (s2 + g);
        out.mean(l) = p * r_hat;
        var_acc += p * (c_hat + std::norm(r_hat)) - p * p * std::norm(r_hat);
      }
      out.variance = std::max(var_acc / n_taps, cfg.variance_floor);
    }
  }
}

void em_update(const SupportBeliefs& beliefs,
               const std::vector<std::vector<GaussianMessage>>& b_pri,
               const SystemConfig& sys, const EstimatorConfig& cfg, int iter,
               HyperParams& hyper) {
  const int k_users = static_cast<int>(b_pri.size());
  const int n_ant = static_cast<int>(b_pri[0].size());
  const int n_taps = static_cast<int>(b_pri[0][0].mean.size());
  const int mt = sys.subarray_size;
  const int mb = n_ant / mt;

  const PGrid p_sc = combine_beliefs(beliefs.pi_in_sc[0], beliefs.pi_out_sc[0]);

  for (int k = 0; k < k_users; ++k) {
    const PGrid p_alpha = combine_beliefs(beliefs.pi1_out[k], beliefs.pi2_in[k]);
    const PGrid p_s = combine_beliefs(beliefs.pi_in_s[k], beliefs.pi_out_s[k]);

    const double denom = (p_s * p_sc).sum();
    if (denom > 1e-12)
      hyper.eta(k) = std::clamp(p_alpha.sum() / denom, 0.0, 1.0);

    // Slab variance from the posterior second moment of the active entries.
    for (int sub = 0; sub < mb; ++sub) {
      for (int l = 0; l < n_taps; ++l) {
        double num = 0.0;
        const double den = mt * p_alpha(l, sub);
        const double s2 = hyper.sigma2[k](l, sub);
        for (int m = sub * mt; m < (sub + 1) * mt; ++m) {
          const double g = b_pri[k][m].variance;
          const cplx r_hat = b_pri[k][m].mean(l) * (s2 / (s2 + g));
          const double c_hat = g * s2 / (s2 + g);
          num += beliefs.posterior[k](l, m) * (std::norm(r_hat) + c_hat);
        }
        if (den > 1e-12)
          hyper.sigma2[k](l, sub) = std::max(num / den, cfg.variance_floor);
      }
    }
  }

  if (cfg.em_w_period > 0 && iter % cfg.em_w_period == 0) {
    const double step = cfg.em_w_step_scale / (n_taps * mb);
    auto ascend = [&](const PGrid& p, MrfParams& w) {
      double g1 = 0.0, g2 = 0.0;
      for (int l = 0; l < n_taps; ++l) {
        for (int c = 0; c < mb; ++c) {
          double m_sum = 0.0;
          if (c > 0) m_sum += p(l, c) * p(l, c - 1);
          if (c + 1 < mb) m_sum += p(l, c) * p(l, c + 1);
          if (l > 0) m_sum += p(l, c) * p(l - 1, c);
          if (l + 1 < n_taps) m_sum += p(l, c) * p(l + 1, c);
          const double diff = p(l, c) - std::tanh(w.w1 * m_sum + w.w2);
          g1 += m_sum * diff;
          g2 += diff;
        }
      }
      w.w1 = std::max(0.0, w.w1 + step * g1);
      w.w2 += step * g2;
    };
    for (int k = 0; k < k_users; ++k) {
      ascend(combine_beliefs(beliefs.pi_in_s[k], beliefs.pi_out_s[k]),
             hyper.w_user[k]);
    }
    ascend(p_sc, hyper.w_common);
  }
}

EstimatorResult run_turbo_mrf(const std::vector<CMat>& y, const PilotAllocation& alloc,
                              const DftOperators& ops, const SystemConfig& sys,
                              const EstimatorConfig& cfg, const HyperParams& hyper_init,
                              const std::vector<CMat>* truth) {
  const int k_users = sys.n_users;
  const int n_ant = sys.antennas();
  const int n_taps = sys.n_taps;
  const int n_groups = static_cast<int>(alloc.groups.size());
  const double lambda0 = cfg.init_prior_variance > 0.0
                             ? cfg.init_prior_variance
                             : static_cast<double>(sys.n_subcarriers) / n_taps;
  const double ext_floor = cfg.variance_floor * sys.n_subcarriers / n_taps;
  const double noise_var = sys.noise_var();

  const std::vector<SensingMatrix> mats = build_sensing_matrices(alloc, ops);

  std::vector<CMat> y_beam;
  y_beam.reserve(y.size());
  for (const CMat& ys : y) y_beam.push_back(beam_transform(ops, ys));
  std::vector<CMat> y_group(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    const auto& grp = alloc.groups[g];
    y_group[g].resize(grp.subcarriers.size(), n_ant);
    for (std::size_t r = 0; r < grp.subcarriers.size(); ++r)
      y_group[g].row(static_cast<Eigen::Index>(r)) =
          y_beam.at(grp.symbol).row(grp.subcarriers[r]);
  }

  HyperParams hyper = hyper_init;
  EstimatorResult result;
  GaussianMessage init;
  init.mean = CVec::Zero(n_taps);
  init.variance = lambda0;
  std::vector<std::vector<GaussianMessage>> a_pri(
      k_users, std::vector<GaussianMessage>(n_ant, init));
  std::vector<std::vector<GaussianMessage>> b_pri = a_pri, b_pos = a_pri;
  ModuleBState bstate;
  SupportBeliefs beliefs;
  std::vector<CMat> x_prev(k_users, CMat::Zero(n_taps, n_ant));
  bool have_prev_b = false, have_prev_a = false;
  std::vector<std::vector<GaussianMessage>> b_pri_prev, a_pri_prev;

  auto damp = [&](std::vector<std::vector<GaussianMessage>>& cur,
                  const std::vector<std::vector<GaussianMessage>>& prev,
                  bool have_prev) {
    if (cfg.damping >= 1.0 || !have_prev) return;
    for (int k = 0; k < k_users; ++k) {
      for (int m = 0; m < n_ant; ++m) {
        cur[k][m].mean = cfg.damping * cur[k][m].mean +
                         (1.0 - cfg.damping) * prev[k][m].mean;
        cur[k][m].variance = cfg.damping * cur[k][m].variance +
                             (1.0 - cfg.damping) * prev[k][m].variance;
      }
    }
  };

  for (int iter = 1; iter <= cfg.i_max; ++iter) {
    IterationStats stats;
    int flags = 0;

    // Module A per group, then extrinsic toward Module B.
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
    damp(b_pri, b_pri_prev, have_prev_b);
    b_pri_prev = b_pri;
    have_prev_b = true;

    // Module B, then extrinsic back toward Module A.
    module_b_denoise(b_pri, hyper, sys, cfg, bstate, b_pos, beliefs);
    for (int k = 0; k < k_users; ++k)
      for (int m = 0; m < n_ant; ++m)
        a_pri[k][m] = extrinsic(b_pos[k][m], b_pri[k][m], ext_floor, &flags);
    damp(a_pri, a_pri_prev, have_prev_a);
    a_pri_prev = a_pri;
    have_prev_a = true;

    if (cfg.em_enabled && iter < cfg.i_max)
      em_update(beliefs, b_pri, sys, cfg, iter, hyper);

    // Diagnostics on the Module B posterior estimate.
    double change_num = 0.0, change_den = 0.0, res = 0.0;
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
    for (const CMat& r : resid) res += r.norm();
    stats.residual = res;
    if (truth) stats.nmse = nmse(h_hat, *truth);
    stats.clamp_flags = flags;
    result.diag.total_clamp_flags += flags;
    result.diag.iterations.push_back(stats);
    if (result.diag.iterations_to_converge == 0 &&
        stats.mean_change < cfg.conv_tol)
      result.diag.iterations_to_converge = iter;

    if (iter == cfg.i_max) {
      result.x_hat = std::move(x_hat);
      result.h_hat = std::move(h_hat);
    }
  }

  result.hyper = std::move(hyper);
  return result;
}

}  // namespace xlce
