// SPDX-License-Identifier: Apache-2.0

#include "xlce/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace xlce {

namespace {

struct GroupWork {
  CMat a;       // N x c_g, current weighted dictionary
  CMat sigma_inv;
  CMat t_inv;
  double s = 0.0;  // power scale sqrt(P / t)
  double t = 0.0;  // column mass 1^T b
};

// Shared forward pass: weighted dictionaries, per-group noise-plus-
// interference inverses, and regularized T inverses.
std::vector<GroupWork> forward(const RMat& b, const std::vector<CMat>& dicts,
                               double pilot_power, const OptimizerConfig& cfg,
                               double lambda0) {
  const int n = static_cast<int>(b.rows());
  const int n_groups = static_cast<int>(b.cols());
  std::vector<GroupWork> work(n_groups);

  CMat interference = CMat::Zero(n, n);
  for (int g = 0; g < n_groups; ++g) {
    GroupWork& w = work[g];
    w.t = std::max(b.col(g).sum(), 1e-9);
    w.s = std::sqrt(pilot_power / w.t);
    w.a = w.s * (b.col(g).asDiagonal() * dicts[g]);
    interference.noalias() += w.a * w.a.adjoint();
  }

  for (int g = 0; g < n_groups; ++g) {
    GroupWork& w = work[g];
    CMat sigma = (cfg.noise_var + cfg.reg) * CMat::Identity(n, n) +
                 lambda0 * (interference - w.a * w.a.adjoint());
    w.sigma_inv = Eigen::LLT<CMat>(sigma).solve(CMat::Identity(n, n));
    const int c_dim = static_cast<int>(w.a.cols());
    CMat t = (1.0 / lambda0 + cfg.reg) * CMat::Identity(c_dim, c_dim) +
             w.a.adjoint() * w.sigma_inv * w.a;
    w.t_inv = Eigen::LLT<CMat>(t).solve(CMat::Identity(c_dim, c_dim));
  }
  return work;
}

}  // namespace

std::vector<CMat> build_group_dictionaries(const std::vector<PilotGroup>& groups,
                                           const DftOperators& ops) {
  const int n = ops.n_subcarriers;
  const int n_taps = ops.n_taps;
  std::vector<CMat> dicts;
  dicts.reserve(groups.size());
  for (const auto& grp : groups) {
    CMat d(n, n_taps * static_cast<int>(grp.users.size()));
    for (std::size_t i = 0; i < grp.users.size(); ++i) {
      const CVec code = cyclic_shift_code(n, grp.shifts[i]);
      d.middleCols(static_cast<Eigen::Index>(i) * n_taps, n_taps) =
          code.asDiagonal() * ops.f_delay;
    }
    dicts.push_back(std::move(d));
  }
  return dicts;
}

double mse_objective(const RMat& b, const std::vector<CMat>& dicts, double pilot_power,
                     const OptimizerConfig& cfg) {
  if (cfg.prior_var <= 0.0)
    throw std::invalid_argument("mse_objective: prior_var must be resolved");
  const auto work = forward(b, dicts, pilot_power, cfg, cfg.prior_var);
  double j = 0.0;
  for (const auto& w : work) j += w.t_inv.trace().real();
  return j;
}

RMat objective_gradient(const RMat& c, const std::vector<CMat>& dicts,
                        double pilot_power, const OptimizerConfig& cfg) {
  if (cfg.prior_var <= 0.0)
    throw std::invalid_argument("objective_gradient: prior_var must be resolved");
  const RMat b = c.array().square().matrix();
  const double lambda0 = cfg.prior_var;
  const int n = static_cast<int>(b.rows());
  const int n_groups = static_cast<int>(b.cols());
  const auto work = forward(b, dicts, pilot_power, cfg, lambda0);

  std::vector<CMat> w_mats(n_groups);
  CMat w_sum = CMat::Zero(n, n);
  for (int g = 0; g < n_groups; ++g) {
    const CMat t2 = work[g].t_inv * work[g].t_inv;
    const CMat sa = work[g].sigma_inv * work[g].a;
    w_mats[g] = sa * t2 * sa.adjoint();
    w_sum += w_mats[g];
  }

  RMat grad_b(n, n_groups);
  for (int g = 0; g < n_groups; ++g) {
    const CMat t2 = work[g].t_inv * work[g].t_inv;
    const CMat xi = -work[g].sigma_inv * work[g].a * t2 +
                    lambda0 * ((w_sum - w_mats[g]) * work[g].a);
    // Q[n] = sum_c conj(Xi[n,c]) * (s * dict[n,c]); the s factor enters via
    // the dictionary scaling of dA/db.
    const CVec q = (xi.conjugate().cwiseProduct(dicts[g])).rowwise().sum();
    const double r = (b.col(g).asDiagonal() * q).sum().real();
    for (int row = 0; row < n; ++row)
      grad_b(row, g) =
          2.0 * work[g].s * q(row).real() - work[g].s / work[g].t * r;
  }
  return (2.0 * c.array() * grad_b.array()).matrix();
}

void project_pattern(RMat& c) {
  c = c.cwiseMax(0.0).cwiseMin(1.0);
  for (int row = 0; row < c.rows(); ++row) {
    const double mass = c.row(row).squaredNorm();
    if (mass > 1.0) c.row(row) /= std::sqrt(mass);
  }
}

RMat uniform_relaxed_init(int n, int g) {
  return RMat::Constant(n, g, 1.0 / (g + 1));
}

IMat optimize_pattern(const RMat& c_init, const std::vector<PilotGroup>& groups,
                      const DftOperators& ops, double pilot_power,
                      const OptimizerConfig& cfg_in, OptimizeTrace* trace) {
  const int n = static_cast<int>(c_init.rows());
  const int n_groups = static_cast<int>(c_init.cols());
  const int n_taps = ops.n_taps;
  const std::vector<CMat> dicts = build_group_dictionaries(groups, ops);
  OptimizerConfig cfg = cfg_in;
  if (cfg.prior_var <= 0.0)
    cfg.prior_var = static_cast<double>(ops.n_subcarriers) / n_taps;

  RMat c = c_init;
  project_pattern(c);
  // Exchange-symmetric inits over identical group dictionaries sit on a
  // saddle: the gradient flow preserves the symmetry exactly and rounding
  // degenerates to ordering artifacts. A deterministic bias toward the
  // run-interleaved layout breaks the tie; the flow is free to leave it.
  {
    std::vector<std::vector<int>> members(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) members[g] = groups[g].users;
    c += 1e-3 * run_interleaved_selection(n, members).cast<double>();
    project_pattern(c);
  }
  RMat m1 = RMat::Zero(n, n_groups), m2 = RMat::Zero(n, n_groups);
  if (trace) {
    trace->objective.clear();
    trace->converged = true;
  }

  for (int step = 1; step <= cfg.steps; ++step) {
    const RMat b = c.array().square().matrix();
    if (trace)
      trace->objective.push_back(mse_objective(b, dicts, pilot_power, cfg));
    const RMat g = objective_gradient(c, dicts, pilot_power, cfg);
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
    m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (int row = 0; row < n; ++row)
      for (int col = 0; col < n_groups; ++col)
        c(row, col) -= cfg.learning_rate * (m1(row, col) / bc1) /
                       (std::sqrt(m2(row, col) / bc2) + cfg.adam_eps);
    project_pattern(c);
  }
  const double final_obj =
      mse_objective(c.array().square().matrix(), dicts, pilot_power, cfg);
  if (trace) {
    trace->final_objective = final_obj;
    if (!std::isfinite(final_obj)) trace->converged = false;
  }

  // Round: assign each subcarrier to its strongest group when decisive.
  IMat sel = IMat::Zero(n, n_groups);
  std::vector<int> owner(n, -1);
  std::vector<int> count(n_groups, 0);
  for (int row = 0; row < n; ++row) {
    int best = 0;
    for (int col = 1; col < n_groups; ++col)
      if (c(row, col) > c(row, best)) best = col;
    if (c(row, best) * c(row, best) >= cfg.round_threshold) {
      owner[row] = best;
      ++count[best];
    }
  }
  // Repair: every group needs at least L subcarriers for an identifiable
  // delay response. Pull the strongest unassigned rows first, then the
  // lowest-margin assignments that surplus groups can spare.
  for (int g = 0; g < n_groups; ++g) {
    while (count[g] < n_taps) {
      int best = -1;
      double score = -1e300;
      for (int row = 0; row < n; ++row) {
        if (owner[row] != -1) continue;
        if (c(row, g) * c(row, g) > score) {
          score = c(row, g) * c(row, g);
          best = row;
        }
      }
      if (best < 0) {
        for (int row = 0; row < n; ++row) {
          const int o = owner[row];
          if (o == -1 || o == g || count[o] <= n_taps) continue;
          const double margin =
              c(row, g) * c(row, g) - c(row, o) * c(row, o);
          if (margin > score) {
            score = margin;
            best = row;
          }
        }
        if (best < 0) throw std::runtime_error("optimize_pattern: cannot repair");
        --count[owner[best]];
      }
      owner[best] = g;
      ++count[g];
    }
  }
  for (int row = 0; row < n; ++row)
    if (owner[row] != -1) sel(row, owner[row]) = 1;

  if (trace) {
    RMat b_rounded = sel.cast<double>();
    trace->rounded_objective = mse_objective(b_rounded, dicts, pilot_power, cfg);
  }
  return sel;
}

}  // namespace xlce
