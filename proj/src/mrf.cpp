// SPDX-License-Identifier: Apache-2.0

#include "xlce/mrf.hpp"

#include <algorithm>
#include <cmath>

namespace xlce {

namespace {

inline double clamp_prob(double p) {
  return std::clamp(p, kMrfEps, 1.0 - kMrfEps);
}

// Message leaving site (r,c) along one edge. `excl` is the plane holding the
// reverse-edge message at that site, which BP removes from the product.
double site_message(const MrfState& st, const MrfParams& prm, int r, int c,
                    const PGrid& excl) {
  double p = st.pi_in(r, c);
  double q = 1.0 - p;
  const PGrid* planes[4] = {&st.lam_l, &st.lam_r, &st.lam_t, &st.lam_b};
  for (const PGrid* plane : planes) {
    if (plane == &excl) continue;
    p *= (*plane)(r, c);
    q *= 1.0 - (*plane)(r, c);
  }
  const double w1 = prm.w1, wh = prm.w2 / 2.0;
  const double num = p * std::exp(w1 - wh) + q * std::exp(wh - w1);
  const double den =
      (std::exp(w1) + std::exp(-w1)) * (p * std::exp(-wh) + q * std::exp(wh));
  return clamp_prob(num / den);
}

}  // namespace

MrfState MrfState::init(const PGrid& pi_in) {
  MrfState st;
  st.pi_in = pi_in.max(kMrfEps).min(1.0 - kMrfEps);
  st.lam_l = PGrid::Constant(pi_in.rows(), pi_in.cols(), 0.5);
  st.lam_r = st.lam_l;
  st.lam_t = st.lam_l;
  st.lam_b = st.lam_l;
  return st;
}

void sweep(MrfState& state, const MrfParams& params, SweepDir dir) {
  const int rows = state.rows(), cols = state.cols();
  switch (dir) {
    case SweepDir::kRight:  // fill lam_l from left neighbors, ascending column
      for (int r = 0; r < rows; ++r)
        for (int c = 1; c < cols; ++c)
          state.lam_l(r, c) = site_message(state, params, r, c - 1, state.lam_r);
      break;
    case SweepDir::kLeft:  // fill lam_r from right neighbors, descending column
      for (int r = 0; r < rows; ++r)
        for (int c = cols - 2; c >= 0; --c)
          state.lam_r(r, c) = site_message(state, params, r, c + 1, state.lam_l);
      break;
    case SweepDir::kUp:  // fill lam_b from lower neighbors, descending row
      for (int c = 0; c < cols; ++c)
        for (int r = rows - 2; r >= 0; --r)
          state.lam_b(r, c) = site_message(state, params, r + 1, c, state.lam_t);
      break;
    case SweepDir::kDown:  // fill lam_t from upper neighbors, ascending row
      for (int c = 0; c < cols; ++c)
        for (int r = 1; r < rows; ++r)
          state.lam_t(r, c) = site_message(state, params, r - 1, c, state.lam_b);
      break;
  }
}

PGrid mrf_output(const MrfState& state, const MrfParams& params) {
  const double wh = params.w2 / 2.0;
  PGrid p_num = state.lam_l * state.lam_r * state.lam_t * state.lam_b *
                std::exp(-wh);
  PGrid q_num = (1.0 - state.lam_l) * (1.0 - state.lam_r) *
                (1.0 - state.lam_t) * (1.0 - state.lam_b) * std::exp(wh);
  return (p_num / (p_num + q_num)).max(kMrfEps).min(1.0 - kMrfEps);
}

MrfState run_mrf_state(const PGrid& pi_in, const MrfParams& params, int i_mrf) {
  MrfState st = MrfState::init(pi_in);
  for (int it = 0; it < i_mrf; ++it) {
    sweep(st, params, SweepDir::kRight);
    sweep(st, params, SweepDir::kLeft);
    sweep(st, params, SweepDir::kUp);
    sweep(st, params, SweepDir::kDown);
  }
  return st;
}

PGrid run_mrf(const PGrid& pi_in, const MrfParams& params, int i_mrf) {
  return mrf_output(run_mrf_state(pi_in, params, i_mrf), params);
}

PGrid common_output(const MrfState& state, const MrfParams& params,
                    const PGrid& pi_in_user) {
  // Divide the user's own Bernoulli factor out of the combined evidence,
  // then attach the remainder to the cavity field output.
  const PGrid u = pi_in_user.max(kMrfEps).min(1.0 - kMrfEps);
  const PGrid rest_num = state.pi_in * (1.0 - u);
  const PGrid rest_den = rest_num + (1.0 - state.pi_in) * u;
  const PGrid rest = (rest_num / rest_den).max(kMrfEps).min(1.0 - kMrfEps);
  return combine_beliefs(mrf_output(state, params), rest);
}

PGrid combine_beliefs(const PGrid& p, const PGrid& q) {
  const PGrid num = p * q;
  const PGrid den = num + (1.0 - p) * (1.0 - q);
  return (num / den).max(kMrfEps).min(1.0 - kMrfEps);
}

double combine_beliefs(double p, double q) {
  const double num = p * q;
  return clamp_prob(num / (num + (1.0 - p) * (1.0 - q)));
}

}  // namespace xlce
