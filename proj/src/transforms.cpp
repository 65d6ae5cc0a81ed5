// SPDX-License-Identifier: Apache-2.0

#include "xlce/transforms.hpp"

#include <cmath>

namespace xlce {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

DftOperators DftOperators::make(int n, int l, int mbar, int mtilde) {
  DftOperators ops;
  ops.n_subcarriers = n;
  ops.n_taps = l;
  ops.n_subarrays = mbar;
  ops.subarray_size = mtilde;

  ops.f_delay.resize(n, l);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < l; ++col) {
      const double arg = -kTwoPi * row * col / n;
      ops.f_delay(row, col) = cplx(std::cos(arg), std::sin(arg));
    }

  CMat f_sub(mtilde, mtilde);
  const double scale = 1.0 / std::sqrt(static_cast<double>(mtilde));
  for (int a = 0; a < mtilde; ++a)
    for (int b = 0; b < mtilde; ++b) {
      const double arg = -kTwoPi * a * b / mtilde;
      f_sub(a, b) = scale * cplx(std::cos(arg), std::sin(arg));
    }

  const int m = mbar * mtilde;
  ops.f_array = CMat::Zero(m, m);
  for (int blk = 0; blk < mbar; ++blk)
    ops.f_array.block(blk * mtilde, blk * mtilde, mtilde, mtilde) = f_sub;
  return ops;
}

DftOperators DftOperators::make(const SystemConfig& cfg) {
  cfg.validate();
  return make(cfg.n_subcarriers, cfg.n_taps, cfg.n_subarrays, cfg.subarray_size);
}

CMat partial_dft_rows(const DftOperators& ops, const std::vector<int>& rows) {
  CMat out(static_cast<Eigen::Index>(rows.size()), ops.n_taps);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= ops.n_subcarriers)
      throw std::invalid_argument("partial_dft_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = ops.f_delay.row(r);
  }
  return out;
}

CMat cir_to_frequency(const DftOperators& ops, const CMat& x) {
  return ops.f_delay * x * ops.f_array;
}

CMat frequency_to_cir(const DftOperators& ops, const CMat& h) {
  return (ops.f_delay.adjoint() * h * ops.f_array.adjoint()) / ops.n_subcarriers;
}

CMat beam_transform(const DftOperators& ops, const CMat& y) {
  return y * ops.f_array.adjoint();
}

double nmse(const CMat& est, const CMat& truth) {
  const double p = truth.squaredNorm();
  if (p == 0.0) throw std::invalid_argument("nmse: zero-power reference");
  return (est - truth).squaredNorm() / p;
}

double nmse(const std::vector<CMat>& est, const std::vector<CMat>& truth) {
  if (est.size() != truth.size() || est.empty())
    throw std::invalid_argument("nmse: size mismatch");
  double err = 0.0, p = 0.0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    err += (est[k] - truth[k]).squaredNorm();
    p += truth[k].squaredNorm();
  }
  if (p == 0.0) throw std::invalid_argument("nmse: zero-power reference");
  return err / p;
}

}  // namespace xlce
