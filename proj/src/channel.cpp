// SPDX-License-Identifier: Apache-2.0

#include "xlce/channel.hpp"

#include <algorithm>
#include <cmath>

namespace xlce {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Vector3d subarray_center(const SceneConfig& cfg, const SystemConfig& sys, int mbar) {
  const double x = (mbar - 0.5 * (sys.n_subarrays - 1)) * cfg.array_spacing;
  return {x, 0.0, cfg.array_height};
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

cplx complex_normal(Rng& rng, double var) {
  std::normal_distribution<double> n(0.0, std::sqrt(var / 2.0));
  return {n(rng), n(rng)};
}

Eigen::Vector3d sample_in_circle(Rng& rng, const Eigen::Vector3d& center, double radius) {
  // Uniform over the disk (sqrt radial draw), horizontal plane only.
  const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
  const double a = uniform(rng, 0.0, 2.0 * kPi);
  return center + Eigen::Vector3d(r * std::cos(a), r * std::sin(a), 0.0);
}

Scatterer sample_scatterer(Rng& rng, const SceneConfig& cfg, const SystemConfig& sys,
                           const Eigen::Vector3d& anchor, bool common) {
  Scatterer s;
  const double r = uniform(rng, std::min(5.0, cfg.max_scatter_range / 2.0), cfg.max_scatter_range);
  const double a = uniform(rng, 0.0, 2.0 * kPi);
  s.position = anchor + Eigen::Vector3d(r * std::cos(a), r * std::sin(a), 0.0);
  s.position.z() = uniform(rng, 0.0, 15.0);
  s.common = common;

  // Visibility window centered near the sub-array facing the scatterer.
  double best = 1e300;
  int center = 0;
  for (int m = 0; m < sys.n_subarrays; ++m) {
    const double d = (subarray_center(cfg, sys, m) - s.position).norm();
    if (d < best) { best = d; center = m; }
  }
  const double lo = std::max(1.0, cfg.visibility_min_frac * sys.n_subarrays);
  const double hi = std::max(lo, cfg.visibility_max_frac * sys.n_subarrays);
  s.visibility_center = center;
  s.visibility_radius = std::max(1, static_cast<int>(std::lround(uniform(rng, lo, hi))));
  const double u = uniform(rng, 0.4, 1.0);
  s.gain_var = u * u;
  return s;
}

}  // namespace

CVec steering_vector(double phi, int mtilde) {
  if (!(phi > 0.0 && phi < kPi)) throw std::invalid_argument("steering_vector: phi outside (0, pi)");
  CVec f(mtilde);
  const double c = std::cos(phi);
  const double scale = 1.0 / std::sqrt(static_cast<double>(mtilde));
  for (int m = 0; m < mtilde; ++m) {
    const double arg = -kPi * m * c;
    f(m) = scale * cplx(std::cos(arg), std::sin(arg));
  }
  return f;
}

Scene generate_scene(const SceneConfig& cfg, const SystemConfig& sys, Rng& rng) {
  Scene scene;
  scene.cfg = cfg;
  scene.ray_seed = rng();

  if (!cfg.fixed_user_positions.empty()) {
    if (static_cast<int>(cfg.fixed_user_positions.size()) < sys.n_users)
      throw std::invalid_argument("generate_scene: not enough fixed user positions");
    scene.user_positions.assign(cfg.fixed_user_positions.begin(),
                                cfg.fixed_user_positions.begin() + sys.n_users);
  } else {
    for (int k = 0; k < sys.n_users; ++k) {
      const auto& center = (k % 2 == 0) ? cfg.circle_a : cfg.circle_b;
      scene.user_positions.push_back(sample_in_circle(rng, center, cfg.circle_diameter / 2.0));
    }
  }

  const int n_common = static_cast<int>(std::lround(cfg.common_fraction * cfg.clusters_per_user));
  const int n_private = cfg.clusters_per_user - n_common;

  // Common clusters anchor near the array so every user can plausibly see them.
  Rng common_rng(derive_seed(scene.ray_seed, 0x10000));
  for (int c = 0; c < n_common; ++c)
    scene.common_scatterers.push_back(
        sample_scatterer(common_rng, cfg, sys, Eigen::Vector3d::Zero(), true));

  scene.private_scatterers.resize(sys.n_users);
  for (int k = 0; k < sys.n_users; ++k) {
    Rng user_rng(derive_seed(scene.ray_seed, 0x20000 + static_cast<std::uint64_t>(k)));
    for (int c = 0; c < n_private; ++c)
      scene.private_scatterers[k].push_back(
          sample_scatterer(user_rng, cfg, sys, scene.user_positions[k], false));
  }

  // Shortest possible path anchors tap 0 (frame sync to the earliest arrival).
  double dmin = 1e300, dmax = 0.0;
  for (int k = 0; k < sys.n_users; ++k) {
    const auto& up = scene.user_positions[k];
    for (int m = 0; m < sys.n_subarrays; ++m) {
      const double los = (subarray_center(cfg, sys, m) - up).norm();
      dmin = std::min(dmin, los);
      dmax = std::max(dmax, los);
    }
    auto consider = [&](const Scatterer& s) {
      for (int m = 0; m < sys.n_subarrays; ++m) {
        const double d = (s.position - up).norm() +
                         (subarray_center(cfg, sys, m) - s.position).norm();
        dmax = std::max(dmax, d);
      }
    };
    for (const auto& s : scene.common_scatterers) consider(s);
    for (const auto& s : scene.private_scatterers[k]) consider(s);
  }
  scene.base_distance = dmin;

  if (cfg.delay_taps_per_meter > 0.0) {
    scene.delay_scale = cfg.delay_taps_per_meter;
  } else {
    const double span = std::max(1.0, dmax - dmin);
    scene.delay_scale = 0.6 * (sys.n_taps - 1) / span;
  }
  const double worst = (dmax - dmin) * scene.delay_scale + cfg.cluster_delay_spread + 1.0;
  if (worst >= sys.n_taps)
    throw std::invalid_argument("generate_scene: geometry exceeds the tap window");
  return scene;
}

std::vector<ChannelRay> trace_rays(const Scene& scene, const SystemConfig& sys,
                                   int user, Rng& rng) {
  const auto& cfg = scene.cfg;
  const auto& up = scene.user_positions.at(user);
  std::vector<ChannelRay> rays;

  auto emit_bundle = [&](const Scatterer& s) {
    const int lo = std::max(0, s.visibility_center - s.visibility_radius);
    const int hi = std::min(sys.n_subarrays - 1, s.visibility_center + s.visibility_radius);
    const double d_user = (s.position - up).norm();
    for (int r = 0; r < cfg.rays_per_cluster; ++r) {
      const cplx gain = complex_normal(rng, s.gain_var / cfg.rays_per_cluster);
      const double delay_jit = uniform(rng, 0.0, cfg.cluster_delay_spread);
      const double angle_jit = uniform(rng, -0.03, 0.03);
      for (int m = lo; m <= hi; ++m) {
        const auto pc = subarray_center(cfg, sys, m);
        const double path = d_user + (pc - s.position).norm();
        ChannelRay ray;
        ray.subarray = m;
        ray.gain = gain;
        ray.delay_taps = (path - scene.base_distance) * scene.delay_scale + delay_jit;
        const double cosphi = (s.position.z() - pc.z()) / (s.position - pc).norm();
        ray.angle = std::clamp(std::acos(std::clamp(cosphi, -1.0, 1.0)) + angle_jit,
                               0.01, kPi - 0.01);
        if (ray.delay_taps >= sys.n_taps)
          throw std::invalid_argument("trace_rays: delay exceeds the tap window");
        rays.push_back(ray);
      }
    }
  };

  if (cfg.line_of_sight) {
    const cplx gain = complex_normal(rng, 2.0);
    for (int m = 0; m < sys.n_subarrays; ++m) {
      const auto pc = subarray_center(cfg, sys, m);
      const double path = (pc - up).norm();
      ChannelRay ray;
      ray.subarray = m;
      ray.gain = gain;
      ray.delay_taps = (path - scene.base_distance) * scene.delay_scale;
      const double cosphi = (up.z() - pc.z()) / (up - pc).norm();
      ray.angle = std::clamp(std::acos(std::clamp(cosphi, -1.0, 1.0)), 0.01, kPi - 0.01);
      rays.push_back(ray);
    }
  }
  for (const auto& s : scene.common_scatterers) emit_bundle(s);
  for (const auto& s : scene.private_scatterers.at(user)) emit_bundle(s);
  return rays;
}

namespace {

// Lanczos-2 kernel: exact delta at integer offsets, smooth leakage otherwise.
double pulse(double d) {
  if (std::abs(d) >= 2.0) return 0.0;
  if (d == 0.0) return 1.0;
  const double a = kPi * d;
  return (std::sin(a) / a) * (std::sin(a / 2.0) / (a / 2.0));
}

}  // namespace

CMat synthesize_cir(const std::vector<ChannelRay>& rays, const SystemConfig& sys,
                    const DftOperators& ops, BGrid* support) {
  const int mt = sys.subarray_size;
  CMat x = CMat::Zero(sys.n_taps, sys.antennas());
  const CMat f_sub = ops.f_array.block(0, 0, mt, mt);  // one unitary block

  for (const auto& ray : rays) {
    const CVec beams = f_sub.adjoint() * steering_vector(ray.angle, mt);
    const int l0 = std::max(0, static_cast<int>(std::ceil(ray.delay_taps - 2.0)));
    const int l1 = std::min(sys.n_taps - 1, static_cast<int>(std::floor(ray.delay_taps + 2.0)));
    for (int l = l0; l <= l1; ++l) {
      const double p = pulse(l - ray.delay_taps);
      if (p == 0.0) continue;
      x.row(l).segment(ray.subarray * mt, mt) += ray.gain * p * beams.transpose();
    }
  }

  if (support != nullptr) {
    PGrid power = PGrid::Zero(sys.n_taps, sys.n_subarrays);
    for (int mb = 0; mb < sys.n_subarrays; ++mb)
      power.col(mb) = x.block(0, mb * mt, sys.n_taps, mt).rowwise().squaredNorm();
    const double thresh = kSupportRelThreshold * power.maxCoeff();
    *support = power > thresh && power > 0.0;
  }
  return x;
}

void normalize_channel_power(std::vector<CMat>& x, const DftOperators& ops) {
  // ||H||_F^2 = N ||X||_F^2 (orthogonal F_D columns, unitary F_A), so mean
  // per-element power of H equals 1 exactly when ||X||_F^2 = M.
  const double m = ops.n_subarrays * ops.subarray_size;
  for (auto& xk : x) {
    const double p = xk.squaredNorm();
    if (p <= 0.0) throw std::invalid_argument("normalize_channel_power: zero channel");
    xk *= std::sqrt(m / p);
  }
}

ChannelRealization realize_channels(const SceneConfig& cfg, const SystemConfig& sys,
                                    const DftOperators& ops, Rng& rng) {
  const Scene scene = generate_scene(cfg, sys, rng);
  ChannelRealization out;
  out.x.resize(sys.n_users);
  out.h.resize(sys.n_users);
  out.support.resize(sys.n_users);
  for (int k = 0; k < sys.n_users; ++k) {
    Rng ray_rng(derive_seed(scene.ray_seed, 0x30000 + static_cast<std::uint64_t>(k)));
    const auto rays = trace_rays(scene, sys, k, ray_rng);
    out.x[k] = synthesize_cir(rays, sys, ops, &out.support[k]);
  }
  normalize_channel_power(out.x, ops);
  for (int k = 0; k < sys.n_users; ++k) out.h[k] = cir_to_frequency(ops, out.x[k]);
  return out;
}

}  // namespace xlce
