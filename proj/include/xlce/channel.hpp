// SPDX-License-Identifier: Apache-2.0
//
// Synthetic sub-array XL-MIMO channel generator: geometric scatterers with
// limited, contiguous visibility regions produce the 2-D clustered
// delay/sub-array sparsity that the estimators exploit. Stands in for a
// full COST2100 run at desk scale.

#pragma once

#include "xlce/transforms.hpp"
#include "xlce/types.hpp"

namespace xlce {

struct Scatterer {
  Eigen::Vector3d position;
  int visibility_center = 0;   // sub-array index
  int visibility_radius = 1;   // in sub-arrays, window is [center-r, center+r]
  double gain_var = 1.0;       // linear power of the ray bundle
  bool common = false;         // shared across all users
};

struct SceneConfig {
  int clusters_per_user = 6;
  double common_fraction = 0.3;   // fraction of clusters shared across users
  int rays_per_cluster = 3;
  double cluster_delay_spread = 1.5;  // taps, spread of ray delays inside a cluster
  double visibility_min_frac = 0.125; // radius ~ U[min,max] * Mbar
  double visibility_max_frac = 1.0 / 3.0;
  // Geometry: users drawn uniformly in two circles, array on a line at height.
  double array_spacing = 0.5;     // meters between sub-array centers
  double array_height = 10.0;
  Eigen::Vector3d circle_a{20.0, 10.0, 1.5};
  Eigen::Vector3d circle_b{-20.0, -18.0, 1.5};
  double circle_diameter = 10.0;
  double max_scatter_range = 60.0;  // scatterers placed within this radius
  bool line_of_sight = true;
  // Explicit user positions (overrides the circle sampling when nonempty).
  std::vector<Eigen::Vector3d> fixed_user_positions;
  // Taps per meter of excess path length; 0 derives a scale that spreads the
  // scene's delays over ~60% of the tap window.
  double delay_taps_per_meter = 0.0;
};

struct ChannelRay {
  int subarray = 0;
  cplx gain{0.0, 0.0};
  double delay_taps = 0.0;    // fractional tap units, in [0, L)
  double angle = 0.0;         // radians in (0, pi)
};

struct Scene {
  SceneConfig cfg;
  std::vector<Eigen::Vector3d> user_positions;
  std::vector<Scatterer> common_scatterers;
  std::vector<std::vector<Scatterer>> private_scatterers;  // per user
  double delay_scale = 0.0;    // taps per meter of excess path length
  double base_distance = 0.0;  // scene-wide minimum path, anchors tap 0
  std::uint64_t ray_seed = 0;  // per-user ray randomness derives from this
};

struct ChannelRealization {
  std::vector<CMat> x;        // per user, L x M sparse-domain CIR
  std::vector<CMat> h;        // per user, N x M frequency response
  std::vector<BGrid> support; // per user, L x Mbar ground-truth support
};

// Eq.-style steering vector: entry m = exp(-j pi m cos(phi)) / sqrt(Mtilde).
CVec steering_vector(double phi, int mtilde);

// Places users and scatterers; deterministic given (cfg, sys, rng state).
Scene generate_scene(const SceneConfig& cfg, const SystemConfig& sys, Rng& rng);

// Rays for user k against every visible scatterer, geometry re-evaluated per
// sub-array center (angle and delay drift across the aperture).
std::vector<ChannelRay> trace_rays(const Scene& scene, const SystemConfig& sys,
                                   int user, Rng& rng);

// Accumulates rays onto the delay/beam grid (windowed-sinc fractional delays),
// derives the support mask, and returns the un-normalized X (L x M).
CMat synthesize_cir(const std::vector<ChannelRay>& rays, const SystemConfig& sys,
                    const DftOperators& ops, BGrid* support = nullptr);

// Scales each user's X so the mean per-subcarrier-per-antenna power of H is 1.
void normalize_channel_power(std::vector<CMat>& x, const DftOperators& ops);

// Full pipeline: scene -> rays -> X -> normalize -> H (+ supports).
ChannelRealization realize_channels(const SceneConfig& cfg, const SystemConfig& sys,
                                    const DftOperators& ops, Rng& rng);

// Relative power threshold separating windowed-sinc leakage from support.
inline constexpr double kSupportRelThreshold = 1e-4;

}  // namespace xlce
