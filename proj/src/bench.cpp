// SPDX-License-Identifier: Apache-2.0

#include "xlce/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace xlce {

namespace {

std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kSnrDb: return "snr-db";
    case SweepAxis::kUsers: return "users";
    case SweepAxis::kPilotRatio: return "pilot-ratio";
  }
  throw std::logic_error("axis_name: unknown axis");
}

SweepAxis axis_from_name(const std::string& name) {
  if (name == "snr-db") return SweepAxis::kSnrDb;
  if (name == "users") return SweepAxis::kUsers;
  if (name == "pilot-ratio") return SweepAxis::kPilotRatio;
  throw std::invalid_argument("unknown sweep axis: " + name);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double median_db(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median_db: empty input");
  for (double& v : values) v = 10.0 * std::log10(v);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ExperimentSpec spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentSpec s;
  if (j.contains("system")) {
    const auto& js = j.at("system");
    s.system.n_subcarriers = js.value("n_subcarriers", s.system.n_subcarriers);
    s.system.n_taps = js.value("n_taps", s.system.n_taps);
    s.system.n_subarrays = js.value("n_subarrays", s.system.n_subarrays);
    s.system.subarray_size = js.value("subarray_size", s.system.subarray_size);
    s.system.n_users = js.value("n_users", s.system.n_users);
    s.system.n_groups = js.value("n_groups", s.system.n_groups);
    s.system.snr_db = js.value("snr_db", s.system.snr_db);
    s.system.pilot_power = js.value("pilot_power", s.system.pilot_power);
  }
  if (j.contains("scene")) {
    const auto& js = j.at("scene");
    s.scene.clusters_per_user = js.value("clusters_per_user", s.scene.clusters_per_user);
    s.scene.common_fraction = js.value("common_fraction", s.scene.common_fraction);
    s.scene.rays_per_cluster = js.value("rays_per_cluster", s.scene.rays_per_cluster);
    s.scene.cluster_delay_spread =
        js.value("cluster_delay_spread", s.scene.cluster_delay_spread);
    s.scene.visibility_min_frac =
        js.value("visibility_min_frac", s.scene.visibility_min_frac);
    s.scene.visibility_max_frac =
        js.value("visibility_max_frac", s.scene.visibility_max_frac);
    s.scene.line_of_sight = js.value("line_of_sight", s.scene.line_of_sight);
    s.scene.delay_taps_per_meter =
        js.value("delay_taps_per_meter", s.scene.delay_taps_per_meter);
  }
  if (j.contains("estimator")) {
    const auto& je = j.at("estimator");
    s.estimator.i_max = je.value("i_max", s.estimator.i_max);
    s.estimator.i_mrf = je.value("i_mrf", s.estimator.i_mrf);
    s.estimator.damping = je.value("damping", s.estimator.damping);
    s.estimator.em_w_period = je.value("em_w_period", s.estimator.em_w_period);
    s.estimator.variance_floor = je.value("variance_floor", s.estimator.variance_floor);
    s.estimator.em_enabled = je.value("em_enabled", s.estimator.em_enabled);
    s.estimator.em_w_step_scale =
        je.value("em_w_step_scale", s.estimator.em_w_step_scale);
    s.estimator.init_prior_variance =
        je.value("init_prior_variance", s.estimator.init_prior_variance);
    s.estimator.conv_tol = je.value("conv_tol", s.estimator.conv_tol);
  }
  if (j.contains("baseline")) {
    const auto& jb = j.at("baseline");
    s.baseline.i_max = jb.value("i_max", s.baseline.i_max);
    s.baseline.bg_rate_init = jb.value("bg_rate_init", s.baseline.bg_rate_init);
    s.baseline.bg_var_init = jb.value("bg_var_init", s.baseline.bg_var_init);
    s.baseline.em_enabled = jb.value("em_enabled", s.baseline.em_enabled);
    s.baseline.omp_budget = jb.value("omp_budget", s.baseline.omp_budget);
    s.baseline.omp_threshold_scale =
        jb.value("omp_threshold_scale", s.baseline.omp_threshold_scale);
  }
  if (j.contains("optimizer")) {
    const auto& jo = j.at("optimizer");
    s.optimizer.prior_var = jo.value("prior_var", s.optimizer.prior_var);
    s.optimizer.noise_var = jo.value("noise_var", s.optimizer.noise_var);
    s.optimizer.learning_rate = jo.value("learning_rate", s.optimizer.learning_rate);
    s.optimizer.steps = jo.value("steps", s.optimizer.steps);
    s.optimizer.beta1 = jo.value("beta1", s.optimizer.beta1);
    s.optimizer.beta2 = jo.value("beta2", s.optimizer.beta2);
    s.optimizer.adam_eps = jo.value("adam_eps", s.optimizer.adam_eps);
    s.optimizer.round_threshold = jo.value("round_threshold", s.optimizer.round_threshold);
    s.optimizer.reg = jo.value("reg", s.optimizer.reg);
  }
  s.schemes = j.value("schemes", s.schemes);
  s.algorithms = j.value("algorithms", s.algorithms);
  if (j.contains("axis")) s.axis = axis_from_name(j.at("axis").get<std::string>());
  s.sweep_values = j.value("sweep_values", s.sweep_values);
  s.seeds = j.value("seeds", s.seeds);
  s.master_seed = j.value("master_seed", s.master_seed);
  s.threads = j.value("threads", s.threads);
  s.out_prefix = j.value("out_prefix", s.out_prefix);
  return s;
}

std::string spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["system"] = {{"n_subcarriers", s.system.n_subcarriers},
                 {"n_taps", s.system.n_taps},
                 {"n_subarrays", s.system.n_subarrays},
                 {"subarray_size", s.system.subarray_size},
                 {"n_users", s.system.n_users},
                 {"n_groups", s.system.n_groups},
                 {"snr_db", s.system.snr_db},
                 {"pilot_power", s.system.pilot_power}};
  j["scene"] = {{"clusters_per_user", s.scene.clusters_per_user},
                {"common_fraction", s.scene.common_fraction},
                {"rays_per_cluster", s.scene.rays_per_cluster},
                {"cluster_delay_spread", s.scene.cluster_delay_spread},
                {"visibility_min_frac", s.scene.visibility_min_frac},
                {"visibility_max_frac", s.scene.visibility_max_frac},
                {"line_of_sight", s.scene.line_of_sight},
                {"delay_taps_per_meter", s.scene.delay_taps_per_meter}};
  j["estimator"] = {{"i_max", s.estimator.i_max},
                    {"i_mrf", s.estimator.i_mrf},
                    {"damping", s.estimator.damping},
                    {"em_w_period", s.estimator.em_w_period},
                    {"variance_floor", s.estimator.variance_floor},
                    {"em_enabled", s.estimator.em_enabled},
                    {"em_w_step_scale", s.estimator.em_w_step_scale},
                    {"init_prior_variance", s.estimator.init_prior_variance},
                    {"conv_tol", s.estimator.conv_tol}};
  j["baseline"] = {{"i_max", s.baseline.i_max},
                   {"bg_rate_init", s.baseline.bg_rate_init},
                   {"bg_var_init", s.baseline.bg_var_init},
                   {"em_enabled", s.baseline.em_enabled},
                   {"omp_budget", s.baseline.omp_budget},
                   {"omp_threshold_scale", s.baseline.omp_threshold_scale}};
  j["optimizer"] = {{"prior_var", s.optimizer.prior_var},
                    {"noise_var", s.optimizer.noise_var},
                    {"learning_rate", s.optimizer.learning_rate},
                    {"steps", s.optimizer.steps},
                    {"beta1", s.optimizer.beta1},
                    {"beta2", s.optimizer.beta2},
                    {"adam_eps", s.optimizer.adam_eps},
                    {"round_threshold", s.optimizer.round_threshold},
                    {"reg", s.optimizer.reg}};
  j["schemes"] = s.schemes;
  j["algorithms"] = s.algorithms;
  j["axis"] = axis_name(s.axis);
  j["sweep_values"] = s.sweep_values;
  j["seeds"] = s.seeds;
  j["master_seed"] = s.master_seed;
  j["threads"] = s.threads;
  j["out_prefix"] = s.out_prefix;
  return j.dump(2);
}

namespace {

SystemConfig apply_axis(const ExperimentSpec& spec, double value) {
  SystemConfig sys = spec.system;
  switch (spec.axis) {
    case SweepAxis::kSnrDb:
      sys.snr_db = value;
      break;
    case SweepAxis::kUsers: {
      // Group count scales with K, preserving the configured group size.
      const int group_size =
          std::max(1, spec.system.n_users / std::max(1, spec.system.n_groups));
      sys.n_users = static_cast<int>(std::lround(value));
      sys.n_groups = std::max(1, sys.n_users / group_size);
      break;
    }
    case SweepAxis::kPilotRatio:
      break;  // applied at allocation time
  }
  return sys;
}

PilotAllocation make_allocation(const std::string& scheme, const SystemConfig& sys,
                                const std::vector<Eigen::Vector3d>& positions,
                                const DftOperators& ops, const ExperimentSpec& spec,
                                double pilot_ratio, std::uint64_t cell_seed) {
  Rng pilot_rng(derive_seed(cell_seed, 3));
  const PilotScheme kind = scheme_from_name(scheme);
  if (kind != PilotScheme::kGroupedCdm)
    return assemble_pilots(kind, IMat(), {}, sys, pilot_rng);

  const auto groups = group_users(positions, sys.n_groups);
  IMat sel = pilot_ratio > 0.0
                 ? thinned_selection(sys.n_subcarriers, groups, pilot_ratio)
                 : run_interleaved_selection(sys.n_subcarriers, groups);
  PilotAllocation alloc = assemble_pilots(kind, sel, groups, sys, pilot_rng);
  if (scheme == "nfdcdm-optimized") {
    OptimizerConfig oc = spec.optimizer;
    oc.noise_var = sys.noise_var();
    const IMat opt =
        optimize_pattern(uniform_relaxed_init(sys.n_subcarriers, sys.n_groups),
                         alloc.groups, ops, alloc.pilot_power, oc);
    alloc = assemble_pilots(kind, opt, groups, sys, pilot_rng);
  }
  return alloc;
}

std::vector<CMat> make_received(const ChannelRealization& ch,
                                const PilotAllocation& alloc, const SystemConfig& sys,
                                Rng& noise_rng) {
  std::vector<CMat> y(alloc.n_symbols,
                      CMat::Zero(sys.n_subcarriers, sys.antennas()));
  for (int k = 0; k < sys.n_users; ++k) {
    const int sym = alloc.groups[alloc.group_of_user[k]].symbol;
    y[sym].noalias() += alloc.u[k].asDiagonal() * ch.h[k];
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(sys.noise_var() / 2.0);
  for (CMat& ys : y)
    for (Eigen::Index c = 0; c < ys.cols(); ++c)
      for (Eigen::Index r = 0; r < ys.rows(); ++r)
        ys(r, c) += cplx(scale * normal(noise_rng), scale * normal(noise_rng));
  return y;
}

void run_cell(const ExperimentSpec& spec, const std::string& scheme,
              std::size_t value_index, int seed_index, ResultRecord* out) {
  const double value = spec.sweep_values[value_index];
  const std::uint64_t cell =
      (static_cast<std::uint64_t>(value_index) << 32) |
      static_cast<std::uint64_t>(seed_index);
  const std::uint64_t cell_seed = derive_seed(spec.master_seed, cell);
  const std::size_t n_algos = spec.algorithms.size();

  for (std::size_t a = 0; a < n_algos; ++a) {
    out[a] = ResultRecord{};
    out[a].scheme = scheme;
    out[a].algorithm = spec.algorithms[a];
    out[a].sweep_value = value;
    out[a].seed = static_cast<std::uint64_t>(seed_index);
  }

  try {
    const SystemConfig sys = apply_axis(spec, value);
    sys.validate();
    const DftOperators ops = DftOperators::make(sys);

    Rng scene_rng(derive_seed(cell_seed, 1));
    const ChannelRealization ch = realize_channels(spec.scene, sys, ops, scene_rng);
    Rng position_rng(derive_seed(cell_seed, 1));
    const Scene scene = generate_scene(spec.scene, sys, position_rng);

    const double ratio = spec.axis == SweepAxis::kPilotRatio ? value : -1.0;
    const PilotAllocation alloc = make_allocation(scheme, sys, scene.user_positions,
                                                  ops, spec, ratio, cell_seed);
    Rng noise_rng(derive_seed(cell_seed, 2));
    const std::vector<CMat> y = make_received(ch, alloc, sys, noise_rng);

    for (std::size_t a = 0; a < n_algos; ++a) {
      ResultRecord& rec = out[a];
      const auto start = std::chrono::steady_clock::now();
      try {
        if (rec.algorithm == "turbo-mrf") {
          const auto hyper =
              HyperParams::defaults(sys.n_users, sys.n_taps, sys.n_subarrays);
          const EstimatorResult res =
              run_turbo_mrf(y, alloc, ops, sys, spec.estimator, hyper, &ch.h);
          rec.nmse = nmse(res.h_hat, ch.h);
          rec.iterations = res.diag.iterations_to_converge > 0
                               ? res.diag.iterations_to_converge
                               : spec.estimator.i_max;
          rec.clamp_flags = res.diag.total_clamp_flags;
        } else if (rec.algorithm == "vamp-bg") {
          const EstimatorResult res =
              vamp_bg_estimate(y, alloc, ops, sys, spec.baseline, &ch.h);
          rec.nmse = nmse(res.h_hat, ch.h);
          rec.iterations = res.diag.iterations_to_converge > 0
                               ? res.diag.iterations_to_converge
                               : spec.baseline.i_max;
          rec.clamp_flags = res.diag.total_clamp_flags;
        } else if (rec.algorithm == "lmmse") {
          rec.nmse = nmse(lmmse_estimate(y, alloc, ops, sys), ch.h);
          rec.iterations = 1;
        } else if (rec.algorithm == "lmmse-genie") {
          rec.nmse = nmse(lmmse_genie_estimate(y, alloc, ops, sys, ch.x), ch.h);
          rec.iterations = 1;
        } else if (rec.algorithm == "omp") {
          rec.nmse = nmse(omp_estimate(y, alloc, ops, sys, spec.baseline), ch.h);
          rec.iterations = 1;
        } else {
          throw std::invalid_argument("unknown algorithm: " + rec.algorithm);
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
    }
  } catch (const std::exception& e) {
    for (std::size_t a = 0; a < n_algos; ++a) out[a].error = e.what();
  }
}

}  // namespace

std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec) {
  if (spec.sweep_values.empty())
    throw std::invalid_argument("run_experiment: empty sweep");
  if (spec.seeds < 1) throw std::invalid_argument("run_experiment: seeds < 1");

  struct Task {
    std::size_t scheme_index;
    std::size_t value_index;
    int seed_index;
    std::size_t record_offset;
  };
  const std::size_t n_algos = spec.algorithms.size();
  std::vector<Task> tasks;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    for (std::size_t v = 0; v < spec.sweep_values.size(); ++v) {
      for (int seed = 0; seed < spec.seeds; ++seed) {
        tasks.push_back({s, v, seed, offset});
        offset += n_algos;
      }
    }
  }
  std::vector<ResultRecord> records(offset);

  const unsigned requested = spec.threads > 0
                                 ? static_cast<unsigned>(spec.threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      std::min<std::size_t>(requested, tasks.size()) > 0
          ? static_cast<unsigned>(std::min<std::size_t>(requested, tasks.size()))
          : 1u;

  auto worker = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next.fetch_add(1); i < tasks.size();
         i = next.fetch_add(1)) {
      const Task& t = tasks[i];
      run_cell(spec, spec.schemes[t.scheme_index], t.value_index, t.seed_index,
               records.data() + t.record_offset);
    }
  };

  std::atomic<std::size_t> next{0};
  if (n_threads <= 1) {
    worker(next);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i)
      pool.emplace_back([&] { worker(next); });
    for (auto& th : pool) th.join();
  }
  return records;
}

std::string records_to_csv(const std::vector<ResultRecord>& records) {
  // Wall time is kept out of the file so identical runs emit identical bytes.
  std::ostringstream out;
  out << "# xlce-results-v1\n";
  out << "scheme,algorithm,sweep_value,seed,nmse,iterations,clamp_flags,error\n";
  for (const auto& r : records) {
    out << r.scheme << ',' << r.algorithm << ',' << format_double(r.sweep_value)
        << ',' << r.seed << ',' << format_double(r.nmse) << ',' << r.iterations
        << ',' << r.clamp_flags << ',' << r.error << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "# xlce-aggregate-v1\n";
  out << "scheme,algorithm,sweep_value,n,median_nmse_db,mean_nmse_db\n";
  std::vector<std::tuple<std::string, std::string, double>> order;
  std::map<std::tuple<std::string, std::string, double>, std::vector<double>> cells;
  for (const auto& r : records) {
    if (!r.error.empty()) continue;
    const auto key = std::make_tuple(r.scheme, r.algorithm, r.sweep_value);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.nmse);
  }
  for (const auto& key : order) {
    const auto& vals = cells.at(key);
    double mean_db = 0.0;
    for (double v : vals) mean_db += 10.0 * std::log10(v);
    mean_db /= static_cast<double>(vals.size());
    out << std::get<0>(key) << ',' << std::get<1>(key) << ','
        << format_double(std::get<2>(key)) << ',' << vals.size() << ','
        << format_double(median_db(vals)) << ',' << format_double(mean_db) << '\n';
  }
  return out.str();
}

std::string cdf_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "# xlce-cdf-v1\n";
  out << "scheme,algorithm,nmse_db,prob\n";
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : records) {
    if (!r.error.empty()) continue;
    const auto key = std::make_pair(r.scheme, r.algorithm);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.nmse);
  }
  for (const auto& key : order) {
    auto vals = cells.at(key);
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      out << key.first << ',' << key.second << ','
          << format_double(10.0 * std::log10(vals[i])) << ','
          << format_double(static_cast<double>(i + 1) /
                           static_cast<double>(vals.size()))
          << '\n';
    }
  }
  return out.str();
}

}  // namespace xlce
