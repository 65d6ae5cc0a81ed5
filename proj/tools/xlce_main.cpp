// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: sweep-snr, sweep-users, sweep-pilot-ratio, cdf,
// optimize-pilots. Each sweep writes <out>_records.csv and
// <out>_aggregate.csv; cdf additionally writes <out>_cdf.csv.

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xlce/bench.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct CommonArgs {
  std::string config_path;
  std::vector<double> values;
  std::vector<std::string> schemes;
  std::vector<std::string> algorithms;
  int seeds = -1;
  std::uint64_t master_seed = 0;
  bool master_seed_set = false;
  int threads = -1;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  std::string out_prefix;
};

// Shared flags for every experiment-running subcommand.
void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment spec JSON file");
  cmd->add_option("--schemes", args->schemes, "pilot schemes, comma separated")
      ->delimiter(',');
  cmd->add_option("--algos", args->algorithms, "algorithms, comma separated")
      ->delimiter(',');
  cmd->add_option("--seeds", args->seeds, "Monte Carlo seeds per sweep point");
  cmd->add_option("--master-seed", args->master_seed, "root RNG seed")
      ->each([args](const std::string&) { args->master_seed_set = true; });
  cmd->add_option("--threads", args->threads, "worker threads (0 = all cores)");
  cmd->add_option("--snr-db", args->snr_db, "operating SNR in dB");
  cmd->add_option("--out", args->out_prefix, "output file prefix");
}

xlce::ExperimentSpec load_spec(const CommonArgs& args, xlce::SweepAxis axis) {
  xlce::ExperimentSpec spec;
  if (!args.config_path.empty())
    spec = xlce::spec_from_json(read_file(args.config_path));
  spec.axis = axis;
  if (!args.values.empty()) spec.sweep_values = args.values;
  if (!args.schemes.empty()) spec.schemes = args.schemes;
  if (!args.algorithms.empty()) spec.algorithms = args.algorithms;
  if (args.seeds >= 0) spec.seeds = args.seeds;
  if (args.master_seed_set) spec.master_seed = args.master_seed;
  if (args.threads >= 0) spec.threads = args.threads;
  if (!std::isnan(args.snr_db)) spec.system.snr_db = args.snr_db;
  if (!args.out_prefix.empty()) spec.out_prefix = args.out_prefix;
  return spec;
}

int run_sweep(const xlce::ExperimentSpec& spec, bool with_cdf) {
  const auto records = xlce::run_experiment(spec);
  write_file(spec.out_prefix + "_records.csv", xlce::records_to_csv(records));
  write_file(spec.out_prefix + "_aggregate.csv", xlce::aggregate_csv(records));
  if (with_cdf) write_file(spec.out_prefix + "_cdf.csv", xlce::cdf_csv(records));

  std::size_t failed = 0;
  for (const auto& r : records)
    if (!r.error.empty()) ++failed;
  std::cout << records.size() << " records -> " << spec.out_prefix
            << "_records.csv";
  if (failed > 0) std::cout << " (" << failed << " failed cells)";
  std::cout << "\n" << xlce::aggregate_csv(records);
  return 0;
}

int run_optimize(const CommonArgs& args, int steps, double lr,
                 const std::string& out_path) {
  xlce::ExperimentSpec spec;
  if (!args.config_path.empty())
    spec = xlce::spec_from_json(read_file(args.config_path));
  if (args.master_seed_set) spec.master_seed = args.master_seed;
  if (!std::isnan(args.snr_db)) spec.system.snr_db = args.snr_db;
  if (steps > 0) spec.optimizer.steps = steps;
  if (lr > 0) spec.optimizer.learning_rate = lr;

  const xlce::SystemConfig& sys = spec.system;
  sys.validate();
  const xlce::DftOperators ops = xlce::DftOperators::make(sys);

  xlce::Rng scene_rng(xlce::derive_seed(spec.master_seed, 1));
  const xlce::Scene scene = xlce::generate_scene(spec.scene, sys, scene_rng);
  const auto groups = xlce::group_users(scene.user_positions, sys.n_groups);

  xlce::Rng pilot_rng(xlce::derive_seed(spec.master_seed, 3));
  xlce::PilotAllocation alloc = xlce::assemble_pilots(
      xlce::PilotScheme::kGroupedCdm,
      xlce::run_interleaved_selection(sys.n_subcarriers, groups), groups, sys,
      pilot_rng);

  xlce::OptimizerConfig oc = spec.optimizer;
  oc.noise_var = sys.noise_var();  // objective evaluated at the operating SNR
  xlce::OptimizeTrace trace;
  const xlce::IMat sel = xlce::optimize_pattern(
      xlce::uniform_relaxed_init(sys.n_subcarriers, sys.n_groups), alloc.groups,
      ops, alloc.pilot_power, oc, &trace);

  xlce::Rng reassemble_rng(xlce::derive_seed(spec.master_seed, 3));
  const xlce::PilotAllocation optimized = xlce::assemble_pilots(
      xlce::PilotScheme::kGroupedCdm, sel, groups, sys, reassemble_rng);
  write_file(out_path, xlce::allocation_to_json(optimized));

  const double start_objective =
      trace.objective.empty() ? trace.final_objective : trace.objective.front();
  std::cout << "objective: start " << xlce::format_double(start_objective)
            << ", relaxed " << xlce::format_double(trace.final_objective)
            << ", rounded " << xlce::format_double(trace.rounded_objective)
            << "\npattern -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-user uplink channel estimation benchmark"};
  app.require_subcommand(1);

  CommonArgs snr_args, users_args, ratio_args, cdf_args, opt_args;

  auto* snr = app.add_subcommand("sweep-snr", "NMSE vs SNR sweep");
  add_common(snr, &snr_args);
  snr->add_option("--values", snr_args.values, "SNR points in dB")
      ->delimiter(',');

  auto* users = app.add_subcommand("sweep-users", "NMSE vs user count sweep");
  add_common(users, &users_args);
  users->add_option("--values", users_args.values, "user counts")
      ->delimiter(',');

  auto* ratio = app.add_subcommand("sweep-pilot-ratio",
                                   "NMSE vs pilot subcarrier ratio sweep");
  add_common(ratio, &ratio_args);
  ratio->add_option("--values", ratio_args.values,
                    "kept fraction of each comb, in (0, 1]")
      ->delimiter(',');

  auto* cdf = app.add_subcommand(
      "cdf", "per-seed NMSE distribution at a fixed operating point");
  add_common(cdf, &cdf_args);

  int opt_steps = 0;
  double opt_lr = 0.0;
  std::string opt_out = "pattern.json";
  auto* opt = app.add_subcommand("optimize-pilots",
                                 "gradient-based pilot pattern design");
  opt->add_option("--config", opt_args.config_path, "experiment spec JSON file");
  opt->add_option("--master-seed", opt_args.master_seed, "root RNG seed")
      ->each([&opt_args](const std::string&) { opt_args.master_seed_set = true; });
  opt->add_option("--snr-db", opt_args.snr_db, "operating SNR in dB");
  opt->add_option("--steps", opt_steps, "optimizer steps");
  opt->add_option("--learning-rate", opt_lr, "Adam learning rate");
  opt->add_option("--out", opt_out, "output pattern JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (snr->parsed())
      return run_sweep(load_spec(snr_args, xlce::SweepAxis::kSnrDb), false);
    if (users->parsed())
      return run_sweep(load_spec(users_args, xlce::SweepAxis::kUsers), false);
    if (ratio->parsed())
      return run_sweep(load_spec(ratio_args, xlce::SweepAxis::kPilotRatio),
                       false);
    if (cdf->parsed()) {
      xlce::ExperimentSpec spec = load_spec(cdf_args, xlce::SweepAxis::kSnrDb);
      // One operating point: the configured SNR.
      spec.sweep_values = {spec.system.snr_db};
      return run_sweep(spec, true);
    }
    if (opt->parsed()) return run_optimize(opt_args, opt_steps, opt_lr, opt_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
