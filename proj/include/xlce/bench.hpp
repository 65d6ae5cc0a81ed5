// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: scenario configs, sweep axes, Monte Carlo
// seeding, deterministic worker pool, metric aggregation and CSV/JSON output.

#pragma once

#include <optional>
#include <string>

#include "xlce/baselines.hpp"
#include "xlce/channel.hpp"
#include "xlce/estimator.hpp"
#include "xlce/optimizer.hpp"
#include "xlce/pilots.hpp"

namespace xlce {

enum class SweepAxis { kSnrDb, kUsers, kPilotRatio };

// Scheme/algorithm labels as they appear in configs and CSV output.
// Schemes: nfdcdm, nfdcdm-optimized, ocdm, srfdm, nocdm, nr-orthogonal.
// Algorithms: turbo-mrf, vamp-bg, lmmse, lmmse-genie, omp.
struct ExperimentSpec {
  SystemConfig system;
  SceneConfig scene;
  EstimatorConfig estimator;
  BaselineConfig baseline;
  OptimizerConfig optimizer;
  std::vector<std::string> schemes = {"nfdcdm"};
  std::vector<std::string> algorithms = {"turbo-mrf", "vamp-bg", "lmmse"};
  SweepAxis axis = SweepAxis::kSnrDb;
  std::vector<double> sweep_values = {0, 5, 10, 15, 20};
  int seeds = 20;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string out_prefix = "results";
};

struct ResultRecord {
  std::string scheme;
  std::string algorithm;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  double nmse = 0.0;
  int iterations = 0;      // iterations to converge (1 for one-shot estimators)
  double wall_time_s = 0.0;
  int clamp_flags = 0;
  std::string error;       // nonempty when the cell failed; run continues
};

// JSON (de)serialization of the spec; CLI flag overrides are applied on top.
ExperimentSpec spec_from_json(const std::string& text);
std::string spec_to_json(const ExperimentSpec& spec);

// Runs every (sweep value, seed) cell in a worker pool; deterministic record
// order regardless of thread count.
std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec);

// results CSV: one row per record, fixed versioned header.
std::string records_to_csv(const std::vector<ResultRecord>& records);

// Aggregated CSV: per (scheme, algorithm, sweep value) dB-domain median and
// mean NMSE over seeds.
std::string aggregate_csv(const std::vector<ResultRecord>& records);

// Empirical CDF per (scheme, algorithm): sorted NMSE with cumulative prob.
std::string cdf_csv(const std::vector<ResultRecord>& records);

// Median in the dB domain (geometric): 10*log10 applied before the median.
double median_db(std::vector<double> values);

// Deterministic float formatting used for every CSV field (shortest
// round-trip representation, C locale).
std::string format_double(double v);

}  // namespace xlce
