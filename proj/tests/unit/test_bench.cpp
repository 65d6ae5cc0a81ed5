// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "xlce/bench.hpp"

using namespace xlce;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.system.n_subcarriers = 32;
  spec.system.n_taps = 4;
  spec.system.n_subarrays = 4;
  spec.system.subarray_size = 2;
  spec.system.n_users = 4;
  spec.system.n_groups = 2;
  spec.scene.cluster_delay_spread = 1.0;  // fits the 4-tap window
  spec.schemes = {"nfdcdm"};
  spec.algorithms = {"lmmse"};
  spec.axis = SweepAxis::kSnrDb;
  spec.sweep_values = {10.0, 20.0};
  spec.seeds = 2;
  spec.threads = 1;
  return spec;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("db median averages the two central values") {
  CHECK(median_db({1e-2, 1e-4}) == doctest::Approx(-30.0));
  CHECK(median_db({1e-3}) == doctest::Approx(-30.0));
  CHECK(median_db({1.0, 1e-2, 1e-4}) == doctest::Approx(-20.0));
  CHECK_THROWS(median_db({}));
}

TEST_CASE("float formatting is shortest round trip") {
  CHECK(format_double(1.5) == "1.5");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-3.0) == "-3");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("spec json round trips byte for byte") {
  ExperimentSpec spec = tiny_spec();
  spec.axis = SweepAxis::kPilotRatio;
  spec.master_seed = 42;
  const std::string a = spec_to_json(spec);
  const std::string b = spec_to_json(spec_from_json(a));
  CHECK(a == b);
}

TEST_CASE("records csv has the versioned header and stable fields") {
  ResultRecord r;
  r.scheme = "nfdcdm";
  r.algorithm = "lmmse";
  r.sweep_value = 10.0;
  r.seed = 3;
  r.nmse = 0.25;
  r.iterations = 1;
  r.wall_time_s = 123.0;  // must not appear in the file
  const std::string csv = records_to_csv({r});
  CHECK(csv ==
        "# xlce-results-v1\n"
        "scheme,algorithm,sweep_value,seed,nmse,iterations,clamp_flags,error\n"
        "nfdcdm,lmmse,10,3,0.25,1,0,\n");
}

TEST_CASE("aggregation reports db median and mean per cell") {
  std::vector<ResultRecord> records;
  for (double n : {1e-2, 1e-4}) {
    ResultRecord r;
    r.scheme = "s";
    r.algorithm = "a";
    r.sweep_value = 5.0;
    r.nmse = n;
    records.push_back(r);
  }
  ResultRecord bad;
  bad.scheme = "s";
  bad.algorithm = "a";
  bad.sweep_value = 5.0;
  bad.nmse = 99.0;
  bad.error = "boom";  // errored cells are excluded from the aggregate
  records.push_back(bad);
  const std::string csv = aggregate_csv(records);
  CHECK(csv ==
        "# xlce-aggregate-v1\n"
        "scheme,algorithm,sweep_value,n,median_nmse_db,mean_nmse_db\n"
        "s,a,5,2,-30,-30\n");
}

TEST_CASE("cdf output is sorted with uniform probability steps") {
  std::vector<ResultRecord> records;
  for (double n : {1e-1, 1e-3, 1e-2}) {
    ResultRecord r;
    r.scheme = "s";
    r.algorithm = "a";
    r.nmse = n;
    records.push_back(r);
  }
  const std::string csv = cdf_csv(records);
  CHECK(csv ==
        "# xlce-cdf-v1\n"
        "scheme,algorithm,nmse_db,prob\n"
        "s,a,-30,0.3333333333333333\n"
        "s,a,-20,0.6666666666666666\n"
        "s,a,-10,1\n");
}

TEST_CASE("experiment output is identical across reruns and thread counts") {
  ExperimentSpec spec = tiny_spec();
  const std::string a = records_to_csv(run_experiment(spec));
  const std::string b = records_to_csv(run_experiment(spec));
  CHECK(a == b);
  spec.threads = 4;
  const std::string c = records_to_csv(run_experiment(spec));
  CHECK(a == c);
  CHECK(a.find("boom") == std::string::npos);
  CHECK(a.find("error") != std::string::npos);  // header only
}

TEST_CASE("every configured algorithm produces a record per cell") {
  ExperimentSpec spec = tiny_spec();
  spec.algorithms = {"turbo-mrf", "vamp-bg", "lmmse", "lmmse-genie", "omp"};
  spec.estimator.i_max = 3;
  spec.baseline.i_max = 3;
  spec.sweep_values = {15.0};
  spec.seeds = 1;
  const auto records = run_experiment(spec);
  REQUIRE(records.size() == 5);
  for (const auto& r : records) {
    CAPTURE(r.algorithm);
    CHECK(r.error.empty());
    CHECK(std::isfinite(r.nmse));
    CHECK(r.nmse > 0.0);
    CHECK(r.wall_time_s >= 0.0);
  }
}

TEST_CASE("user axis scales the group count with the user count") {
  ExperimentSpec spec = tiny_spec();
  spec.axis = SweepAxis::kUsers;
  spec.sweep_values = {2.0, 6.0};  // group size stays n_users / n_groups = 2
  spec.seeds = 1;
  const auto records = run_experiment(spec);
  REQUIRE(records.size() == 2);
  for (const auto& r : records) CHECK(r.error.empty());
}

TEST_CASE("pilot ratio axis thins the selection") {
  // Ratio 1 keeps the full run-interleaved layout, so with the cell seed held
  // fixed
  // (single sweep value, same index) the run must reproduce the snr-db axis
  // run at the same operating point exactly.
  ExperimentSpec spec = tiny_spec();
  spec.axis = SweepAxis::kPilotRatio;
  spec.sweep_values = {1.0};
  spec.seeds = 1;
  const auto full = run_experiment(spec);
  REQUIRE(full.size() == 1);
  CHECK(full[0].error.empty());

  ExperimentSpec ref = tiny_spec();
  ref.axis = SweepAxis::kSnrDb;
  ref.sweep_values = {ref.system.snr_db};
  ref.seeds = 1;
  const auto reference = run_experiment(ref);
  REQUIRE(reference.size() == 1);
  CHECK(full[0].nmse == reference[0].nmse);

  // Thinning to half the comb changes the estimate with everything else
  // (channel, noise, codes) held fixed.
  spec.sweep_values = {0.5};
  const auto thin = run_experiment(spec);
  REQUIRE(thin.size() == 1);
  CHECK(thin[0].error.empty());
  CHECK(thin[0].nmse > 0.0);
  CHECK(thin[0].nmse != full[0].nmse);
}

TEST_CASE("unknown algorithm fails the record not the run") {
  ExperimentSpec spec = tiny_spec();
  spec.algorithms = {"lmmse", "nope"};
  spec.sweep_values = {10.0};
  spec.seeds = 1;
  const auto records = run_experiment(spec);
  REQUIRE(records.size() == 2);
  CHECK(records[0].error.empty());
  CHECK(!records[1].error.empty());
}

}  // TEST_SUITE
