#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysid/lti.hpp"
#include "sysid/recovery.hpp"

namespace sysid {

enum class Algorithm {
  OfflineSgd,
  OnlineSgd,
  OnlinePinv,
  OfflineCombined,
  OnlineCombined,
  HoKalman,
};

std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);

enum class ScheduleKind { Linear, Log2 };

struct ExperimentConfig {
  SystemDims dims{3, 1, 1};
  double rho_max = 0.5;
  int truncation = 20;
  std::int64_t n_samples = 10000;          // batch size or stream length
  std::optional<double> eta;               // empty means the Corollary 1 value
  double noise_std = 0.0;
  double input_std = 1.0;
  Algorithm algorithm = Algorithm::OnlineCombined;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t checkpoint_every = 100;
  ScheduleKind schedule = ScheduleKind::Linear;
  std::int64_t n_iters = 0;                // offline algorithms; 0 means n_samples
  std::optional<std::uint64_t> system_seed;  // shared system across seeds when set
  std::filesystem::path output_dir;

  double input_variance() const { return input_std * input_std; }
  double noise_variance() const { return noise_std * noise_std; }
  double resolved_eta() const;
  // Non-empty when an explicit eta exceeds the cap.
  std::string eta_warning() const;
  CheckpointSchedule checkpoint_schedule() const;
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Seed streams derived from each experiment seed.
enum SeedStream : std::uint64_t { kSystemStream = 0, kDataStream = 1, kSgdStream = 2 };

struct TraceRow {
  std::int64_t iter = 0;
  double markov_err = 0.0;
  double a_err = 0.0;
  double c_err = 0.0;
  double d_err = 0.0;

  // a_err + c_err + d_err; NaN when the recovery was skipped.
  double param_err() const { return a_err + c_err + d_err; }
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
  int floor_index = -1;  // first checkpoint of the detected floor, -1 if none
  bool loglog = false;
};

// Least-squares fit of log(error) against iteration (or log iteration).
// The floor starts at the first run of 5 consecutive points within 2x the
// final error; the fit uses the [10%, 90%] window of the points before it.
SlopeFit fit_log_slope(std::span<const double> iterations, std::span<const double> errors,
                       bool loglog);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<TraceRow> trace;
  SlopeFit fit;
  int bound_checks = 0;
  int bound_violations = 0;
  int skipped_checkpoints = 0;
  bool diverged = false;
  std::string message;
};

struct Quantiles {
  double q10 = 0.0;
  double median = 0.0;
  double q90 = 0.0;
};

Quantiles quantiles(std::vector<double> values);

struct SummaryReport {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  Quantiles final_markov_err;
  Quantiles final_param_err;
  Quantiles final_a_err;
  Quantiles final_c_err;
  Quantiles final_d_err;
  double median_slope = 0.0;
  double median_r_squared = 0.0;
  int bound_checks = 0;
  int bound_violations = 0;
  int diverged_seeds = 0;
  std::vector<std::string> warnings;
};

// Runs one seed's pipeline: system, data, estimation, recovery and errors.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// Seeds run in parallel, capped by SYSID_THREADS. When output_dir is set, one
// trace CSV per seed and summary.json are written there.
SummaryReport run_experiment(const ExperimentConfig& cfg);

nlohmann::json summary_to_json(const SummaryReport& report);
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);

struct CompareRow {
  std::int64_t iter = 0;
  double markov_err = 0.0;
  double direct_a_err = 0.0;  // ||A_hat - A||_F of the assembled recovered system
  double hk_a_err = 0.0;      // same for the aligned Ho-Kalman realization
};

struct CompareResult {
  std::uint64_t seed = 0;
  std::vector<CompareRow> rows;
};

// Direct recovery and aligned Ho-Kalman on the same Markov estimates, taken
// from the configured algorithm (online-combined, online-pinv or offline-combined).
CompareResult run_compare_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<CompareResult> run_compare(const ExperimentConfig& cfg);

// Number of worker threads for seeds; SYSID_THREADS caps it.
unsigned seed_threads(std::size_t jobs);

}  // namespace sysid
