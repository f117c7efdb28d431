#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spais/baselines.hpp"
#include "spais/engine.hpp"
#include "spais/environment.hpp"
#include "spais/proposal.hpp"

namespace spais {

enum class Method { kMonteCarlo, kCrossEntropy, kSpais };

std::string to_string(Method method);
/// Accepts "mc", "cem" and "spais"; throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);

struct SpaisSettings {
  std::size_t n_particles = 500;
  double beta = 1e-2;
  double learning_rate = 1e-3;
  bool refresh_particles = true;
  PretrainConfig pretrain{};
};

struct CemSettings {
  std::size_t n_per_iteration = 500;
  double elite_frac = 0.1;
  double smoothing_alpha = 0.7;
  double std_floor_ratio = 0.1;
};

struct GroundTruthSettings {
  std::size_t n_samples = 10'000'000;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir = "gt_cache";
};

/// Everything a run depends on. Serialized verbatim into result files.
struct ExperimentConfig {
  std::string env_name = "toy";
  nlohmann::json env_params = nlohmann::json::object();
  Method method = Method::kSpais;
  SpaisSettings spais{};
  CemSettings cem{};
  GroundTruthSettings ground_truth{};
  std::size_t sample_budget = 50'000;
  std::size_t n_trials = 10;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "spais_out";
  std::size_t threads = 1;

  void validate() const;
  std::unique_ptr<Environment> make_env() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Output directory from SPAIS_OUTPUT_DIR, or "spais_out".
std::filesystem::path default_output_dir();

struct GroundTruth {
  double mu = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_failures = 0;
  std::uint64_t seed = 0;
  std::string env_hash;
  bool from_cache = false;
};

std::filesystem::path ground_truth_cache_path(const Environment& env, const GroundTruthSettings& settings);

/// MC estimate of mu cached as JSON under settings.cache_dir. A cache file
/// whose environment hash, sample count or seed disagrees is recomputed.
GroundTruth ground_truth(const Environment& env, const GroundTruthSettings& settings,
                         std::size_t threads = 1);
/// Cache lookup only.
std::optional<GroundTruth> load_ground_truth(const Environment& env, const GroundTruthSettings& settings);

/// Result of one estimation with any of the three methods.
struct MethodOutcome {
  EstimateResult estimate;
  std::optional<GaussianProposalParams> proposal;  // spais
  std::optional<CEMProposal> cem_proposal;         // cem
};

/// Runs config.method on env with budget config.sample_budget and the given
/// seed. SPAIS pretrains first with a seed derived from `seed`.
MethodOutcome run_method(const ExperimentConfig& config, const Environment& env, std::uint64_t seed,
                         const SampleObserver& observer = {});

/// Seed of trial i.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial);

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mu_hat = 0.0;
  double eps_rel = 0.0;
  double eps_abs = 0.0;
  std::size_t n_samples = 0;
};

struct TrialSummary {
  double mu_truth = 0.0;
  std::vector<TrialRecord> trials;
  std::size_t n_ok = 0;
  double eps_rel_mean = 0.0;
  double eps_rel_std = 0.0;
  double eps_abs_mean = 0.0;
  double eps_abs_std = 0.0;
};

/// Error statistics of the successful trials; std is the sample std.
TrialSummary summarize(std::vector<TrialRecord> trials, double mu_truth);
TrialSummary summarize_estimates(std::span<const double> mu_hats, double mu_truth);

using TrialObserverFactory = std::function<SampleObserver(std::size_t trial)>;

/// Runs config.n_trials independent estimations and writes per-trial JSON,
/// per-trial metrics CSV and summary.csv into `directory`.
TrialSummary run_trials(const ExperimentConfig& config, double mu_truth,
                        const std::filesystem::path& directory,
                        const TrialObserverFactory& observers = {});

/// Metrics CSV: method,iteration,n_samples_total,mu_hat_so_far,acceptance_rate,mean_loss,ess.
void write_metrics_csv(std::ostream& out, Method method, const EstimateResult& result);
void write_summary_csv(std::ostream& out, const TrialSummary& summary);

/// Result JSON for one estimation.
nlohmann::json result_json(const ExperimentConfig& config, const EstimateResult& result,
                           std::uint64_t seed, std::optional<double> mu_truth);

struct CalibrationStep {
  double value = 0.0;
  double mu = 0.0;
  std::size_t failures = 0;
};

struct CalibrationResult {
  double value = 0.0;
  double mu = 0.0;
  std::vector<CalibrationStep> history;
};

/// Bisects (geometrically) the environment parameter `key` in [lo, hi] so
/// that the n-sample MC estimate approaches `target`. Assumes the failure
/// probability increases with the parameter.
CalibrationResult calibrate(const std::string& env_name, const nlohmann::json& base_params,
                            const std::string& key, double target, double lo, double hi,
                            std::size_t n_samples, std::size_t steps, std::uint64_t seed,
                            std::size_t threads = 1);

}  // namespace spais
