// Command-line front end: estimate, ground-truth, trials, export-traj, calibrate.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spais/harness.hpp"

namespace {

using spais::ExperimentConfig;
using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> env;
  std::vector<std::string> params;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  std::optional<std::string> gt_cache;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config JSON");
  cmd->add_option("--env", o.env, "Environment: toy, pendulum, crosswalk, collision");
  cmd->add_option("--param", o.params, "Environment parameter override KEY=VALUE (VALUE is JSON)");
  cmd->add_option("--threads", o.threads, "Worker thread cap (0 = hardware concurrency)");
  cmd->add_option("--out", o.out, "Output directory (default: $SPAIS_OUTPUT_DIR or ./spais_out)");
  cmd->add_option("--gt-cache", o.gt_cache, "Ground-truth cache directory");
}

ExperimentConfig build_config(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? spais::config_from_json(json::object())
                                             : spais::load_config(o.config_path);
  if (o.env && *o.env != c.env_name) {
    c.env_name = *o.env;
    c.env_params = json::object();
  }
  for (const auto& kv : o.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--param expects KEY=VALUE, got '" + kv + "'");
    std::string pointer = "/" + kv.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    json value;
    try {
      value = json::parse(kv.substr(eq + 1));
    } catch (const json::parse_error&) {
      throw std::invalid_argument("--param value for '" + kv.substr(0, eq) + "' is not valid JSON");
    }
    c.env_params[json::json_pointer(pointer)] = value;
  }
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.output_dir = *o.out;
  if (o.gt_cache) c.ground_truth.cache_dir = *o.gt_cache;
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Failure probability estimation with state-dependent adaptive importance sampling"};
  app.require_subcommand(1);

  CommonOptions est_common, gt_common, trials_common, export_common, cal_common;

  auto* estimate = app.add_subcommand("estimate", "Run one estimator once");
  add_common(estimate, est_common);
  std::optional<std::string> est_method;
  std::optional<std::size_t> est_n;
  std::uint64_t est_seed = 0;
  std::string est_save_proposal;
  estimate->add_option("--method", est_method, "mc, cem or spais");
  estimate->add_option("--n,--budget", est_n, "Sample budget");
  estimate->add_option("--seed", est_seed, "Seed")->required();
  estimate->add_option("--save-proposal", est_save_proposal, "Write the final SPAIS proposal checkpoint here");

  auto* gt = app.add_subcommand("ground-truth", "Compute (or load) the cached Monte Carlo ground truth");
  add_common(gt, gt_common);
  std::optional<std::size_t> gt_n;
  std::optional<std::uint64_t> gt_seed;
  gt->add_option("--n", gt_n, "Number of Monte Carlo samples (default 1e7)");
  gt->add_option("--seed", gt_seed, "Ground-truth seed");

  auto* trials = app.add_subcommand("trials", "Repeated estimation against the ground truth");
  add_common(trials, trials_common);
  std::optional<std::string> tr_method;
  std::optional<std::size_t> tr_budget, tr_trials, tr_gt_n;
  std::uint64_t tr_seed = 0;
  bool tr_compute_gt = false;
  trials->add_option("--method", tr_method, "mc, cem or spais");
  trials->add_option("--budget", tr_budget, "Samples per trial");
  trials->add_option("--trials", tr_trials, "Number of trials");
  trials->add_option("--seed", tr_seed, "Master seed")->required();
  trials->add_option("--gt-samples", tr_gt_n, "Ground-truth sample count");
  trials->add_flag("--compute-gt", tr_compute_gt, "Compute the ground truth if it is not cached");

  auto* exporter = app.add_subcommand("export-traj", "Dump sampled trajectories to CSV");
  add_common(exporter, export_common);
  std::string ex_method = "mc";
  std::optional<std::size_t> ex_budget;
  std::size_t ex_count = 200;
  std::uint64_t ex_seed = 0;
  std::string ex_output;
  exporter->add_option("--method", ex_method, "mc, cem or spais (adaptive methods are trained first)");
  exporter->add_option("--budget", ex_budget, "Training budget for cem/spais");
  exporter->add_option("--count", ex_count, "Number of trajectories to export");
  exporter->add_option("--seed", ex_seed, "Seed")->required();
  exporter->add_option("--output", ex_output, "CSV path (default <out>/<env>_<method>_trajectories.csv)");

  auto* cal = app.add_subcommand("calibrate", "Search an environment parameter for a target failure probability");
  add_common(cal, cal_common);
  std::string cal_key;
  double cal_target = 2e-5, cal_lo = 0.0, cal_hi = 0.0;
  std::size_t cal_n = 1'000'000, cal_steps = 12;
  std::uint64_t cal_seed = 0;
  cal->add_option("--key", cal_key, "Parameter name (dots for nesting, e.g. idm.min_gap)")->required();
  cal->add_option("--target", cal_target, "Target failure probability");
  cal->add_option("--lo", cal_lo, "Lower bound")->required();
  cal->add_option("--hi", cal_hi, "Upper bound")->required();
  cal->add_option("--n", cal_n, "Monte Carlo samples per evaluation");
  cal->add_option("--steps", cal_steps, "Bisection steps");
  cal->add_option("--seed", cal_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (estimate->parsed()) {
      auto config = build_config(est_common);
      if (est_method) config.method = spais::parse_method(*est_method);
      if (est_n) config.sample_budget = *est_n;
      config.master_seed = est_seed;
      config.validate();
      const auto env = config.make_env();
      const auto outcome = spais::run_method(config, *env, est_seed);
      const auto cached = spais::load_ground_truth(*env, config.ground_truth);
      const auto result =
          spais::result_json(config, outcome.estimate, est_seed, cached ? std::optional(cached->mu) : std::nullopt);
      const std::string stem = config.env_name + "_" + spais::to_string(config.method) + "_seed" + std::to_string(est_seed);
      write_text(config.output_dir / (stem + ".json"), result.dump(2) + "\n");
      std::ostringstream metrics;
      spais::write_metrics_csv(metrics, config.method, outcome.estimate);
      write_text(config.output_dir / (stem + "_metrics.csv"), metrics.str());
      if (!est_save_proposal.empty() && outcome.proposal) spais::save_checkpoint(*outcome.proposal, est_save_proposal);
      std::cout << "mu_hat " << outcome.estimate.mu_hat << "\nstderr " << outcome.estimate.std_error
                << "\nn_samples " << outcome.estimate.n_samples << "\nfailures " << outcome.estimate.n_failures
                << "\ness " << outcome.estimate.ess << '\n';
      if (cached) {
        std::cout << "mu_truth " << cached->mu << "\neps_rel " << result["eps_rel"].get<double>() << '\n';
      }
      std::cout << "wrote " << (config.output_dir / (stem + ".json")).string() << '\n';
    } else if (gt->parsed()) {
      auto config = build_config(gt_common);
      if (gt_n) config.ground_truth.n_samples = *gt_n;
      if (gt_seed) config.ground_truth.seed = *gt_seed;
      const auto env = config.make_env();
      const auto result = spais::ground_truth(*env, config.ground_truth, config.threads);
      std::cout << "mu " << result.mu << "\nstderr " << result.std_error << "\nfailures " << result.n_failures
                << "\nn_samples " << result.n_samples << "\ncached " << (result.from_cache ? "yes" : "no")
                << "\nfile " << spais::ground_truth_cache_path(*env, config.ground_truth).string() << '\n';
    } else if (trials->parsed()) {
      auto config = build_config(trials_common);
      if (tr_method) config.method = spais::parse_method(*tr_method);
      if (tr_budget) config.sample_budget = *tr_budget;
      if (tr_trials) config.n_trials = *tr_trials;
      if (tr_gt_n) config.ground_truth.n_samples = *tr_gt_n;
      config.master_seed = tr_seed;
      config.validate();
      const auto env = config.make_env();
      auto truth = spais::load_ground_truth(*env, config.ground_truth);
      if (!truth) {
        if (!tr_compute_gt) {
          std::cerr << "error: no cached ground truth for " << config.env_name << " at "
                    << spais::ground_truth_cache_path(*env, config.ground_truth).string()
                    << "; run ground-truth first or pass --compute-gt\n";
          return 2;
        }
        truth = spais::ground_truth(*env, config.ground_truth, config.threads);
      }
      const auto dir = config.output_dir / ("trials_" + config.env_name + "_" + spais::to_string(config.method) +
                                            "_seed" + std::to_string(tr_seed));
      const auto summary = spais::run_trials(config, truth->mu, dir);
      std::cout << "mu_truth " << truth->mu << "\ntrials_ok " << summary.n_ok << "/" << summary.trials.size()
                << "\neps_rel " << summary.eps_rel_mean << " +- " << summary.eps_rel_std << "\neps_abs "
                << summary.eps_abs_mean << " +- " << summary.eps_abs_std << "\nwrote "
                << (dir / "summary.csv").string() << '\n';
      if (summary.n_ok == 0) return 1;
    } else if (exporter->parsed()) {
      auto config = build_config(export_common);
      config.method = spais::parse_method(ex_method);
      if (ex_budget) config.sample_budget = *ex_budget;
      config.master_seed = ex_seed;
      const auto env = config.make_env();
      std::vector<spais::Trajectory> trajectories;
      std::vector<std::uint64_t> seeds(ex_count);
      for (std::size_t i = 0; i < ex_count; ++i) seeds[i] = spais::derive_seed(ex_seed, 0xE7, i);
      if (config.method == spais::Method::kMonteCarlo) {
        trajectories = spais::rollout_batch(*env, spais::NominalSampler(*env), seeds, config.threads);
      } else {
        config.validate();
        const auto outcome = spais::run_method(config, *env, ex_seed);
        if (outcome.proposal) {
          trajectories = spais::rollout_batch(*env, spais::GaussianProposal(*outcome.proposal), seeds, config.threads);
        } else {
          trajectories = spais::rollout_batch(*env, *outcome.cem_proposal, seeds, config.threads);
        }
      }
      const std::filesystem::path path =
          ex_output.empty() ? config.output_dir / (config.env_name + "_" + ex_method + "_trajectories.csv")
                            : std::filesystem::path(ex_output);
      std::ostringstream csv;
      spais::write_trajectories_csv(csv, trajectories);
      write_text(path, csv.str());
      std::cout << "wrote " << trajectories.size() << " trajectories to " << path.string() << '\n';
    } else if (cal->parsed()) {
      auto config = build_config(cal_common);
      const auto result = spais::calibrate(config.env_name, config.env_params, cal_key, cal_target, cal_lo, cal_hi,
                                           cal_n, cal_steps, cal_seed, config.threads);
      for (const auto& s : result.history) {
        std::cout << cal_key << "=" << s.value << " mu=" << s.mu << " failures=" << s.failures << '\n';
      }
      std::cout << "best " << cal_key << "=" << result.value << " mu=" << result.mu << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
