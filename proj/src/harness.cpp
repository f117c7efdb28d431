#include "spais/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "spais/csv.hpp"

namespace spais {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument(std::string("unknown key '") + key + "' in " + what);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

json pretrain_json(const PretrainConfig& p) {
  return {{"n_rollouts", p.n_rollouts},
          {"n_epochs", p.n_epochs},
          {"batch_size", p.batch_size},
          {"learning_rate", p.learning_rate},
          {"holdout_fraction", p.holdout_fraction},
          {"max_kl_per_step", p.max_kl_per_step},
          {"std_floor_ratio", p.std_floor_ratio}};
}

void read_pretrain(const json& j, PretrainConfig& p) {
  reject_unknown(j,
                 {"n_rollouts", "n_epochs", "batch_size", "learning_rate", "holdout_fraction",
                  "max_kl_per_step", "std_floor_ratio"},
                 "spais.pretrain");
  read(j, "n_rollouts", p.n_rollouts);
  read(j, "n_epochs", p.n_epochs);
  read(j, "batch_size", p.batch_size);
  read(j, "learning_rate", p.learning_rate);
  read(j, "holdout_fraction", p.holdout_fraction);
  read(j, "max_kl_per_step", p.max_kl_per_step);
  read(j, "std_floor_ratio", p.std_floor_ratio);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  return std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kMonteCarlo: return "mc";
    case Method::kCrossEntropy: return "cem";
    case Method::kSpais: return "spais";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "mc") return Method::kMonteCarlo;
  if (name == "cem") return Method::kCrossEntropy;
  if (name == "spais") return Method::kSpais;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected mc, cem or spais)");
}

void ExperimentConfig::validate() const {
  if (n_trials == 0) throw std::invalid_argument("n_trials must be at least 1");
  if (sample_budget == 0) throw std::invalid_argument("sample_budget must be positive");
  if (method == Method::kSpais && sample_budget < spais.n_particles) {
    throw std::invalid_argument("sample_budget must cover at least one batch of n_particles");
  }
  if (method == Method::kCrossEntropy && sample_budget < cem.n_per_iteration) {
    throw std::invalid_argument("sample_budget must cover at least one CEM iteration");
  }
  if (!(spais.beta > 0.0)) throw std::invalid_argument("spais.beta must be positive");
  make_env();
}

std::unique_ptr<Environment> ExperimentConfig::make_env() const {
  return make_environment(env_name, env_params);
}

json to_json(const ExperimentConfig& c) {
  return {{"environment", {{"name", c.env_name}, {"params", c.make_env()->parameters()}}},
          {"method", to_string(c.method)},
          {"sample_budget", c.sample_budget},
          {"n_trials", c.n_trials},
          {"master_seed", c.master_seed},
          {"threads", c.threads},
          {"output_dir", c.output_dir.string()},
          {"ground_truth",
           {{"n_samples", c.ground_truth.n_samples},
            {"seed", c.ground_truth.seed},
            {"cache_dir", c.ground_truth.cache_dir.string()}}},
          {"spais",
           {{"n_particles", c.spais.n_particles},
            {"beta", c.spais.beta},
            {"learning_rate", c.spais.learning_rate},
            {"refresh_particles", c.spais.refresh_particles},
            {"pretrain", pretrain_json(c.spais.pretrain)}}},
          {"cem",
           {{"n_per_iteration", c.cem.n_per_iteration},
            {"elite_frac", c.cem.elite_frac},
            {"smoothing_alpha", c.cem.smoothing_alpha},
            {"std_floor_ratio", c.cem.std_floor_ratio}}}};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"environment", "method", "sample_budget", "n_trials", "master_seed", "threads",
                  "output_dir", "ground_truth", "spais", "cem"},
                 "config");
  ExperimentConfig c;
  c.output_dir = default_output_dir();
  if (auto it = j.find("environment"); it != j.end()) {
    reject_unknown(*it, {"name", "params"}, "environment");
    read(*it, "name", c.env_name);
    if (auto p = it->find("params"); p != it->end()) c.env_params = *p;
  }
  if (auto it = j.find("method"); it != j.end()) c.method = parse_method(it->get<std::string>());
  read(j, "sample_budget", c.sample_budget);
  read(j, "n_trials", c.n_trials);
  read(j, "master_seed", c.master_seed);
  read(j, "threads", c.threads);
  if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = it->get<std::string>();
  if (auto it = j.find("ground_truth"); it != j.end()) {
    reject_unknown(*it, {"n_samples", "seed", "cache_dir"}, "ground_truth");
    read(*it, "n_samples", c.ground_truth.n_samples);
    read(*it, "seed", c.ground_truth.seed);
    if (auto d = it->find("cache_dir"); d != it->end()) c.ground_truth.cache_dir = d->get<std::string>();
  }
  if (auto it = j.find("spais"); it != j.end()) {
    reject_unknown(*it, {"n_particles", "beta", "learning_rate", "refresh_particles", "pretrain"}, "spais");
    read(*it, "n_particles", c.spais.n_particles);
    read(*it, "beta", c.spais.beta);
    read(*it, "learning_rate", c.spais.learning_rate);
    read(*it, "refresh_particles", c.spais.refresh_particles);
    if (auto p = it->find("pretrain"); p != it->end()) read_pretrain(*p, c.spais.pretrain);
  }
  if (auto it = j.find("cem"); it != j.end()) {
    reject_unknown(*it, {"n_per_iteration", "elite_frac", "smoothing_alpha", "std_floor_ratio"}, "cem");
    read(*it, "n_per_iteration", c.cem.n_per_iteration);
    read(*it, "elite_frac", c.cem.elite_frac);
    read(*it, "smoothing_alpha", c.cem.smoothing_alpha);
    read(*it, "std_floor_ratio", c.cem.std_floor_ratio);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path default_output_dir() {
  if (const char* dir = std::getenv("SPAIS_OUTPUT_DIR"); dir != nullptr && *dir != '\0') return dir;
  return "spais_out";
}

// ---------------------------------------------------------------------------
// Ground truth

std::filesystem::path ground_truth_cache_path(const Environment& env, const GroundTruthSettings& s) {
  return s.cache_dir / ("gt_" + std::string(env.name()) + "_" + env.parameter_hash() + "_" +
                        std::to_string(s.n_samples) + "_" + std::to_string(s.seed) + ".json");
}

std::optional<GroundTruth> load_ground_truth(const Environment& env, const GroundTruthSettings& s) {
  const auto path = ground_truth_cache_path(env, s);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const auto j = json::parse(in);
    if (j.at("env_hash").get<std::string>() != env.parameter_hash() ||
        j.at("n_samples").get<std::size_t>() != s.n_samples || j.at("seed").get<std::uint64_t>() != s.seed ||
        j.at("params") != env.parameters()) {
      return std::nullopt;
    }
    GroundTruth gt;
    gt.mu = j.at("mu").get<double>();
    gt.std_error = j.at("std_error").get<double>();
    gt.n_samples = s.n_samples;
    gt.n_failures = j.at("n_failures").get<std::size_t>();
    gt.seed = s.seed;
    gt.env_hash = env.parameter_hash();
    gt.from_cache = true;
    return gt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

GroundTruth ground_truth(const Environment& env, const GroundTruthSettings& s, std::size_t threads) {
  if (auto cached = load_ground_truth(env, s)) return *cached;
  const auto r = mc_estimate(env, s.n_samples, stream_seed(s.seed, Stream::kGroundTruth, 0), threads);
  GroundTruth gt{r.mu_hat, r.std_error, s.n_samples, r.n_failures, s.seed, env.parameter_hash(), false};
  const json j{{"env", env.name()},        {"env_hash", gt.env_hash}, {"params", env.parameters()},
               {"n_samples", s.n_samples}, {"seed", s.seed},          {"mu", gt.mu},
               {"std_error", gt.std_error}, {"n_failures", gt.n_failures}};
  write_file(ground_truth_cache_path(env, s), j.dump(2) + "\n");
  return gt;
}

// ---------------------------------------------------------------------------
// Methods and trials

MethodOutcome run_method(const ExperimentConfig& config, const Environment& env, std::uint64_t seed,
                         const SampleObserver& observer) {
  MethodOutcome out;
  switch (config.method) {
    case Method::kMonteCarlo:
      out.estimate = mc_estimate(env, config.sample_budget, seed, config.threads, observer);
      break;
    case Method::kCrossEntropy: {
      CemConfig cem;
      cem.n_per_iteration = config.cem.n_per_iteration;
      cem.n_iterations = config.sample_budget / config.cem.n_per_iteration;
      cem.elite_frac = config.cem.elite_frac;
      cem.smoothing_alpha = config.cem.smoothing_alpha;
      cem.std_floor_ratio = config.cem.std_floor_ratio;
      cem.seed = seed;
      cem.threads = config.threads;
      auto run = run_cem(env, cem, observer);
      out.estimate = std::move(run.estimate);
      out.cem_proposal = std::move(run.proposal);
      break;
    }
    case Method::kSpais: {
      Rng init_rng(stream_seed(seed, Stream::kPretrain, 2));
      auto initial = GaussianProposalParams::create(env.state_dim(), env.disturbance_dim(), init_rng);
      auto pre_cfg = config.spais.pretrain;
      pre_cfg.threads = config.threads;
      auto pretrained = pretrain_to_nominal(std::move(initial), env, pre_cfg, seed);
      SpaisConfig sc;
      sc.n_particles = config.spais.n_particles;
      sc.n_iterations = config.sample_budget / config.spais.n_particles - 1;
      sc.beta = config.spais.beta;
      sc.adam.learning_rate = config.spais.learning_rate;
      sc.refresh_particles = config.spais.refresh_particles;
      sc.master_seed = seed;
      sc.threads = config.threads;
      auto run = run_spais(env, std::move(pretrained.params), sc, observer);
      out.estimate = std::move(run.estimate);
      out.proposal = std::move(run.params);
      break;
    }
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
  return stream_seed(master_seed, Stream::kTrial, trial);
}

TrialSummary summarize(std::vector<TrialRecord> trials, double mu_truth) {
  TrialSummary s;
  s.mu_truth = mu_truth;
  s.trials = std::move(trials);
  std::vector<double> rel, abs;
  for (const auto& t : s.trials) {
    if (!t.ok) continue;
    rel.push_back(t.eps_rel);
    abs.push_back(t.eps_abs);
  }
  s.n_ok = rel.size();
  auto mean_std = [](const std::vector<double>& v, double& mean, double& stddev) {
    if (v.empty()) return;
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  mean_std(rel, s.eps_rel_mean, s.eps_rel_std);
  mean_std(abs, s.eps_abs_mean, s.eps_abs_std);
  return s;
}

TrialSummary summarize_estimates(std::span<const double> mu_hats, double mu_truth) {
  if (!(mu_truth > 0.0)) throw std::invalid_argument("relative errors need a positive ground truth");
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < mu_hats.size(); ++i) {
    TrialRecord r;
    r.index = i;
    r.ok = true;
    r.mu_hat = mu_hats[i];
    r.eps_rel = (mu_hats[i] - mu_truth) / mu_truth;
    r.eps_abs = std::abs(mu_hats[i] - mu_truth) / mu_truth;
    records.push_back(r);
  }
  return summarize(std::move(records), mu_truth);
}

void write_metrics_csv(std::ostream& out, Method method, const EstimateResult& result) {
  out << "method,iteration,n_samples_total,mu_hat_so_far,acceptance_rate,mean_loss,ess\n";
  for (const auto& d : result.per_iteration) {
    out << to_string(method) << ',' << d.iteration << ',' << d.n_samples_total << ',' << format_double(d.mu_hat)
        << ',' << format_double(d.acceptance_rate) << ',' << format_double(d.mean_loss) << ','
        << format_double(d.ess) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const TrialSummary& s) {
  out << "trial,seed,status,mu_hat,mu_truth,eps_rel,eps_abs,n_samples\n";
  for (const auto& t : s.trials) {
    out << t.index << ',' << t.seed << ',' << (t.ok ? "ok" : "failed") << ',' << format_double(t.mu_hat) << ','
        << format_double(s.mu_truth) << ',' << format_double(t.eps_rel) << ',' << format_double(t.eps_abs)
        << ',' << t.n_samples << '\n';
  }
  out << "mean,,," << ",," << format_double(s.eps_rel_mean) << ',' << format_double(s.eps_abs_mean) << ",\n";
  out << "std,,," << ",," << format_double(s.eps_rel_std) << ',' << format_double(s.eps_abs_std) << ",\n";
}

json result_json(const ExperimentConfig& config, const EstimateResult& result, std::uint64_t seed,
                 std::optional<double> mu_truth) {
  json j{{"method", to_string(config.method)},
         {"env", config.env_name},
         {"mu_hat", result.mu_hat},
         {"std_error", result.std_error},
         {"n_samples", result.n_samples},
         {"n_failures", result.n_failures},
         {"ess", result.ess},
         {"seed", seed},
         {"config", to_json(config)}};
  if (mu_truth && *mu_truth > 0.0) {
    j["mu_truth"] = *mu_truth;
    j["eps_rel"] = (result.mu_hat - *mu_truth) / *mu_truth;
    j["eps_abs"] = std::abs(result.mu_hat - *mu_truth) / *mu_truth;
  } else {
    j["mu_truth"] = nullptr;
    j["eps_rel"] = nullptr;
    j["eps_abs"] = nullptr;
  }
  return j;
}

TrialSummary run_trials(const ExperimentConfig& config, double mu_truth, const std::filesystem::path& directory,
                        const TrialObserverFactory& observers) {
  config.validate();
  if (!(mu_truth > 0.0)) throw std::invalid_argument("trials need a positive ground-truth probability");
  const auto env = config.make_env();
  std::filesystem::create_directories(directory);
  std::ofstream log(directory / "run.log", std::ios::app);
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < config.n_trials; ++i) {
    TrialRecord rec;
    rec.index = i;
    rec.seed = trial_seed(config.master_seed, i);
    log << timestamp() << " trial " << i << " start\n";
    try {
      const auto outcome = run_method(config, *env, rec.seed, observers ? observers(i) : SampleObserver{});
      rec.ok = true;
      rec.mu_hat = outcome.estimate.mu_hat;
      rec.n_samples = outcome.estimate.n_samples;
      rec.eps_rel = (rec.mu_hat - mu_truth) / mu_truth;
      rec.eps_abs = std::abs(rec.mu_hat - mu_truth) / mu_truth;
      const std::string stem = "trial_" + std::to_string(i);
      write_file(directory / (stem + ".json"), result_json(config, outcome.estimate, rec.seed, mu_truth).dump(2) + "\n");
      std::ostringstream metrics;
      write_metrics_csv(metrics, config.method, outcome.estimate);
      write_file(directory / (stem + "_metrics.csv"), metrics.str());
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
      std::cerr << "warning: trial " << i << " aborted and excluded: " << e.what() << '\n';
    }
    log << timestamp() << " trial " << i << (rec.ok ? " done" : " failed: " + rec.error) << '\n';
    records.push_back(std::move(rec));
  }
  auto summary = summarize(std::move(records), mu_truth);
  std::ostringstream csv;
  write_summary_csv(csv, summary);
  write_file(directory / "summary.csv", csv.str());
  return summary;
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationResult calibrate(const std::string& env_name, const json& base_params, const std::string& key,
                            double target, double lo, double hi, std::size_t n_samples, std::size_t steps,
                            std::uint64_t seed, std::size_t threads) {
  if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("calibration needs 0 < lo < hi");
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("calibration target must be in (0, 1)");
  std::string pointer = "/" + key;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const json::json_pointer ptr(pointer);
  CalibrationResult result;
  auto evaluate = [&](double value) {
    json params = base_params.is_null() ? json::object() : base_params;
    params[ptr] = value;
    const auto env = make_environment(env_name, params);
    const auto r = mc_estimate(*env, n_samples, seed, threads);
    result.history.push_back({value, r.mu_hat, r.n_failures});
    return r.mu_hat;
  };
  double best_gap = INFINITY;
  for (std::size_t i = 0; i < steps; ++i) {
    const double mid = std::sqrt(lo * hi);
    const double mu = evaluate(mid);
    const double gap = mu > 0.0 ? std::abs(std::log(mu / target)) : INFINITY;
    if (gap < best_gap || result.history.size() == 1) {
      best_gap = gap;
      result.value = mid;
      result.mu = mu;
    }
    if (mu < target) lo = mid; else hi = mid;
  }
  return result;
}

}  // namespace spais
