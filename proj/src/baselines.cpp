#include "spais/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spais/parallel.hpp"

namespace spais {

bool nominal_rollout_fails(const Environment& env, std::uint64_t seed) {
  Rng rng(seed);
  State state = env.initial_state(seed);
  double f = -INFINITY;
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    const auto x = env.nominal_sample(state, rng);
    state = env.step(state, x, t);
    f = std::max(f, env.robustness(state));
  }
  return f >= env.gamma();
}

EstimateResult mc_estimate(const Environment& env, std::size_t n_samples, std::uint64_t seed,
                           std::size_t threads, const SampleObserver& observer) {
  if (n_samples == 0) throw std::invalid_argument("Monte Carlo needs at least one sample");
  std::size_t failures = 0;
  if (observer) {
    const NominalSampler nominal(env);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const auto traj = rollout(env, nominal, stream_seed(seed, Stream::kRollout, 0, i));
      failures += traj.f_value >= env.gamma();
      observer(traj, 0);
    }
  } else {
    constexpr std::size_t kChunk = 4096;
    const std::size_t n_chunks = (n_samples + kChunk - 1) / kChunk;
    std::vector<std::size_t> counts(n_chunks, 0);
    parallel_for(n_chunks, threads, [&](std::size_t c) {
      const std::size_t end = std::min(n_samples, (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        counts[c] += nominal_rollout_fails(env, stream_seed(seed, Stream::kRollout, 0, i));
      }
    });
    failures = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  }
  EstimateResult r;
  r.n_samples = n_samples;
  r.n_failures = failures;
  const double n = static_cast<double>(n_samples);
  r.mu_hat = static_cast<double>(failures) / n;
  r.std_error = std::sqrt(r.mu_hat * (1.0 - r.mu_hat) / n);
  r.ess = static_cast<double>(failures);
  r.per_iteration.push_back({0, n_samples, r.mu_hat, 0.0, 0.0, r.ess});
  return r;
}

CEMProposal::CEMProposal(std::vector<double> mean, std::vector<double> stddev,
                         std::vector<double> std_floor)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), std_floor_(std::move(std_floor)) {
  if (stddev_.size() != mean_.size() || std_floor_.size() != mean_.size()) {
    throw std::invalid_argument("CEM proposal size mismatch");
  }
  for (std::size_t d = 0; d < mean_.size(); ++d) {
    if (!(std_floor_[d] > 0.0)) throw std::invalid_argument("CEM std floor must be positive");
    stddev_[d] = std::max(stddev_[d], std_floor_[d]);
  }
}

Draw CEMProposal::draw(const State&, Rng& rng) const {
  Draw out;
  out.x.resize(mean_.size());
  for (std::size_t d = 0; d < mean_.size(); ++d) out.x[d] = mean_[d] + stddev_[d] * rng.normal();
  out.log_prob = diag_gaussian_log_prob(mean_, stddev_, out.x);
  return out;
}

double CEMProposal::log_prob(const State&, std::span<const double> x) const {
  return diag_gaussian_log_prob(mean_, stddev_, x);
}

void CEMProposal::blend(std::span<const double> mean, std::span<const double> stddev, double alpha) {
  for (std::size_t d = 0; d < mean_.size(); ++d) {
    mean_[d] = alpha * mean[d] + (1.0 - alpha) * mean_[d];
    stddev_[d] = std::max(alpha * stddev[d] + (1.0 - alpha) * stddev_[d], std_floor_[d]);
  }
}

void CemConfig::validate() const {
  if (n_per_iteration == 0) throw std::invalid_argument("CEM needs at least one sample per iteration");
  if (n_iterations == 0) throw std::invalid_argument("CEM needs at least one iteration");
  if (!(elite_frac > 0.0 && elite_frac <= 1.0)) throw std::invalid_argument("CEM elite_frac must be in (0, 1]");
  if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0)) {
    throw std::invalid_argument("CEM smoothing_alpha must be in (0, 1]");
  }
}

CemRun run_cem(const Environment& env, const CemConfig& config, const SampleObserver& observer) {
  config.validate();
  const std::size_t dx = env.disturbance_dim();
  const auto start = env.nominal(env.initial_state(config.seed));
  std::vector<double> floor(dx);
  for (std::size_t d = 0; d < dx; ++d) floor[d] = config.std_floor_ratio * start.stddev[d];

  CemRun run{{}, CEMProposal(start.mean, start.stddev, floor), {}, {}};
  const std::size_t n = config.n_per_iteration;
  const auto n_elite = static_cast<std::size_t>(std::ceil(config.elite_frac * static_cast<double>(n)));
  run.buffer.reserve(n * config.n_iterations);

  for (std::size_t k = 0; k < config.n_iterations; ++k) {
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = stream_seed(config.seed, Stream::kRollout, k, i);
    const auto batch = rollout_batch(env, run.proposal, seeds, config.threads);
    std::size_t failing = 0;
    for (const auto& t : batch) {
      run.buffer.append(t, k);
      failing += t.f_value >= env.gamma();
      if (observer) observer(t, k);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return batch[a].f_value > batch[b].f_value; });
    const std::size_t elites = std::max(n_elite, failing);

    std::vector<double> sum(dx, 0.0), sum_sq(dx, 0.0);
    double count = 0.0;
    for (std::size_t e = 0; e < elites; ++e) {
      for (const auto& step : batch[order[e]].steps) {
        for (std::size_t d = 0; d < dx; ++d) {
          sum[d] += step.disturbance[d];
          sum_sq[d] += step.disturbance[d] * step.disturbance[d];
        }
        count += 1.0;
      }
    }
    std::vector<double> mean(dx), stddev(dx);
    for (std::size_t d = 0; d < dx; ++d) {
      mean[d] = sum[d] / count;
      stddev[d] = std::sqrt(std::max(0.0, sum_sq[d] / count - mean[d] * mean[d]));
    }
    run.proposal.blend(mean, stddev, config.smoothing_alpha);
    run.mean_history.push_back(run.proposal.mean());

    const auto so_far = importance_sampling_estimate(run.buffer, env.gamma());
    run.estimate.per_iteration.push_back({k, run.buffer.size(), so_far.mu_hat, 0.0, 0.0, so_far.ess});
  }
  auto per_iteration = std::move(run.estimate.per_iteration);
  run.estimate = importance_sampling_estimate(run.buffer, env.gamma());
  run.estimate.per_iteration = std::move(per_iteration);
  return run;
}

}  // namespace spais
