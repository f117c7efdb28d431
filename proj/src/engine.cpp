#include "spais/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spais {

EstimateResult importance_sampling_estimate(const ISBuffer& buffer, double gamma) {
  if (buffer.empty()) throw std::invalid_argument("importance sampling estimate of an empty buffer");
  const auto& entries = buffer.entries();
  double max_log = -std::numeric_limits<double>::infinity();
  std::size_t failures = 0;
  for (const auto& e : entries) {
    if (e.f_value >= gamma) {
      max_log = std::max(max_log, e.log_weight);
      ++failures;
    }
  }
  EstimateResult r;
  r.n_samples = entries.size();
  r.n_failures = failures;
  if (failures == 0 || max_log == -std::numeric_limits<double>::infinity()) return r;

  // Scaled sums: w_i = exp(max_log) * exp(log_w_i - max_log).
  double s1 = 0.0, s2 = 0.0;
  for (const auto& e : entries) {
    if (e.f_value < gamma) continue;
    const double w = std::exp(e.log_weight - max_log);
    s1 += w;
    s2 += w * w;
  }
  const double n = static_cast<double>(entries.size());
  const double scale = std::exp(max_log);
  r.mu_hat = scale * s1 / n;
  const double second = scale * scale * s2 / n;
  r.std_error = std::sqrt(std::max(0.0, second - r.mu_hat * r.mu_hat) / n);
  r.ess = s1 * s1 / s2;
  return r;
}

void SpaisConfig::validate() const {
  if (n_particles == 0) throw std::invalid_argument("SPAIS needs at least one particle");
  if (!(beta > 0.0)) throw std::invalid_argument("SPAIS beta must be positive");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

namespace {

std::vector<Particle> sample_particles(const Environment& env, const GaussianProposal& proposal,
                                       const SpaisConfig& config, std::size_t iteration,
                                       const SmoothingConfig& smoothing) {
  std::vector<std::uint64_t> seeds(config.n_particles);
  for (std::size_t n = 0; n < seeds.size(); ++n) {
    seeds[n] = stream_seed(config.master_seed, Stream::kRollout, iteration, n);
  }
  auto trajectories = rollout_batch(env, proposal, seeds, config.threads);
  std::vector<Particle> particles;
  particles.reserve(trajectories.size());
  for (auto& t : trajectories) particles.push_back(make_particle(std::move(t), smoothing));
  return particles;
}

void record(ISBuffer& buffer, const std::vector<Particle>& batch, std::size_t iteration,
            const SampleObserver& observer) {
  for (const auto& p : batch) {
    buffer.append(p.trajectory, iteration);
    if (observer) observer(p.trajectory, iteration);
  }
}

}  // namespace

SpaisRun run_spais(const Environment& env, GaussianProposalParams initial, const SpaisConfig& config,
                   const SampleObserver& observer) {
  config.validate();
  const SmoothingConfig smoothing{config.beta, env.gamma()};
  GaussianProposal proposal(std::move(initial));
  if (proposal.dim() != env.disturbance_dim() || proposal.params().state_dim() != env.state_dim()) {
    throw std::invalid_argument("proposal dimensions do not match the environment");
  }
  AdamOptimizer adam(config.adam);

  SpaisRun run;
  run.buffer.reserve(config.n_particles * (config.n_iterations + 1));
  auto particles = sample_particles(env, proposal, config, 0, smoothing);
  record(run.buffer, particles, 0, observer);

  for (std::size_t k = 1; k <= config.n_iterations; ++k) {
    if (config.refresh_particles && k > 1) {
      for (auto& p : particles) refresh_particle(p, proposal, smoothing);
    }
    auto proposals = sample_particles(env, proposal, config, k, smoothing);
    record(run.buffer, proposals, k, observer);
    const auto update =
        update_particle_set(particles, proposals, stream_seed(config.master_seed, Stream::kAccept, k));

    std::vector<StatePair> pairs;
    pairs.reserve(particles.size() * env.horizon());
    for (const auto& p : particles) {
      for (const auto& step : p.trajectory.steps) pairs.push_back({&step.state, &step.disturbance});
    }
    const auto lg = pair_loss_and_gradient(proposal.params(), pairs,
                                           static_cast<double>(particles.size()), config.threads);
    if (!std::isfinite(lg.loss) || !std::isfinite(lg.gradient.max_abs())) {
      throw std::runtime_error("SPAIS loss became non-finite at iteration " + std::to_string(k));
    }
    adam.step(proposal.mutable_params(), lg.gradient);

    const auto so_far = importance_sampling_estimate(run.buffer, env.gamma());
    run.estimate.per_iteration.push_back(
        {k, run.buffer.size(), so_far.mu_hat, update.acceptance_rate, lg.loss, so_far.ess});
  }

  auto per_iteration = std::move(run.estimate.per_iteration);
  run.estimate = importance_sampling_estimate(run.buffer, env.gamma());
  run.estimate.per_iteration = std::move(per_iteration);
  if (config.n_iterations == 0) {
    run.estimate.per_iteration.push_back(
        {0, run.buffer.size(), run.estimate.mu_hat, 0.0, 0.0, run.estimate.ess});
  }
  run.params = proposal.params();
  return run;
}

}  // namespace spais
