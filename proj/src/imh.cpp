#include "spais/imh.hpp"

#include <cmath>
#include <stdexcept>

namespace spais {

void SmoothingConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("smoothing beta must be positive");
  if (std::isnan(gamma)) throw std::invalid_argument("smoothing gamma must not be NaN");
}

Particle make_particle(Trajectory trajectory, const SmoothingConfig& smoothing) {
  const double w = smoothed_log_weight(trajectory, smoothing.beta, smoothing.gamma).value;
  return {std::move(trajectory), w};
}

void refresh_particle(Particle& particle, const DisturbanceSampler& sampler,
                      const SmoothingConfig& smoothing) {
  for (auto& step : particle.trajectory.steps) {
    step.log_proposal = sampler.log_prob(step.state, step.disturbance);
  }
  particle.smoothed_log_weight =
      smoothed_log_weight(particle.trajectory, smoothing.beta, smoothing.gamma).value;
}

double log_acceptance_probability(double current_log_weight, double proposed_log_weight) {
  return std::min(0.0, proposed_log_weight - current_log_weight);
}

bool accept_move(double current_log_weight, double proposed_log_weight, Rng& rng) {
  // u in [0, 1), so log u < 0 and a non-negative difference always accepts.
  const double log_u = std::log(rng.uniform());
  return log_u < proposed_log_weight - current_log_weight;
}

MhOutcome mh_accept(Particle current, Particle proposed, Rng& rng) {
  if (accept_move(current.smoothed_log_weight, proposed.smoothed_log_weight, rng)) {
    return {std::move(proposed), true};
  }
  return {std::move(current), false};
}

MhOutcome mh_accept(Particle current, Particle proposed, std::uint64_t seed) {
  Rng rng(seed);
  return mh_accept(std::move(current), std::move(proposed), rng);
}

ParticleUpdate update_particle_set(std::vector<Particle>& particles, std::vector<Particle>& proposals,
                                   std::uint64_t seed) {
  if (particles.size() != proposals.size()) {
    throw std::logic_error("particle and proposal sets differ in size");
  }
  ParticleUpdate update;
  for (std::size_t n = 0; n < particles.size(); ++n) {
    Rng rng(derive_seed(seed, n));
    if (accept_move(particles[n].smoothed_log_weight, proposals[n].smoothed_log_weight, rng)) {
      particles[n] = std::move(proposals[n]);
      ++update.accepted;
    }
  }
  update.acceptance_rate =
      particles.empty() ? 0.0 : static_cast<double>(update.accepted) / static_cast<double>(particles.size());
  return update;
}

}  // namespace spais
