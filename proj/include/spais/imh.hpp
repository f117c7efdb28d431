#pragma once

#include <cstdint>
#include <vector>

#include "spais/logistic.hpp"
#include "spais/trajectory.hpp"

namespace spais {

/// Logistic relaxation of the failure indicator 1{f >= gamma}.
struct SmoothingConfig {
  double beta = 1e-2;
  double gamma = 0.0;

  void validate() const;
};

/// A chain state of the IMH kernel with its cached log w~(tau).
struct Particle {
  Trajectory trajectory;
  double smoothed_log_weight = 0.0;
};

Particle make_particle(Trajectory trajectory, const SmoothingConfig& smoothing);

/// Re-evaluates every step's log q under `sampler` and recomputes the cached
/// smoothed weight, so the particle can be compared against draws from it.
void refresh_particle(Particle& particle, const DisturbanceSampler& sampler,
                      const SmoothingConfig& smoothing);

/// log of min(1, w~'/w~); depends only on the difference of log-weights.
double log_acceptance_probability(double current_log_weight, double proposed_log_weight);

/// Consumes one uniform u from `rng` and accepts iff log u < log w~' - log w~.
bool accept_move(double current_log_weight, double proposed_log_weight, Rng& rng);

struct MhOutcome {
  Particle particle;
  bool accepted = false;
};

MhOutcome mh_accept(Particle current, Particle proposed, Rng& rng);
MhOutcome mh_accept(Particle current, Particle proposed, std::uint64_t seed);

struct ParticleUpdate {
  std::size_t accepted = 0;
  double acceptance_rate = 0.0;
};

/// Pairwise IMH step: particle n against proposal n, each with the seed
/// stream derive_seed(seed, n). Proposals are moved from on acceptance.
/// Throws std::logic_error if the sets differ in size.
ParticleUpdate update_particle_set(std::vector<Particle>& particles, std::vector<Particle>& proposals,
                                   std::uint64_t seed);

}  // namespace spais
