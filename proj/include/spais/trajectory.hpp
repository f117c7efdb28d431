#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "spais/environment.hpp"
#include "spais/rng.hpp"

namespace spais {

/// One timestep: the conditioning state s_t, the disturbance x_t drawn at
/// it, and both log-densities evaluated when x_t was sampled.
struct StepRecord {
  State state;
  std::vector<double> disturbance;
  double log_nominal = 0.0;
  double log_proposal = 0.0;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  State final_state;  // s_{T+1}
  double f_value = 0.0;
  std::uint64_t seed = 0;

  /// Post-step states s_2..s_{T+1}, the sequence f is evaluated over.
  std::vector<State> visited_states() const;
};

/// Log-space importance weight. Only the hard-indicator weight of a safe
/// trajectory may be -inf.
struct LogWeight {
  double value = 0.0;
};

/// A draw from a disturbance distribution together with its log-density.
struct Draw {
  std::vector<double> x;
  double log_prob = 0.0;
};

/// Anything that can propose disturbances given the current state.
class DisturbanceSampler {
 public:
  virtual ~DisturbanceSampler() = default;
  virtual std::size_t dim() const = 0;
  virtual Draw draw(const State& state, Rng& rng) const = 0;
  virtual double log_prob(const State& state, std::span<const double> x) const = 0;
};

/// The environment's own d(x | s).
class NominalSampler final : public DisturbanceSampler {
 public:
  explicit NominalSampler(const Environment& env) : env_(&env) {}
  std::size_t dim() const override { return env_->disturbance_dim(); }
  Draw draw(const State& state, Rng& rng) const override;
  double log_prob(const State& state, std::span<const double> x) const override;

 private:
  const Environment* env_;
};

/// Simulates env.horizon() steps with x_t ~ sampler(. | s_t).
/// Throws std::invalid_argument on a dimension mismatch and
/// std::runtime_error if the dynamics produce a non-finite state.
Trajectory rollout(const Environment& env, const DisturbanceSampler& sampler, std::uint64_t seed);

/// Rollouts with seeds[i] into slot i; parallel over `threads` workers.
std::vector<Trajectory> rollout_batch(const Environment& env, const DisturbanceSampler& sampler,
                                      std::span<const std::uint64_t> seeds, std::size_t threads);

/// Rebuilds a trajectory from a fixed disturbance sequence. log_proposal is
/// set to log_nominal (the replay is treated as a nominal draw).
Trajectory replay(const Environment& env, std::span<const std::vector<double>> disturbances);

/// sum_t (log d(x_t|s_t) - log q(x_t|s_t)).
LogWeight log_importance_weight(const Trajectory& traj);

/// log_importance_weight + log P_beta(f - gamma). Finite for finite inputs.
LogWeight smoothed_log_weight(const Trajectory& traj, double beta, double gamma);

/// One row per timestep:
/// trajectory_id,t,state_*,x_*,log_nominal,log_proposal,f_value,next_state_*
void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories,
                            std::size_t first_id = 0, bool header = true);

}  // namespace spais
