#pragma once

#include <cstdint>
#include <vector>

#include "spais/engine.hpp"
#include "spais/environment.hpp"
#include "spais/trajectory.hpp"

namespace spais {

/// Plain Monte Carlo: failure count / n over nominal rollouts. The rollout
/// with index i uses stream_seed(seed, Stream::kRollout, 0, i).
EstimateResult mc_estimate(const Environment& env, std::size_t n_samples, std::uint64_t seed,
                           std::size_t threads = 1, const SampleObserver& observer = {});

/// True iff a nominal rollout with `seed` fails. Does not record the trajectory.
bool nominal_rollout_fails(const Environment& env, std::uint64_t seed);

/// State-independent diagonal Gaussian applied at every timestep.
class CEMProposal final : public DisturbanceSampler {
 public:
  CEMProposal(std::vector<double> mean, std::vector<double> stddev, std::vector<double> std_floor);

  std::size_t dim() const override { return mean_.size(); }
  Draw draw(const State& state, Rng& rng) const override;
  double log_prob(const State& state, std::span<const double> x) const override;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }
  const std::vector<double>& std_floor() const { return std_floor_; }

  /// Moves toward (mean, stddev) by `alpha` and re-applies the floor.
  void blend(std::span<const double> mean, std::span<const double> stddev, double alpha);

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
  std::vector<double> std_floor_;
};

struct CemConfig {
  std::size_t n_per_iteration = 500;
  std::size_t n_iterations = 100;
  double elite_frac = 0.1;
  double smoothing_alpha = 0.7;
  double std_floor_ratio = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct CemRun {
  EstimateResult estimate;
  CEMProposal proposal;
  /// Proposal mean after each iteration's refit.
  std::vector<std::vector<double>> mean_history;
  ISBuffer buffer;
};

/// Cross-entropy method with a shared per-timestep Gaussian, elite set =
/// top ceil(elite_frac * N) by f (or every failure when there are more),
/// and the final estimate over the pooled multi-proposal buffer.
CemRun run_cem(const Environment& env, const CemConfig& config, const SampleObserver& observer = {});

}  // namespace spais
