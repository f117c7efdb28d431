#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spais/environment.hpp"
#include "spais/imh.hpp"
#include "spais/proposal.hpp"
#include "spais/trajectory.hpp"

namespace spais {

/// Append-only record of every sample used by the final estimate. Each
/// log-weight is the one computed under the sample's generating proposal.
class ISBuffer {
 public:
  struct Entry {
    double f_value = 0.0;
    double log_weight = 0.0;
    std::size_t iteration = 0;
  };

  void append(double f_value, double log_weight, std::size_t iteration) {
    entries_.push_back({f_value, log_weight, iteration});
  }
  void append(const Trajectory& traj, std::size_t iteration) {
    append(traj.f_value, log_importance_weight(traj).value, iteration);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void reserve(std::size_t n) { entries_.reserve(n); }

 private:
  std::vector<Entry> entries_;
};

struct IterationDiagnostics {
  std::size_t iteration = 0;
  std::size_t n_samples_total = 0;
  double mu_hat = 0.0;
  double acceptance_rate = 0.0;
  double mean_loss = 0.0;
  double ess = 0.0;
};

struct EstimateResult {
  double mu_hat = 0.0;
  /// Standard error of mu_hat treating the buffer terms as independent.
  double std_error = 0.0;
  std::size_t n_samples = 0;
  /// (sum w)^2 / sum w^2 over failing samples; 0 when nothing failed.
  double ess = 0.0;
  std::size_t n_failures = 0;
  std::vector<IterationDiagnostics> per_iteration;
};

/// mu_hat = (1/|D|) sum_i exp(log_weight_i) 1{f_i >= gamma} with the hard
/// indicator. Throws std::invalid_argument for an empty buffer.
EstimateResult importance_sampling_estimate(const ISBuffer& buffer, double gamma);

/// Called once per sampled trajectory, in (iteration, index) order, with
/// the iteration it was drawn in.
using SampleObserver = std::function<void(const Trajectory&, std::size_t iteration)>;

struct SpaisConfig {
  std::size_t n_particles = 500;
  std::size_t n_iterations = 99;
  double beta = 1e-2;
  AdamOptimizer::Options adam{};
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
  /// Recompute retained particles' weights under the current proposal
  /// before each accept/reject step.
  bool refresh_particles = true;

  void validate() const;
};

struct SpaisRun {
  EstimateResult estimate;
  GaussianProposalParams params;
  ISBuffer buffer;
};

/// Adaptive importance sampling with a state-dependent proposal trained by
/// Markov score ascent over an IMH particle set. Draws
/// n_particles * (n_iterations + 1) trajectories in total and is fully
/// determined by master_seed.
SpaisRun run_spais(const Environment& env, GaussianProposalParams initial, const SpaisConfig& config,
                   const SampleObserver& observer = {});

}  // namespace spais
