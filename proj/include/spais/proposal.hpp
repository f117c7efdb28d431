#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "spais/environment.hpp"
#include "spais/mlp.hpp"
#include "spais/trajectory.hpp"

namespace spais {

inline constexpr std::array<std::size_t, 2> kHiddenSizes{64, 32};

/// theta for q(x | s) = N(mean_net(s_hat), diag(exp(2 * max(logstd_net(s_hat), floor))))
/// with s_hat = (s - state_mean) / state_std.
struct GaussianProposalParams {
  Mlp mean_net;
  Mlp logstd_net;
  std::vector<double> state_mean;
  std::vector<double> state_std;
  std::vector<double> logstd_floor;

  /// Randomly initialized nets of shape [state_dim, 64, 32, disturbance_dim]
  /// with identity normalization and a floor of log(1e-3).
  static GaussianProposalParams create(std::size_t state_dim, std::size_t disturbance_dim, Rng& rng);

  std::size_t state_dim() const { return state_mean.size(); }
  std::size_t disturbance_dim() const { return logstd_floor.size(); }
  void validate() const;
};

/// Mean and effective (floored) log-std of q(. | s).
struct ProposalMoments {
  std::vector<double> mean;
  std::vector<double> logstd;
  std::vector<double> raw_logstd;
};

ProposalMoments proposal_moments(const GaussianProposalParams& params, const State& state);
double proposal_log_prob(const GaussianProposalParams& params, const State& state,
                         std::span<const double> x);
/// mean + std * eps for a given standard-normal vector eps.
std::vector<double> reparameterize(const GaussianProposalParams& params, const State& state,
                                   std::span<const double> eps);
/// reparameterize with eps ~ N(0, I) drawn from `rng`.
std::vector<double> proposal_sample(const GaussianProposalParams& params, const State& state, Rng& rng);
std::vector<double> proposal_sample(const GaussianProposalParams& params, const State& state,
                                    std::uint64_t seed);

/// DisturbanceSampler view over a parameter set it owns.
class GaussianProposal final : public DisturbanceSampler {
 public:
  explicit GaussianProposal(GaussianProposalParams params);

  std::size_t dim() const override { return params_.disturbance_dim(); }
  Draw draw(const State& state, Rng& rng) const override;
  double log_prob(const State& state, std::span<const double> x) const override;

  const GaussianProposalParams& params() const { return params_; }
  GaussianProposalParams& mutable_params() { return params_; }

 private:
  GaussianProposalParams params_;
};

/// Gradient with the same layout as the two nets' parameter vectors.
struct ProposalGradient {
  std::vector<double> mean_net;
  std::vector<double> logstd_net;

  static ProposalGradient zeros_like(const GaussianProposalParams& params);
  double max_abs() const;
};

struct LossAndGradient {
  double loss = 0.0;
  ProposalGradient gradient;
};

/// (1/N) sum_n sum_t -log q(x_{t,n} | s_{t,n}) over N trajectories and its
/// exact gradient. The sum is taken in fixed chunks, so the result does
/// not depend on `threads`.
LossAndGradient loss_and_gradient(const GaussianProposalParams& params,
                                  std::span<const Trajectory> trajectories, std::size_t threads = 1);

/// A (state, disturbance) training pair referencing external storage.
struct StatePair {
  const State* state;
  const std::vector<double>* disturbance;
};

/// (1/normalizer) sum_i -log q(x_i | s_i) and gradient.
LossAndGradient pair_loss_and_gradient(const GaussianProposalParams& params,
                                       std::span<const StatePair> pairs, double normalizer,
                                       std::size_t threads = 1);

/// Adam with bias correction over a flat parameter list.
class AdamOptimizer {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  AdamOptimizer() : AdamOptimizer(Options{}) {}
  explicit AdamOptimizer(Options options) : options_(options) {}

  void step(std::span<double> params, std::span<const double> grad);
  void step(GaussianProposalParams& params, const ProposalGradient& grad);

  std::size_t iterations() const { return t_; }
  const Options& options() const { return options_; }

 private:
  Options options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct PretrainConfig {
  std::size_t n_rollouts = 2000;
  std::size_t n_epochs = 10;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
  /// Largest accepted held-out KL(d || q) per timestep, in nats.
  double max_kl_per_step = 0.05;
  /// Floor on the proposal std relative to the nominal std.
  double std_floor_ratio = 0.1;
  std::size_t threads = 1;
};

struct PretrainReport {
  double heldout_nll = 0.0;       // per timestep
  double nominal_entropy = 0.0;   // per timestep
  double kl_per_step = 0.0;       // heldout_nll - nominal_entropy
  std::size_t n_pairs = 0;
};

struct PretrainResult {
  GaussianProposalParams params;
  PretrainReport report;
};

/// Fits q to d(x | s) by maximum likelihood on nominal rollouts after
/// setting the state normalization from the visited states. Throws
/// std::invalid_argument for n_rollouts == 0 and std::runtime_error when the
/// held-out KL exceeds max_kl_per_step.
PretrainResult pretrain_to_nominal(GaussianProposalParams initial, const Environment& env,
                                   const PretrainConfig& config, std::uint64_t seed);

nlohmann::json proposal_to_json(const GaussianProposalParams& params);
GaussianProposalParams proposal_from_json(const nlohmann::json& j);
void save_checkpoint(const GaussianProposalParams& params, const std::filesystem::path& path);
GaussianProposalParams load_checkpoint(const std::filesystem::path& path);

}  // namespace spais
