#pragma once

// Measurements shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "spais/environments.hpp"
#include "spais/imh.hpp"
#include "spais/proposal.hpp"

namespace checks {

/// Proposal with non-trivial weights, normalization and moments.
inline spais::GaussianProposalParams random_params(std::size_t ds, std::size_t dx, spais::Rng& rng) {
  auto p = spais::GaussianProposalParams::create(ds, dx, rng);
  p.mean_net.initialize(rng, 1.0);
  p.logstd_net.initialize(rng, 0.5);
  for (auto& b : p.mean_net.output_bias()) b = rng.normal();
  for (auto& b : p.logstd_net.output_bias()) b = 0.3 * rng.normal();
  for (std::size_t i = 0; i < ds; ++i) {
    p.state_mean[i] = rng.normal();
    p.state_std[i] = 0.5 + rng.uniform();
  }
  for (auto& f : p.logstd_floor) f = -20.0;
  return p;
}

inline std::vector<oracle::Sample> random_batch(const spais::GaussianProposalParams& p, std::size_t n,
                                                spais::Rng& rng) {
  std::vector<oracle::Sample> batch(n);
  for (auto& s : batch) {
    s.state.resize(p.state_dim());
    for (std::size_t i = 0; i < s.state.size(); ++i) s.state[i] = p.state_mean[i] + 2.0 * p.state_std[i] * rng.normal();
    s.x.resize(p.disturbance_dim());
    for (auto& x : s.x) x = 2.0 * rng.normal();
  }
  return batch;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Analytic gradient of the batch loss against long-double central
/// differences with step h. Relative error uses max(|a|, |fd|, floor) as the
/// denominator. `stride` > 1 checks every stride-th coordinate.
inline GradientCheck gradient_vs_finite_difference(std::size_t ds, std::size_t dx, std::uint64_t seed,
                                                   std::size_t batch_size, double h, double floor,
                                                   std::size_t stride = 1) {
  spais::Rng rng(seed);
  const auto params = random_params(ds, dx, rng);
  const auto batch = random_batch(params, batch_size, rng);
  const double normalizer = 1.0 + static_cast<double>(rng.next_u64() % 4);

  std::vector<spais::StatePair> pairs;
  for (const auto& s : batch) pairs.push_back({&s.state, &s.x});
  const auto analytic = spais::pair_loss_and_gradient(params, pairs, normalizer);
  std::vector<double> g(analytic.gradient.mean_net);
  g.insert(g.end(), analytic.gradient.logstd_net.begin(), analytic.gradient.logstd_net.end());

  auto flat = oracle::flatten(params);
  GradientCheck out;
  for (std::size_t i = seed % stride; i < flat.size(); i += stride) {
    const long double saved = flat[i];
    flat[i] = saved + h;
    const long double up = oracle::proposal_loss(params, flat, batch, normalizer);
    flat[i] = saved - h;
    const long double down = oracle::proposal_loss(params, flat, batch, normalizer);
    flat[i] = saved;
    const double fd = static_cast<double>((up - down) / (2.0L * h));
    const double denom = std::max({std::abs(g[i]), std::abs(fd), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(g[i] - fd) / denom);
    ++out.coordinates;
  }
  return out;
}

/// Total variation between the pooled particle histogram of `n_chains`
/// chains of `n_steps` pairwise IMH steps and the analytic smoothed target,
/// on the toy problem with the given fixed proposal.
struct StationarityCheck {
  double total_variation = 0.0;
  std::size_t kernel_steps = 0;
  double acceptance_rate = 0.0;
};

/// The first `burn_in` steps of every chain are run but not counted.
inline StationarityCheck toy_imh_stationarity(const spais::GaussianProposalParams& q, std::size_t n_chains,
                                              std::size_t n_steps, std::size_t burn_in, double beta,
                                              std::uint64_t seed) {
  constexpr double lo = -5.0, hi = 5.0;
  constexpr std::size_t bins = 50;
  const spais::ToyGaussianEnvironment env;
  const spais::GaussianProposal sampler(q);
  const spais::SmoothingConfig smoothing{beta, env.gamma()};

  std::vector<spais::Particle> particles;
  for (std::size_t n = 0; n < n_chains; ++n) {
    particles.push_back(spais::make_particle(spais::rollout(env, sampler, spais::derive_seed(seed, 0, n)), smoothing));
  }
  std::vector<double> counts(bins + 1, 0.0);  // last slot: outside [lo, hi)
  std::size_t accepted = 0, counted = 0;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    std::vector<spais::Particle> proposals;
    for (std::size_t n = 0; n < n_chains; ++n) {
      proposals.push_back(spais::make_particle(spais::rollout(env, sampler, spais::derive_seed(seed, k, n)), smoothing));
    }
    accepted += spais::update_particle_set(particles, proposals, spais::derive_seed(seed, k, n_chains)).accepted;
    if (k <= burn_in) continue;
    for (const auto& p : particles) {
      const double x = p.trajectory.final_state[0];
      const auto b = (x >= lo && x < hi) ? static_cast<std::size_t>((x - lo) / (hi - lo) * bins) : bins;
      counts[std::min(b, bins)] += 1.0;
      ++counted;
    }
  }
  const auto target = oracle::toy_smoothed_target_bins(env.gamma(), beta, env.params().nominal_std, lo, hi, bins);
  long double inside = 0.0L, tv = 0.0L;
  for (std::size_t b = 0; b < bins; ++b) {
    inside += target[b];
    tv += std::abs(counts[b] / static_cast<long double>(counted) - target[b]);
  }
  tv += std::abs(counts[bins] / static_cast<long double>(counted) - (1.0L - inside));
  StationarityCheck out;
  out.total_variation = static_cast<double>(0.5L * tv);
  out.kernel_steps = n_chains * n_steps;
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_chains * n_steps);
  return out;
}

}  // namespace checks
