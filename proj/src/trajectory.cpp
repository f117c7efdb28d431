#include "spais/trajectory.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "spais/csv.hpp"
#include "spais/logistic.hpp"
#include "spais/parallel.hpp"

namespace spais {

std::vector<State> Trajectory::visited_states() const {
  std::vector<State> out;
  out.reserve(steps.size());
  for (std::size_t t = 1; t < steps.size(); ++t) out.push_back(steps[t].state);
  if (!steps.empty()) out.push_back(final_state);
  return out;
}

Draw NominalSampler::draw(const State& state, Rng& rng) const {
  Draw d;
  d.x = env_->nominal_sample(state, rng);
  d.log_prob = env_->nominal_log_prob(state, d.x);
  return d;
}

double NominalSampler::log_prob(const State& state, std::span<const double> x) const {
  return env_->nominal_log_prob(state, x);
}

Trajectory rollout(const Environment& env, const DisturbanceSampler& sampler, std::uint64_t seed) {
  if (sampler.dim() != env.disturbance_dim()) {
    throw std::invalid_argument("proposal disturbance dimension " + std::to_string(sampler.dim()) +
                                " does not match environment dimension " +
                                std::to_string(env.disturbance_dim()));
  }
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.steps.reserve(env.horizon());
  State state = env.initial_state(seed);
  double f = -INFINITY;
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    Draw d = sampler.draw(state, rng);
    StepRecord rec;
    rec.log_nominal = env.nominal_log_prob(state, d.x);
    rec.log_proposal = d.log_prob;
    if (!std::isfinite(rec.log_nominal) || !std::isfinite(rec.log_proposal)) {
      throw std::runtime_error("non-finite disturbance log-density at t=" + std::to_string(t));
    }
    State next = env.step(state, d.x, t);
    for (double v : next) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("dynamics blow-up: non-finite state at t=" + std::to_string(t + 1));
      }
    }
    f = std::max(f, env.robustness(next));
    rec.state = std::move(state);
    rec.disturbance = std::move(d.x);
    traj.steps.push_back(std::move(rec));
    state = std::move(next);
  }
  traj.final_state = std::move(state);
  traj.f_value = f;
  return traj;
}

std::vector<Trajectory> rollout_batch(const Environment& env, const DisturbanceSampler& sampler,
                                      std::span<const std::uint64_t> seeds, std::size_t threads) {
  std::vector<Trajectory> out(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) { out[i] = rollout(env, sampler, seeds[i]); });
  return out;
}

Trajectory replay(const Environment& env, std::span<const std::vector<double>> disturbances) {
  if (disturbances.size() != env.horizon()) {
    throw std::invalid_argument("replay needs exactly horizon() disturbances");
  }
  Trajectory traj;
  State state = env.initial_state(0);
  double f = -INFINITY;
  for (std::size_t t = 0; t < disturbances.size(); ++t) {
    StepRecord rec;
    rec.log_nominal = env.nominal_log_prob(state, disturbances[t]);
    rec.log_proposal = rec.log_nominal;
    State next = env.step(state, disturbances[t], t);
    f = std::max(f, env.robustness(next));
    rec.state = std::move(state);
    rec.disturbance = disturbances[t];
    traj.steps.push_back(std::move(rec));
    state = std::move(next);
  }
  traj.final_state = std::move(state);
  traj.f_value = f;
  return traj;
}

LogWeight log_importance_weight(const Trajectory& traj) {
  double total = 0.0;
  for (const auto& s : traj.steps) total += s.log_nominal - s.log_proposal;
  return {total};
}

LogWeight smoothed_log_weight(const Trajectory& traj, double beta, double gamma) {
  if (!(beta > 0.0)) throw std::invalid_argument("smoothing beta must be positive");
  return {log_importance_weight(traj).value + log_logistic_cdf(traj.f_value - gamma, beta)};
}

void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories,
                            std::size_t first_id, bool header) {
  if (trajectories.empty()) return;
  const auto& first = trajectories.front().steps.front();
  const std::size_t ds = first.state.size();
  const std::size_t dx = first.disturbance.size();
  if (header) {
    out << "trajectory_id,t";
    for (std::size_t i = 0; i < ds; ++i) out << ",state_" << i;
    for (std::size_t i = 0; i < dx; ++i) out << ",x_" << i;
    out << ",log_nominal,log_proposal,f_value";
    for (std::size_t i = 0; i < ds; ++i) out << ",next_state_" << i;
    out << '\n';
  }
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& traj = trajectories[k];
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& s = traj.steps[t];
      out << first_id + k << ',' << t;
      for (double v : s.state) out << ',' << format_double(v);
      for (double v : s.disturbance) out << ',' << format_double(v);
      out << ',' << format_double(s.log_nominal) << ',' << format_double(s.log_proposal) << ','
          << format_double(traj.f_value);
      const State& next = t + 1 < traj.steps.size() ? traj.steps[t + 1].state : traj.final_state;
      for (double v : next) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

}  // namespace spais
