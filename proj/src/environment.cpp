#include "spais/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "spais/environments.hpp"

namespace spais {

double diag_gaussian_log_prob(std::span<const double> mean, std::span<const double> stddev,
                              std::span<const double> x) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) / stddev[i];
    total -= kHalfLog2Pi + std::log(stddev[i]) + 0.5 * z * z;
  }
  return total;
}

double Environment::nominal_log_prob(const State& state,
                                     std::span<const double> disturbance) const {
  if (disturbance.size() != disturbance_dim()) {
    throw std::invalid_argument("disturbance dimension mismatch");
  }
  const auto d = nominal(state);
  return diag_gaussian_log_prob(d.mean, d.stddev, disturbance);
}

std::vector<double> Environment::nominal_sample(const State& state, Rng& rng) const {
  const auto d = nominal(state);
  std::vector<double> x(d.mean.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = d.mean[i] + d.stddev[i] * rng.normal();
  return x;
}

std::vector<double> Environment::nominal_sample(const State& state, std::uint64_t seed) const {
  Rng rng(seed);
  return nominal_sample(state, rng);
}

double Environment::evaluate(std::span<const State> states) const {
  double f = -std::numeric_limits<double>::infinity();
  for (const auto& s : states) f = std::max(f, robustness(s));
  return f;
}

std::string Environment::parameter_hash() const {
  const std::string text = std::string(name()) + ":" + parameters().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<Environment> make_environment(std::string_view name, const nlohmann::json& params) {
  const nlohmann::json& p = params.is_null() ? nlohmann::json::object() : params;
  if (name == "toy") return std::make_unique<ToyGaussianEnvironment>(p.get<ToyGaussianEnvironment::Params>());
  if (name == "pendulum") return std::make_unique<PendulumEnvironment>(p.get<PendulumEnvironment::Params>());
  if (name == "crosswalk") return std::make_unique<CrosswalkEnvironment>(p.get<CrosswalkEnvironment::Params>());
  if (name == "collision") {
    return std::make_unique<CollisionAvoidanceEnvironment>(p.get<CollisionAvoidanceEnvironment::Params>());
  }
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected toy, pendulum, crosswalk or collision)");
}

std::vector<std::string> environment_names() { return {"toy", "pendulum", "crosswalk", "collision"}; }

}  // namespace spais
