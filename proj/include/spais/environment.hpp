#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spais/rng.hpp"

namespace spais {

using State = std::vector<double>;

/// Diagonal Gaussian disturbance model d(x | s) at one state.
struct NominalDisturbance {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// log N(x; mean, diag(stddev^2)).
double diag_gaussian_log_prob(std::span<const double> mean, std::span<const double> stddev,
                              std::span<const double> x);

/// A disturbance-driven system under test.
///
/// Dynamics are deterministic given the disturbance, so the only randomness
/// in a trajectory is the disturbance sequence. Failure is f(tau) >= gamma
/// where f is the running maximum of robustness() over the states reached
/// after each step.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t disturbance_dim() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual double gamma() const = 0;

  virtual State initial_state(std::uint64_t seed) const = 0;
  virtual State step(const State& state, std::span<const double> disturbance,
                     std::size_t t) const = 0;
  /// Per-state contribution to f; larger is closer to failure.
  virtual double robustness(const State& state) const = 0;
  virtual NominalDisturbance nominal(const State& state) const = 0;
  /// Full parameter block, including gamma. Drives the ground-truth cache key.
  virtual nlohmann::json parameters() const = 0;

  double nominal_log_prob(const State& state, std::span<const double> disturbance) const;
  std::vector<double> nominal_sample(const State& state, Rng& rng) const;
  std::vector<double> nominal_sample(const State& state, std::uint64_t seed) const;

  /// f over the post-step states s_2..s_{T+1}.
  double evaluate(std::span<const State> states) const;

  /// Stable FNV-1a hash (hex) of name + parameters().
  std::string parameter_hash() const;
};

/// Builds a registered environment from its name and a (possibly partial)
/// parameter object. Throws std::invalid_argument for unknown names or keys.
std::unique_ptr<Environment> make_environment(std::string_view name,
                                              const nlohmann::json& params = nlohmann::json::object());

std::vector<std::string> environment_names();

}  // namespace spais
