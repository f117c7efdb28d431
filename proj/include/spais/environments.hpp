#pragma once

#include <numbers>

#include "spais/environment.hpp"

namespace spais {

/// One-step problem with d = N(0, nominal_std^2) and f = x. The failure
/// probability is the Gaussian tail above gamma, known in closed form.
///
/// State layout: [value]. s_1 = 0, s_2 = x_1.
class ToyGaussianEnvironment final : public Environment {
 public:
  struct Params {
    double gamma = 2.0;
    double nominal_std = 1.0;
  };

  ToyGaussianEnvironment() : ToyGaussianEnvironment(Params{}) {}
  explicit ToyGaussianEnvironment(Params params);

  std::string_view name() const override { return "toy"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t disturbance_dim() const override { return 1; }
  std::size_t horizon() const override { return 1; }
  double gamma() const override { return params_.gamma; }

  State initial_state(std::uint64_t seed) const override;
  State step(const State& state, std::span<const double> disturbance,
             std::size_t t) const override;
  double robustness(const State& state) const override { return state[0]; }
  NominalDisturbance nominal(const State& state) const override;
  nlohmann::json parameters() const override;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

/// Inverted pendulum balanced by a saturated PD controller and pushed by an
/// additive torque disturbance. theta = 0 is upright; failure is
/// |theta| >= failure_angle at any step.
///
/// State layout: [theta (rad), theta_dot (rad/s)].
class PendulumEnvironment final : public Environment {
 public:
  struct Params {
    double dt = 0.05;
    double gravity = 10.0;
    double mass = 1.0;
    double length = 1.0;
    double kp = 40.0;
    double kd = 8.0;
    double max_torque = 3.0;
    double disturbance_std = 2.4;
    double failure_angle = std::numbers::pi / 4.0;
    std::size_t horizon = 20;
  };

  PendulumEnvironment() : PendulumEnvironment(Params{}) {}
  explicit PendulumEnvironment(Params params);

  std::string_view name() const override { return "pendulum"; }
  std::size_t state_dim() const override { return 2; }
  std::size_t disturbance_dim() const override { return 1; }
  std::size_t horizon() const override { return params_.horizon; }
  double gamma() const override { return params_.failure_angle; }

  State initial_state(std::uint64_t seed) const override;
  State step(const State& state, std::span<const double> disturbance,
             std::size_t t) const override;
  double robustness(const State& state) const override;
  NominalDisturbance nominal(const State& state) const override;
  nlohmann::json parameters() const override;

  /// Rule-based torque clip(-kp*theta - kd*theta_dot, -max_torque, max_torque).
  double control_torque(const State& state) const;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

/// Intelligent Driver Model acceleration for a follower at speed `speed`
/// behind an obstacle at distance `gap` moving at `leader_speed`. An
/// infinite gap means free road; a non-positive gap brakes at max_decel.
/// The result is clipped to [-max_decel, max_accel].
struct IdmParams {
  double desired_speed = 10.0;
  double time_headway = 1.5;
  double max_accel = 3.0;
  double comfortable_decel = 2.0;
  double min_gap = 4.0;
  double exponent = 4.0;
  double max_decel = 8.0;
};

double idm_acceleration(const IdmParams& idm, double speed, double gap, double leader_speed);

/// Autonomous vehicle on a straight road approaching a crosswalk at x = 0.
/// The vehicle follows IDM toward the *perceived* pedestrian when the
/// perceived pedestrian is inside the lane. The pedestrian is a double
/// integrator. Disturbances: pedestrian acceleration (ax, ay) and additive
/// perception noise on position (px, py) and longitudinal speed (v).
///
/// State layout: [av_x, av_v, ped_x, ped_y, ped_vx, ped_vy] (m, m/s).
/// The vehicle drives along y = 0. f = -min distance(vehicle, pedestrian).
class CrosswalkEnvironment final : public Environment {
 public:
  struct Params {
    double dt = 0.1;
    std::size_t horizon = 100;
    double av_start_x = -40.0;
    double av_start_speed = 10.0;
    double ped_start_x = 0.0;
    double ped_start_y = -3.0;
    double ped_start_vx = 0.0;
    double ped_start_vy = 1.0;
    double lane_half_width = 2.0;
    double collision_radius = 1.5;
    double accel_std = 0.38;
    double position_noise_std = 0.5;
    double speed_noise_std = 0.5;
    IdmParams idm{};
  };

  CrosswalkEnvironment() : CrosswalkEnvironment(Params{}) {}
  explicit CrosswalkEnvironment(Params params);

  std::string_view name() const override { return "crosswalk"; }
  std::size_t state_dim() const override { return 6; }
  std::size_t disturbance_dim() const override { return 5; }
  std::size_t horizon() const override { return params_.horizon; }
  double gamma() const override { return -params_.collision_radius; }

  State initial_state(std::uint64_t seed) const override;
  State step(const State& state, std::span<const double> disturbance,
             std::size_t t) const override;
  double robustness(const State& state) const override;
  NominalDisturbance nominal(const State& state) const override;
  nlohmann::json parameters() const override;

  /// Vehicle acceleration given the noisy perception in `disturbance`.
  double av_acceleration(const State& state, std::span<const double> disturbance) const;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

/// Vertical-plane two-aircraft encounter. The ownship flies level at
/// constant ground speed and issues a climb or descend advisory when the
/// predicted vertical miss distance at closest approach is small. The
/// disturbance is added to the intruder's nominal vertical rate.
///
/// State layout: [own_x, own_z, own_vz, int_x, int_z, int_vz, advisory]
/// (m, m/s; advisory in {-1, 0, +1}). f = -min(|dz|/z_scale + |dx|/x_scale).
class CollisionAvoidanceEnvironment final : public Environment {
 public:
  struct Params {
    double dt = 1.0;
    std::size_t horizon = 40;
    double own_speed = 50.0;
    double intruder_speed = 50.0;
    double intruder_start_x = 2000.0;
    double intruder_start_z = 60.0;
    double intruder_nominal_vz = 0.0;
    double vz_std = 1.24;
    double alert_time = 12.0;
    double alert_distance = 150.0;
    double advisory_rate = 8.0;
    double advisory_accel = 2.5;
    double z_scale = 30.0;
    double x_scale = 150.0;
    double collision_size = 1.0;
  };

  CollisionAvoidanceEnvironment() : CollisionAvoidanceEnvironment(Params{}) {}
  explicit CollisionAvoidanceEnvironment(Params params);

  std::string_view name() const override { return "collision"; }
  std::size_t state_dim() const override { return 7; }
  std::size_t disturbance_dim() const override { return 1; }
  std::size_t horizon() const override { return params_.horizon; }
  double gamma() const override { return -params_.collision_size; }

  State initial_state(std::uint64_t seed) const override;
  State step(const State& state, std::span<const double> disturbance,
             std::size_t t) const override;
  double robustness(const State& state) const override;
  NominalDisturbance nominal(const State& state) const override;
  nlohmann::json parameters() const override;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

void to_json(nlohmann::json& j, const ToyGaussianEnvironment::Params& p);
void from_json(const nlohmann::json& j, ToyGaussianEnvironment::Params& p);
void to_json(nlohmann::json& j, const PendulumEnvironment::Params& p);
void from_json(const nlohmann::json& j, PendulumEnvironment::Params& p);
void to_json(nlohmann::json& j, const IdmParams& p);
void from_json(const nlohmann::json& j, IdmParams& p);
void to_json(nlohmann::json& j, const CrosswalkEnvironment::Params& p);
void from_json(const nlohmann::json& j, CrosswalkEnvironment::Params& p);
void to_json(nlohmann::json& j, const CollisionAvoidanceEnvironment::Params& p);
void from_json(const nlohmann::json& j, CollisionAvoidanceEnvironment::Params& p);

}  // namespace spais
