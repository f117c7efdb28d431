#include "spais/environments.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>

namespace spais {
namespace {

void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> keys,
                        const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " parameters must be an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; });
    if (!known) throw std::invalid_argument(std::string("unknown ") + what + " parameter '" + key + "'");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

void require_finite(const State& s) {
  for (double v : s) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite state produced by dynamics");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Toy

ToyGaussianEnvironment::ToyGaussianEnvironment(Params params) : params_(params) {
  require_positive(params_.nominal_std, "toy nominal_std");
}

State ToyGaussianEnvironment::initial_state(std::uint64_t) const { return {0.0}; }

State ToyGaussianEnvironment::step(const State&, std::span<const double> x, std::size_t) const {
  return {x[0]};
}

NominalDisturbance ToyGaussianEnvironment::nominal(const State&) const {
  return {{0.0}, {params_.nominal_std}};
}

nlohmann::json ToyGaussianEnvironment::parameters() const { return params_; }

void to_json(nlohmann::json& j, const ToyGaussianEnvironment::Params& p) {
  j = {{"gamma", p.gamma}, {"nominal_std", p.nominal_std}};
}

void from_json(const nlohmann::json& j, ToyGaussianEnvironment::Params& p) {
  require_known_keys(j, {"gamma", "nominal_std"}, "toy");
  read(j, "gamma", p.gamma);
  read(j, "nominal_std", p.nominal_std);
}

// ---------------------------------------------------------------------------
// Pendulum

PendulumEnvironment::PendulumEnvironment(Params params) : params_(params) {
  require_positive(params_.dt, "pendulum dt");
  require_positive(params_.mass, "pendulum mass");
  require_positive(params_.length, "pendulum length");
  require_positive(params_.disturbance_std, "pendulum disturbance_std");
  if (params_.horizon == 0) throw std::invalid_argument("pendulum horizon must be positive");
}

State PendulumEnvironment::initial_state(std::uint64_t) const { return {0.0, 0.0}; }

double PendulumEnvironment::control_torque(const State& s) const {
  const double u = -params_.kp * s[0] - params_.kd * s[1];
  return std::clamp(u, -params_.max_torque, params_.max_torque);
}

State PendulumEnvironment::step(const State& s, std::span<const double> x, std::size_t) const {
  const auto& p = params_;
  const double inertia = p.mass * p.length * p.length;
  const double accel = (p.gravity / p.length) * std::sin(s[0]) + (control_torque(s) + x[0]) / inertia;
  const double omega = s[1] + p.dt * accel;
  State next{s[0] + p.dt * omega, omega};
  require_finite(next);
  return next;
}

double PendulumEnvironment::robustness(const State& s) const { return std::abs(s[0]); }

NominalDisturbance PendulumEnvironment::nominal(const State&) const {
  return {{0.0}, {params_.disturbance_std}};
}

nlohmann::json PendulumEnvironment::parameters() const { return params_; }

void to_json(nlohmann::json& j, const PendulumEnvironment::Params& p) {
  j = {{"dt", p.dt},
       {"gravity", p.gravity},
       {"mass", p.mass},
       {"length", p.length},
       {"kp", p.kp},
       {"kd", p.kd},
       {"max_torque", p.max_torque},
       {"disturbance_std", p.disturbance_std},
       {"failure_angle", p.failure_angle},
       {"horizon", p.horizon}};
}

void from_json(const nlohmann::json& j, PendulumEnvironment::Params& p) {
  require_known_keys(j,
                     {"dt", "gravity", "mass", "length", "kp", "kd", "max_torque", "disturbance_std",
                      "failure_angle", "horizon"},
                     "pendulum");
  read(j, "dt", p.dt);
  read(j, "gravity", p.gravity);
  read(j, "mass", p.mass);
  read(j, "length", p.length);
  read(j, "kp", p.kp);
  read(j, "kd", p.kd);
  read(j, "max_torque", p.max_torque);
  read(j, "disturbance_std", p.disturbance_std);
  read(j, "failure_angle", p.failure_angle);
  read(j, "horizon", p.horizon);
}

// ---------------------------------------------------------------------------
// Crosswalk

double idm_acceleration(const IdmParams& idm, double speed, double gap, double leader_speed) {
  const double free_term = std::pow(std::max(speed, 0.0) / idm.desired_speed, idm.exponent);
  double accel = 0.0;
  if (std::isinf(gap)) {
    accel = idm.max_accel * (1.0 - free_term);
  } else if (gap <= 0.0) {
    accel = -idm.max_decel;
  } else {
    const double closing = speed - leader_speed;
    const double desired_gap =
        idm.min_gap +
        std::max(0.0, speed * idm.time_headway +
                          speed * closing / (2.0 * std::sqrt(idm.max_accel * idm.comfortable_decel)));
    const double ratio = desired_gap / gap;
    accel = idm.max_accel * (1.0 - free_term - ratio * ratio);
  }
  return std::clamp(accel, -idm.max_decel, idm.max_accel);
}

CrosswalkEnvironment::CrosswalkEnvironment(Params params) : params_(params) {
  require_positive(params_.dt, "crosswalk dt");
  require_positive(params_.accel_std, "crosswalk accel_std");
  require_positive(params_.position_noise_std, "crosswalk position_noise_std");
  require_positive(params_.speed_noise_std, "crosswalk speed_noise_std");
  require_positive(params_.idm.desired_speed, "idm desired_speed");
  require_positive(params_.idm.max_accel, "idm max_accel");
  require_positive(params_.idm.comfortable_decel, "idm comfortable_decel");
  if (params_.horizon == 0) throw std::invalid_argument("crosswalk horizon must be positive");
}

State CrosswalkEnvironment::initial_state(std::uint64_t) const {
  const auto& p = params_;
  return {p.av_start_x, p.av_start_speed, p.ped_start_x, p.ped_start_y, p.ped_start_vx, p.ped_start_vy};
}

double CrosswalkEnvironment::av_acceleration(const State& s, std::span<const double> x) const {
  const double seen_x = s[2] + x[2];
  const double seen_y = s[3] + x[3];
  const double seen_vx = s[4] + x[4];
  double gap = std::numeric_limits<double>::infinity();
  if (std::abs(seen_y) < params_.lane_half_width && seen_x > s[0]) gap = seen_x - s[0];
  return idm_acceleration(params_.idm, s[1], gap, seen_vx);
}

State CrosswalkEnvironment::step(const State& s, std::span<const double> x, std::size_t) const {
  const double dt = params_.dt;
  const double av_speed = std::max(0.0, s[1] + dt * av_acceleration(s, x));
  const double ped_vx = s[4] + dt * x[0];
  const double ped_vy = s[5] + dt * x[1];
  State next{s[0] + dt * av_speed, av_speed, s[2] + dt * ped_vx, s[3] + dt * ped_vy, ped_vx, ped_vy};
  require_finite(next);
  return next;
}

double CrosswalkEnvironment::robustness(const State& s) const {
  return -std::hypot(s[2] - s[0], s[3]);
}

NominalDisturbance CrosswalkEnvironment::nominal(const State&) const {
  const auto& p = params_;
  return {{0.0, 0.0, 0.0, 0.0, 0.0},
          {p.accel_std, p.accel_std, p.position_noise_std, p.position_noise_std, p.speed_noise_std}};
}

nlohmann::json CrosswalkEnvironment::parameters() const { return params_; }

void to_json(nlohmann::json& j, const IdmParams& p) {
  j = {{"desired_speed", p.desired_speed},
       {"time_headway", p.time_headway},
       {"max_accel", p.max_accel},
       {"comfortable_decel", p.comfortable_decel},
       {"min_gap", p.min_gap},
       {"exponent", p.exponent},
       {"max_decel", p.max_decel}};
}

void from_json(const nlohmann::json& j, IdmParams& p) {
  require_known_keys(j,
                     {"desired_speed", "time_headway", "max_accel", "comfortable_decel", "min_gap",
                      "exponent", "max_decel"},
                     "idm");
  read(j, "desired_speed", p.desired_speed);
  read(j, "time_headway", p.time_headway);
  read(j, "max_accel", p.max_accel);
  read(j, "comfortable_decel", p.comfortable_decel);
  read(j, "min_gap", p.min_gap);
  read(j, "exponent", p.exponent);
  read(j, "max_decel", p.max_decel);
}

void to_json(nlohmann::json& j, const CrosswalkEnvironment::Params& p) {
  j = {{"dt", p.dt},
       {"horizon", p.horizon},
       {"av_start_x", p.av_start_x},
       {"av_start_speed", p.av_start_speed},
       {"ped_start_x", p.ped_start_x},
       {"ped_start_y", p.ped_start_y},
       {"ped_start_vx", p.ped_start_vx},
       {"ped_start_vy", p.ped_start_vy},
       {"lane_half_width", p.lane_half_width},
       {"collision_radius", p.collision_radius},
       {"accel_std", p.accel_std},
       {"position_noise_std", p.position_noise_std},
       {"speed_noise_std", p.speed_noise_std},
       {"idm", p.idm}};
}

void from_json(const nlohmann::json& j, CrosswalkEnvironment::Params& p) {
  require_known_keys(j,
                     {"dt", "horizon", "av_start_x", "av_start_speed", "ped_start_x", "ped_start_y",
                      "ped_start_vx", "ped_start_vy", "lane_half_width", "collision_radius", "accel_std",
                      "position_noise_std", "speed_noise_std", "idm"},
                     "crosswalk");
  read(j, "dt", p.dt);
  read(j, "horizon", p.horizon);
  read(j, "av_start_x", p.av_start_x);
  read(j, "av_start_speed", p.av_start_speed);
  read(j, "ped_start_x", p.ped_start_x);
  read(j, "ped_start_y", p.ped_start_y);
  read(j, "ped_start_vx", p.ped_start_vx);
  read(j, "ped_start_vy", p.ped_start_vy);
  read(j, "lane_half_width", p.lane_half_width);
  read(j, "collision_radius", p.collision_radius);
  read(j, "accel_std", p.accel_std);
  read(j, "position_noise_std", p.position_noise_std);
  read(j, "speed_noise_std", p.speed_noise_std);
  read(j, "idm", p.idm);
}

// ---------------------------------------------------------------------------
// Collision avoidance surrogate

CollisionAvoidanceEnvironment::CollisionAvoidanceEnvironment(Params params) : params_(params) {
  require_positive(params_.dt, "collision dt");
  require_positive(params_.vz_std, "collision vz_std");
  require_positive(params_.own_speed + params_.intruder_speed, "collision closing speed");
  require_positive(params_.z_scale, "collision z_scale");
  require_positive(params_.x_scale, "collision x_scale");
  if (params_.horizon == 0) throw std::invalid_argument("collision horizon must be positive");
}

State CollisionAvoidanceEnvironment::initial_state(std::uint64_t) const {
  const auto& p = params_;
  return {0.0, 0.0, 0.0, p.intruder_start_x, p.intruder_start_z, p.intruder_nominal_vz, 0.0};
}

State CollisionAvoidanceEnvironment::step(const State& s, std::span<const double> x,
                                          std::size_t) const {
  const auto& p = params_;
  double advisory = s[6];
  if (advisory == 0.0) {
    const double range = s[3] - s[0];
    if (range > 0.0) {
      const double time_to_cpa = range / (p.own_speed + p.intruder_speed);
      const double predicted_dz = (s[4] + s[5] * time_to_cpa) - (s[1] + s[2] * time_to_cpa);
      if (time_to_cpa <= p.alert_time && std::abs(predicted_dz) < p.alert_distance) {
        advisory = predicted_dz > 0.0 ? -1.0 : 1.0;
      }
    }
  }
  const double target_vz = advisory * p.advisory_rate;
  const double max_change = p.advisory_accel * p.dt;
  const double own_vz = s[2] + std::clamp(target_vz - s[2], -max_change, max_change);
  const double intruder_vz = p.intruder_nominal_vz + x[0];
  State next{s[0] + p.own_speed * p.dt,
             s[1] + own_vz * p.dt,
             own_vz,
             s[3] - p.intruder_speed * p.dt,
             s[4] + intruder_vz * p.dt,
             intruder_vz,
             advisory};
  require_finite(next);
  return next;
}

double CollisionAvoidanceEnvironment::robustness(const State& s) const {
  const auto& p = params_;
  return -(std::abs(s[4] - s[1]) / p.z_scale + std::abs(s[3] - s[0]) / p.x_scale);
}

NominalDisturbance CollisionAvoidanceEnvironment::nominal(const State&) const {
  return {{0.0}, {params_.vz_std}};
}

nlohmann::json CollisionAvoidanceEnvironment::parameters() const { return params_; }

void to_json(nlohmann::json& j, const CollisionAvoidanceEnvironment::Params& p) {
  j = {{"dt", p.dt},
       {"horizon", p.horizon},
       {"own_speed", p.own_speed},
       {"intruder_speed", p.intruder_speed},
       {"intruder_start_x", p.intruder_start_x},
       {"intruder_start_z", p.intruder_start_z},
       {"intruder_nominal_vz", p.intruder_nominal_vz},
       {"vz_std", p.vz_std},
       {"alert_time", p.alert_time},
       {"alert_distance", p.alert_distance},
       {"advisory_rate", p.advisory_rate},
       {"advisory_accel", p.advisory_accel},
       {"z_scale", p.z_scale},
       {"x_scale", p.x_scale},
       {"collision_size", p.collision_size}};
}

void from_json(const nlohmann::json& j, CollisionAvoidanceEnvironment::Params& p) {
  require_known_keys(j,
                     {"dt", "horizon", "own_speed", "intruder_speed", "intruder_start_x",
                      "intruder_start_z", "intruder_nominal_vz", "vz_std", "alert_time",
                      "alert_distance", "advisory_rate", "advisory_accel", "z_scale", "x_scale",
                      "collision_size"},
                     "collision");
  read(j, "dt", p.dt);
  read(j, "horizon", p.horizon);
  read(j, "own_speed", p.own_speed);
  read(j, "intruder_speed", p.intruder_speed);
  read(j, "intruder_start_x", p.intruder_start_x);
  read(j, "intruder_start_z", p.intruder_start_z);
  read(j, "intruder_nominal_vz", p.intruder_nominal_vz);
  read(j, "vz_std", p.vz_std);
  read(j, "alert_time", p.alert_time);
  read(j, "alert_distance", p.alert_distance);
  read(j, "advisory_rate", p.advisory_rate);
  read(j, "advisory_accel", p.advisory_accel);
  read(j, "z_scale", p.z_scale);
  read(j, "x_scale", p.x_scale);
  read(j, "collision_size", p.collision_size);
}

}  // namespace spais
