#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "spais/environments.hpp"
#include "spais/trajectory.hpp"

using namespace spais;

namespace {

// Treiber's IDM written out directly, unclipped.
double reference_idm(double v, double gap, double v_lead, double v0, double headway, double a, double b,
                     double s0, double delta) {
  const double s_star = s0 + std::max(0.0, v * headway + v * (v - v_lead) / (2.0 * std::sqrt(a * b)));
  return a * (1.0 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
}

}  // namespace

TEST_CASE("initial states") {
  CHECK(ToyGaussianEnvironment().initial_state(0) == State{0.0});
  CHECK(PendulumEnvironment().initial_state(99) == State{0.0, 0.0});
  const CrosswalkEnvironment cw;
  const auto s = cw.initial_state(5);
  CHECK(s == State{-40.0, 10.0, 0.0, -3.0, 0.0, 1.0});
  CHECK(cw.initial_state(5) == cw.initial_state(6));
  const CollisionAvoidanceEnvironment ca;
  CHECK(ca.initial_state(0).size() == 7);
  CHECK(ca.initial_state(0)[6] == 0.0);
}

TEST_CASE("pendulum step reference values") {
  const PendulumEnvironment env;
  const std::vector<double> zero{0.0};
  CHECK(env.step({0.0, 0.0}, zero, 0) == State{0.0, 0.0});

  // torque clips to -3; omega' = 0.05 (10 sin 0.1 - 3), theta' = 0.1 + 0.05 omega'
  const auto next = env.step({0.1, 0.0}, zero, 0);
  const double omega = 0.05 * (10.0 * std::sin(0.1) - 3.0);
  CHECK(next[1] == doctest::Approx(omega).epsilon(1e-14));
  CHECK(next[0] == doctest::Approx(0.1 + 0.05 * omega).epsilon(1e-14));
  CHECK(next[1] == doctest::Approx(-0.10008329170).epsilon(1e-9));

  // unsaturated PD branch
  CHECK(env.control_torque({0.01, -0.02}) == doctest::Approx(-0.4 + 0.16));
  CHECK(env.control_torque({1.0, 0.0}) == -3.0);
  CHECK(env.control_torque({-1.0, 0.0}) == 3.0);
}

TEST_CASE("pendulum is symmetric under theta -> -theta, x -> -x") {
  const PendulumEnvironment env;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const State s{rng.normal() * 0.3, rng.normal()};
    const std::vector<double> x{rng.normal() * 3};
    const std::vector<double> mx{-x[0]};
    const auto a = env.step(s, x, 0);
    const auto b = env.step({-s[0], -s[1]}, mx, 0);
    CHECK(a[0] == doctest::Approx(-b[0]).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(-b[1]).epsilon(1e-14));
  }
}

TEST_CASE("IDM matches an independent implementation away from the clip") {
  const IdmParams idm;
  Rng rng(8);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    const double v = 15.0 * rng.uniform();
    const double v_lead = 15.0 * rng.uniform();
    const double gap = 0.5 + 80.0 * rng.uniform();
    const double ref = reference_idm(v, gap, v_lead, idm.desired_speed, idm.time_headway, idm.max_accel,
                                     idm.comfortable_decel, idm.min_gap, idm.exponent);
    const double got = idm_acceleration(idm, v, gap, v_lead);
    if (ref > -idm.max_decel && ref < idm.max_accel) {
      CHECK(got == doctest::Approx(ref).epsilon(1e-12));
      ++compared;
    } else {
      CHECK(got == std::clamp(ref, -idm.max_decel, idm.max_accel));
    }
  }
  CHECK(compared > 500);
  CHECK(idm_acceleration(idm, 5.0, std::numeric_limits<double>::infinity(), 0.0) ==
        doctest::Approx(3.0 * (1.0 - std::pow(0.5, 4.0))));
  CHECK(idm_acceleration(idm, 5.0, 0.0, 0.0) == -idm.max_decel);
}

TEST_CASE("IDM brakes harder as the gap shrinks, so the closing speed falls faster") {
  const IdmParams idm;
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const double v = 2.0 + 10.0 * rng.uniform();
    const double v_lead = v * rng.uniform();
    const double gap = 1.0 + 50.0 * rng.uniform();
    const double closer = gap * (0.2 + 0.7 * rng.uniform());
    CHECK(idm_acceleration(idm, v, closer, v_lead) <= idm_acceleration(idm, v, gap, v_lead));
  }
  // strict away from the clip
  CHECK(idm_acceleration(idm, 8.0, 20.0, 0.0) < idm_acceleration(idm, 8.0, 40.0, 0.0));
}

TEST_CASE("crosswalk vehicle reacts to the perceived pedestrian") {
  const CrosswalkEnvironment env;
  const State s{-20.0, 10.0, 0.0, 0.0, 0.0, 1.0};
  const std::vector<double> clean{0, 0, 0, 0, 0};
  const std::vector<double> unseen{0, 0, 0, 5.0, 0};  // perceived outside the lane
  CHECK(env.av_acceleration(s, clean) < 0.0);
  CHECK(env.av_acceleration(s, unseen) ==
        doctest::Approx(idm_acceleration(env.params().idm, 10.0, std::numeric_limits<double>::infinity(), 0.0)));
  const auto next = env.step(s, clean, 0);
  CHECK(next[1] < s[1]);
  CHECK(next[3] == doctest::Approx(0.1));
}

TEST_CASE("nominal log densities") {
  const ToyGaussianEnvironment toy;
  const std::vector<double> two{2.0};
  CHECK(toy.nominal_log_prob({0.0}, two) == doctest::Approx(-2.9189385332046727).epsilon(1e-14));

  const PendulumEnvironment pend;
  const std::vector<double> zero{0.0};
  const double sd = pend.params().disturbance_std;
  CHECK(pend.nominal_log_prob({0.0, 0.0}, zero) ==
        doctest::Approx(static_cast<double>(oracle::log_normal_pdf(0.0L, 0.0L, sd))).epsilon(1e-14));

  const CrosswalkEnvironment cw;
  const auto nom = cw.nominal(cw.initial_state(0));
  CHECK(nom.mean.size() == 5);
  CHECK(nom.stddev.size() == 5);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.0, 1.0};
  long double expected = 0.0L;
  for (std::size_t d = 0; d < 5; ++d) expected += oracle::log_normal_pdf(x[d], nom.mean[d], nom.stddev[d]);
  CHECK(cw.nominal_log_prob(cw.initial_state(0), x) == doctest::Approx(static_cast<double>(expected)).epsilon(1e-13));

  const std::vector<double> wrong{0.0, 0.0};
  CHECK_THROWS_AS(pend.nominal_log_prob({0.0, 0.0}, wrong), std::invalid_argument);
}

TEST_CASE("nominal samples are finite and seed-determined") {
  for (const auto& name : environment_names()) {
    const auto env = make_environment(name);
    const auto s = env->initial_state(0);
    const auto a = env->nominal_sample(s, 31);
    const auto b = env->nominal_sample(s, 31);
    CHECK(a == b);
    CHECK(a.size() == env->disturbance_dim());
    CHECK(std::isfinite(env->nominal_log_prob(s, a)));
  }
}

TEST_CASE("evaluate is the running maximum of robustness over the given states") {
  const PendulumEnvironment pend;
  std::vector<State> states{{0.0, 0.0}, {0.0, 0.0}};
  CHECK(pend.evaluate(states) == 0.0);
  states.push_back({-1.0, 0.0});
  CHECK(pend.evaluate(states) == 1.0);
  CHECK(pend.evaluate(states) >= pend.gamma());

  const ToyGaussianEnvironment toy;
  const std::vector<State> failing{{2.5}};
  CHECK(toy.evaluate(failing) >= toy.gamma());
}

TEST_CASE("f depends on the states, not on how the disturbances were recorded") {
  const PendulumEnvironment env;
  auto traj = rollout(env, NominalSampler(env), 5);
  const double f = env.evaluate(traj.visited_states());
  CHECK(f == traj.f_value);
  for (auto& step : traj.steps) step.disturbance[0] = 1e9;
  CHECK(env.evaluate(traj.visited_states()) == f);
}

TEST_CASE("fixture failure trajectories replay to failures") {
  struct Case {
    const char* env;
    const char* file;
  };
  for (const Case c : {Case{"toy", "toy_failure.csv"}, Case{"pendulum", "pendulum_left_failure.csv"},
                       Case{"pendulum", "pendulum_right_failure.csv"},
                       Case{"crosswalk", "crosswalk_failure.csv"},
                       Case{"collision", "collision_failure.csv"}}) {
    CAPTURE(c.file);
    const auto env = make_environment(c.env);
    const auto xs = fixtures::load_disturbances(c.file);
    REQUIRE(xs.size() == env->horizon());
    const auto traj = replay(*env, xs);
    CHECK(traj.f_value >= env->gamma());
  }
}

TEST_CASE("pendulum fixtures fail in opposite directions") {
  const PendulumEnvironment env;
  auto extreme_theta = [&](const char* file) {
    const auto traj = replay(env, fixtures::load_disturbances(file));
    double best = 0.0;
    for (const auto& s : traj.visited_states()) {
      if (std::abs(s[0]) > std::abs(best)) best = s[0];
    }
    return best;
  };
  CHECK(extreme_theta("pendulum_left_failure.csv") <= -std::numbers::pi / 4);
  CHECK(extreme_theta("pendulum_right_failure.csv") >= std::numbers::pi / 4);
}

TEST_CASE("zero-disturbance runs are safe") {
  for (const auto& name : environment_names()) {
    CAPTURE(name);
    const auto env = make_environment(name);
    std::vector<std::vector<double>> xs(env->horizon(), std::vector<double>(env->disturbance_dim(), 0.0));
    if (name != "toy") CHECK(replay(*env, xs).f_value < env->gamma());
  }
}

TEST_CASE("collision surrogate issues an advisory that increases separation") {
  const CollisionAvoidanceEnvironment env;
  const std::vector<std::vector<double>> xs(env.horizon(), std::vector<double>{0.0});
  const auto traj = replay(env, xs);
  const auto states = traj.visited_states();
  const auto advised = std::find_if(states.begin(), states.end(), [](const State& s) { return s[6] != 0.0; });
  REQUIRE(advised != states.end());
  // intruder above ownship -> descend
  CHECK((*advised)[6] == -1.0);
  CHECK(states.back()[1] < env.initial_state(0)[1]);
}

TEST_CASE("registry and parameter validation") {
  CHECK(environment_names() == std::vector<std::string>{"toy", "pendulum", "crosswalk", "collision"});
  CHECK_THROWS_WITH_AS(make_environment("nosuch"), doctest::Contains("unknown environment 'nosuch'"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_environment("pendulum", {{"sigma", 1.0}}), doctest::Contains("sigma"),
                       std::invalid_argument);
  CHECK_THROWS_AS(make_environment("pendulum", {{"disturbance_std", -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(make_environment("crosswalk", {{"idm", {{"bogus", 1}}}}), std::invalid_argument);

  const auto env = make_environment("crosswalk", {{"idm", {{"min_gap", 3.0}}}});
  CHECK(env->parameters()["idm"]["min_gap"] == 3.0);
  CHECK(env->parameters()["idm"]["desired_speed"] == 10.0);
}

TEST_CASE("parameters round-trip through JSON and drive the hash") {
  for (const auto& name : environment_names()) {
    CAPTURE(name);
    const auto env = make_environment(name);
    const auto again = make_environment(name, env->parameters());
    CHECK(again->parameters() == env->parameters());
    CHECK(again->parameter_hash() == env->parameter_hash());
  }
  const auto a = make_environment("pendulum");
  const auto b = make_environment("pendulum", {{"disturbance_std", 2.5}});
  CHECK(a->parameter_hash() != b->parameter_hash());
  CHECK(a->parameter_hash().size() == 16);
}
