#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "berth/vessel.hpp"

using namespace berth;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("zero dynamics is a fixed point") {
    VesselState s{0, 0, 0, 5, 3, 0};
    StepOutcome out = step(s, {0, 0}, {0, 0}, {}, default_task(), 0);
    CHECK(out.next_state.u == 0.0);
    CHECK(out.next_state.v == 0.0);
    CHECK(out.next_state.phi == 0.0);
    CHECK(out.next_state.X == 5.0);
    CHECK(out.next_state.Y == 3.0);
    CHECK(out.next_state.psi == 0.0);
    CHECK(!out.terminal);
}

TEST_CASE("surge force acts through 1/m11") {
    VesselState s{0, 0, 0, 9, 5, 3 * pi / 2};
    StepOutcome out = step(s, {1, 0}, {0, 0}, {}, default_task(), 0);
    CHECK(out.next_state.u == doctest::Approx(1.0 / 19.0).epsilon(1e-12));
    CHECK(out.next_state.v == 0.0);
    CHECK(out.next_state.phi == 0.0);
    CHECK(out.next_state.X == 9.0);
    CHECK(out.next_state.Y == 5.0);
    CHECK(out.next_state.psi == doctest::Approx(3 * pi / 2));
}

TEST_CASE("yaw moment saturates at 5 deg/s") {
    VesselState s{0, 0, 0, 5, 3, 0};
    // raw phi' = 1/4.2 ~ 0.238095, clipped to 5 deg/s
    CHECK(1.0 / 4.2 == doctest::Approx(0.238095).epsilon(1e-5));
    StepOutcome out = step(s, {0, 1}, {0, 0}, {}, default_task(), 0);
    CHECK(out.next_state.phi == doctest::Approx(deg2rad(5.0)).epsilon(1e-12));
}

TEST_CASE("reward at the target") {
    BerthingTask task = default_task();
    VesselState s = VesselState::from_array(task.s_F);
    CHECK(reward(s, {0, 0}, {0, 0}, task, RewardSign::Verbatim) ==
          doctest::Approx(std::log(0.001)).epsilon(1e-12));
}

TEST_CASE("reward at unit distance, negated mode") {
    BerthingTask task = default_task();
    VesselState s = VesselState::from_array(task.s_F);
    s.X += 1.0;  // d = 1
    CHECK(reward(s, {0, 0}, {0, 0}, task) ==
          doctest::Approx(-(1.0 + std::log(1.001))).epsilon(1e-12));
}

TEST_CASE("identical consecutive actions contribute no smoothness penalty") {
    BerthingTask task = default_task();
    VesselState s{0.1, 0.05, 0.01, 4, 2, 1};
    ControlAction a{0.3, -0.7};
    double base = reward(s, a, a, task);
    double d = state_distance(s, task);
    CHECK(base == doctest::Approx(-(d + std::log(d + 0.001))).epsilon(1e-12));
}

TEST_CASE("smoothness penalty is symmetric in the action pair") {
    BerthingTask task = default_task();
    VesselState s{0.1, 0.0, 0.0, 4, 2, 1};
    ControlAction a{0.3, -0.7}, b{-0.2, 0.4};
    double ra = reward(s, a, b, task);
    double rb = reward(s, b, a, task);
    CHECK(ra == doctest::Approx(rb).epsilon(1e-12));
}

TEST_CASE("reset cases") {
    VesselState c1 = reset(1);
    CHECK(c1.X == 9.0);
    CHECK(c1.Y == 5.0);
    CHECK(c1.psi == doctest::Approx(deg2rad(270.0)));
    VesselState c2 = reset(2);
    CHECK(c2.psi == doctest::Approx(pi));
    VesselState c3 = reset(3);
    CHECK(c3.Y == 1.0);
    CHECK(c3.psi == doctest::Approx(pi));
    CHECK_THROWS_AS(reset(0), std::invalid_argument);
    CHECK_THROWS_AS(reset(4), std::invalid_argument);
}

TEST_CASE("berth zone membership") {
    BerthingTask task = default_task();
    CHECK(in_berth_zone({0, 0, 0, 0.65, 1.0, 0}, task));
    CHECK(in_berth_zone({0, 0, 0, 1.15, 1.0, 0}, task));  // boundary inclusive
    CHECK(!in_berth_zone({0, 0, 0, 9.0, 5.0, 0}, task));
}

TEST_CASE("step rejects non-finite inputs") {
    VesselState bad{0, 0, 0, std::nan(""), 3, 0};
    CHECK_THROWS_AS(step(bad, {0, 0}, {0, 0}, {}, default_task(), 0), std::invalid_argument);
    VesselState s{0, 0, 0, 5, 3, 0};
    CHECK_THROWS_AS(step(s, {std::nan(""), 0}, {0, 0}, {}, default_task(), 0),
                    std::invalid_argument);
}

TEST_CASE("pre-saturation control affinity") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    ShipParams p;
    for (int i = 0; i < 50; ++i) {
        VesselState s{std::abs(u(rng)), std::abs(u(rng)), 0.1 * u(rng), 5 + u(rng), 3 + u(rng),
                      wrap_angle(6 * u(rng))};
        double t0 = u(rng), t1 = u(rng);
        VesselState a = dynamics_raw(s, {t0, 0.0}, p);
        VesselState b = dynamics_raw(s, {t1, 0.0}, p);
        CHECK((a.u - b.u) / (t0 - t1) == doctest::Approx(1.0 / p.m11).epsilon(1e-10));
        VesselState c = dynamics_raw(s, {0.0, t0}, p);
        VesselState d = dynamics_raw(s, {0.0, t1}, p);
        CHECK((c.phi - d.phi) / (t0 - t1) == doctest::Approx(1.0 / p.m33).epsilon(1e-10));
    }
}

TEST_CASE("frame consistency: forward motion at psi=0 moves +X only") {
    VesselState s{0.4, 0.0, 0.0, 5, 3, 0};
    StepOutcome out = step(s, {0, 0}, {0, 0}, {}, default_task(), 0);
    CHECK(out.next_state.X > s.X);
    CHECK(out.next_state.Y == s.Y);
}

TEST_CASE("psi wraps into [0, 2pi)") {
    VesselState s{0, 0, deg2rad(4.0), 5, 3, kTwoPi - 1e-3};
    StepOutcome out = step(s, {0, 0}, {0, 0}, {}, default_task(), 0);
    CHECK(out.next_state.psi >= 0.0);
    CHECK(out.next_state.psi < kTwoPi);
}

TEST_CASE("bound violation terminates") {
    BerthingTask task = default_task();
    VesselState s{1.0, 0, 0, 9.4, 3, 0};  // heading +X at the upper bound
    StepOutcome out = step(s, {0, 0}, {0, 0}, {}, task, 0);
    CHECK(out.terminal);
    CHECK(out.reason == StopReason::OutOfBounds);
}

TEST_CASE("time limit terminates") {
    BerthingTask task = default_task();
    VesselState s{0, 0, 0, 5, 3, 0};
    StepOutcome out = step(s, {0, 0}, {0, 0}, {}, task, task.T - 1);
    CHECK(out.terminal);
    CHECK(out.reason == StopReason::TimeLimit);
}

TEST_CASE("determinism of step") {
    VesselState s{0.2, 0.1, 0.02, 4, 2, 1.5};
    ControlAction a{0.5, -0.3}, pa{0.1, 0.2};
    StepOutcome o1 = step(s, a, pa, {}, default_task(), 3);
    StepOutcome o2 = step(s, a, pa, {}, default_task(), 3);
    CHECK(o1.next_state.to_array() == o2.next_state.to_array());
    CHECK(o1.reward == o2.reward);
}
