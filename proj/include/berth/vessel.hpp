#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace berth {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Wrap to [0, 2pi).
inline double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

// Wrap a difference to [-pi, pi].
inline double wrap_angle_diff(double a) {
    double w = std::fmod(a + std::numbers::pi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w - std::numbers::pi;
}

// [u, v, phi, X, Y, psi]: body-frame surge/sway/yaw-rate plus earth-frame pose.
struct VesselState {
    double u = 0.0;    // surge velocity (m/s)
    double v = 0.0;    // sway velocity (m/s)
    double phi = 0.0;  // yaw rate (rad/s)
    double X = 0.0;    // earth-frame x (m)
    double Y = 0.0;    // earth-frame y (m)
    double psi = 0.0;  // yaw angle (rad), kept in [0, 2pi)

    std::array<double, 6> to_array() const { return {u, v, phi, X, Y, psi}; }
    static VesselState from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }

    bool finite() const {
        for (double x : to_array())
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// [tau_u, tau_phi]: surge force (N) and yaw moment (N*m), each in [-1, 1].
struct ControlAction {
    double tau_u = 0.0;
    double tau_phi = 0.0;

    bool finite() const { return std::isfinite(tau_u) && std::isfinite(tau_phi); }
};

inline constexpr double kActionMin = -1.0;
inline constexpr double kActionMax = 1.0;

inline double clip(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline ControlAction clip_action(const ControlAction& a) {
    return {clip(a.tau_u, kActionMin, kActionMax), clip(a.tau_phi, kActionMin, kActionMax)};
}

// Diagonal inertia and damping of the underactuated vessel.
struct ShipParams {
    double m11 = 19.0;
    double m22 = 35.2;
    double m33 = 4.2;
    double d11 = 4.0;
    double d22 = 10.0;
    double d33 = 1.0;
};

struct BerthingTask {
    std::array<double, 6> s_F;    // target state
    std::array<double, 6> s_min;  // lower state bounds
    std::array<double, 6> s_max;  // upper state bounds
    double delta = 0.5;           // boundary redundancy (m)
    double berth_center_x = 0.65;
    double berth_center_y = 1.0;
    double berth_half_x = 0.5;   // half of 1.0 m length, along X
    double berth_half_y = 0.25;  // half of 0.5 m width, along Y
    int T = 150;                 // episode step limit
};

inline BerthingTask default_task() {
    BerthingTask t;
    t.s_F = {0.0, 0.0, 0.0, 0.65, 1.0, deg2rad(180.0)};
    t.s_min = {0.0, 0.0, deg2rad(-5.0), 0.5, 0.5, 0.0};
    t.s_max = {1.0, 1.0, deg2rad(5.0), 9.5, 5.5, kTwoPi};
    return t;
}

enum class StopReason { Running, TimeLimit, OutOfBounds };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Running: return "Running";
        case StopReason::TimeLimit: return "TimeLimit";
        case StopReason::OutOfBounds: return "OutOfBounds";
    }
    return "?";
}

struct StepOutcome {
    VesselState next_state;
    double reward = 0.0;
    bool terminal = false;
    StopReason reason = StopReason::Running;
};

enum class RewardSign {
    Negated,   // -(d + log(d + 0.001)) - 0.1*|a - a_prev|  (default)
    Verbatim,  //   d + log(d + 0.001)  - 0.1*|a - a_prev|
};

// Distance to the target state with the yaw difference wrapped to [-pi, pi].
inline double state_distance(const VesselState& s, const BerthingTask& task) {
    auto sv = s.to_array();
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) {
        double e = sv[i] - task.s_F[i];
        acc += e * e;
    }
    double epsi = wrap_angle_diff(sv[5] - task.s_F[5]);
    acc += epsi * epsi;
    return std::sqrt(acc);
}

inline double reward(const VesselState& s, const ControlAction& a, const ControlAction& prev_a,
                     const BerthingTask& task, RewardSign sign = RewardSign::Negated) {
    if (!s.finite() || !a.finite() || !prev_a.finite())
        throw std::invalid_argument("reward: non-finite input");
    double d = state_distance(s, task);
    double du = a.tau_u - prev_a.tau_u;
    double dphi = a.tau_phi - prev_a.tau_phi;
    double smooth = 0.1 * std::sqrt(du * du + dphi * dphi);
    double dist_term = d + std::log(d + 0.001);
    if (sign == RewardSign::Negated) dist_term = -dist_term;
    return dist_term - smooth;
}

// Raw one-step dynamics, before velocity saturation. Positions advance with
// the current velocities; psi is left unwrapped.
inline VesselState dynamics_raw(const VesselState& s, const ControlAction& a,
                                const ShipParams& p) {
    VesselState n;
    n.u = s.u + (p.m22 / p.m11) * s.v * s.phi - (p.d11 / p.m11) * s.u + a.tau_u / p.m11;
    n.v = s.v - (p.m11 / p.m22) * s.u * s.phi - (p.d22 / p.m22) * s.v;
    n.phi = s.phi + ((p.m11 - p.m22) / p.m33) * s.u * s.v - (p.d33 / p.m33) * s.phi
            + a.tau_phi / p.m33;
    n.X = s.X + std::cos(s.psi) * s.u - std::sin(s.psi) * s.v;
    n.Y = s.Y + std::sin(s.psi) * s.u + std::cos(s.psi) * s.v;
    n.psi = s.psi + s.phi;
    return n;
}

inline StepOutcome step(const VesselState& s, const ControlAction& a, const ControlAction& prev_a,
                        const ShipParams& params, const BerthingTask& task, int k,
                        RewardSign sign = RewardSign::Negated) {
    if (!s.finite()) throw std::invalid_argument("step: non-finite state");
    if (!a.finite() || !prev_a.finite()) throw std::invalid_argument("step: non-finite action");

    VesselState n = dynamics_raw(s, a, params);
    n.u = clip(n.u, task.s_min[0], task.s_max[0]);
    n.v = clip(n.v, task.s_min[1], task.s_max[1]);
    n.phi = clip(n.phi, task.s_min[2], task.s_max[2]);
    n.psi = wrap_angle(n.psi);

    StepOutcome out;
    out.next_state = n;
    out.reward = reward(s, a, prev_a, task, sign);
    if (n.X < task.s_min[3] || n.X > task.s_max[3] || n.Y < task.s_min[4] || n.Y > task.s_max[4]) {
        out.reason = StopReason::OutOfBounds;
    } else if (k + 1 >= task.T) {
        out.reason = StopReason::TimeLimit;
    }
    out.terminal = out.reason != StopReason::Running;
    return out;
}

inline VesselState reset(int case_id) {
    switch (case_id) {
        case 1: return {0.0, 0.0, 0.0, 9.0, 5.0, deg2rad(270.0)};
        case 2: return {0.0, 0.0, 0.0, 9.0, 5.0, deg2rad(180.0)};
        case 3: return {0.0, 0.0, 0.0, 9.0, 1.0, deg2rad(180.0)};
        default: throw std::invalid_argument("reset: case_id must be 1, 2 or 3");
    }
}

inline bool in_berth_zone(const VesselState& s, const BerthingTask& task) {
    return std::abs(s.X - task.berth_center_x) <= task.berth_half_x &&
           std::abs(s.Y - task.berth_center_y) <= task.berth_half_y;
}

// One trajectory CSV row: k,u,v,phi,X,Y,psi_deg,tau_u,tau_phi,reward,in_zone
inline std::string trajectory_row(int k, const VesselState& s, const ControlAction& a,
                                  double r, bool in_zone) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d",
                  k, s.u, s.v, s.phi, s.X, s.Y, rad2deg(s.psi), a.tau_u, a.tau_phi, r,
                  in_zone ? 1 : 0);
    return buf;
}

inline const char* trajectory_header() {
    return "k,u,v,phi,X,Y,psi_deg,tau_u,tau_phi,reward,in_zone";
}

}  // namespace berth
