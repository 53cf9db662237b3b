#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "berth/mlp.hpp"
#include "berth/replay.hpp"
#include "berth/vessel.hpp"

namespace berth {

inline Vec state_action_vec(const VesselState& s, const ControlAction& a) {
    Vec x(8);
    x << s.u, s.v, s.phi, s.X, s.Y, s.psi, a.tau_u, a.tau_phi;
    return x;
}

// Training target: state delta with the yaw difference wrapped, matching the
// additive rollout recursion s' = s + f(s, a).
inline Vec state_delta(const VesselState& s, const VesselState& s_next) {
    Vec d(6);
    d << s_next.u - s.u, s_next.v - s.v, s_next.phi - s.phi, s_next.X - s.X, s_next.Y - s.Y,
        wrap_angle_diff(s_next.psi - s.psi);
    return d;
}

// Learned one-step dynamics model with per-dimension input/output whitening.
class DynModel {
public:
    DynModel()
        : net_({8, 100, 100, 6}, OutputActivation::Linear),
          in_mean_(Vec::Zero(8)),
          in_scale_(Vec::Ones(8)),
          out_mean_(Vec::Zero(6)),
          out_scale_(Vec::Ones(6)) {}

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    const Vec& in_mean() const { return in_mean_; }
    const Vec& in_scale() const { return in_scale_; }
    const Vec& out_mean() const { return out_mean_; }
    const Vec& out_scale() const { return out_scale_; }

    void init(std::mt19937_64& rng) { net_.init(rng); }

    Vec normalize_in(const Vec& x) const {
        return (x - in_mean_).cwiseQuotient(in_scale_);
    }
    Vec denormalize_out(const Vec& y) const {
        return y.cwiseProduct(out_scale_) + out_mean_;
    }

    // Delta predicted for (s, a), in raw state units.
    Vec predict_delta(const VesselState& s, const ControlAction& a) const {
        return denormalize_out(net_.forward(normalize_in(state_action_vec(s, a))));
    }

    template <typename TransitionRange>
    void set_stats_from(const TransitionRange& data) {
        if (data.empty()) throw std::invalid_argument("DynModel: empty data for stats");
        Vec xin = Vec::Zero(8), xin2 = Vec::Zero(8);
        Vec dout = Vec::Zero(6), dout2 = Vec::Zero(6);
        for (const auto& t : data) {
            Vec x = state_action_vec(t.s, t.a);
            Vec d = state_delta(t.s, t.s_next);
            xin += x;
            xin2 += x.cwiseProduct(x);
            dout += d;
            dout2 += d.cwiseProduct(d);
        }
        double n = static_cast<double>(data.size());
        in_mean_ = xin / n;
        out_mean_ = dout / n;
        Vec var_in = (xin2 / n - in_mean_.cwiseProduct(in_mean_)).cwiseMax(0.0);
        Vec var_out = (dout2 / n - out_mean_.cwiseProduct(out_mean_)).cwiseMax(0.0);
        in_scale_ = var_in.cwiseSqrt().cwiseMax(1e-6);
        out_scale_ = var_out.cwiseSqrt().cwiseMax(1e-6);
    }

    // One Adam step on the normalized-space MSE of the batch; returns the
    // pre-update loss.
    double train_step(const std::vector<Transition>& batch, AdamState& adam, double lr) {
        if (batch.empty()) throw std::invalid_argument("DynModel: empty batch");
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        double inv_n = 1.0 / static_cast<double>(n);
        Mat X(8, n);
        Mat T(6, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            X.col(i) = normalize_in(state_action_vec(batch[i].s, batch[i].a));
            T.col(i) =
                (state_delta(batch[i].s, batch[i].s_next) - out_mean_).cwiseQuotient(out_scale_);
        }
        Mat pred = net_.forward_batch(X);
        Mat err = pred - T;
        double loss = err.squaredNorm() * inv_n;
        GradientBundle acc = net_.backward_batch(X, ((2.0 * inv_n) * err).eval());
        if (!std::isfinite(loss)) throw std::runtime_error("DynModel: non-finite loss");
        adam_step(net_, acc, adam, lr);
        return loss;
    }

private:
    Mlp net_;
    Vec in_mean_, in_scale_, out_mean_, out_scale_;
};

inline VesselState predict_next(const DynModel& m, const VesselState& s, const ControlAction& a) {
    if (!s.finite() || !a.finite()) throw std::invalid_argument("predict_next: non-finite input");
    Vec d = m.predict_delta(s, a);
    VesselState n{s.u + d(0), s.v + d(1), s.phi + d(2), s.X + d(3), s.Y + d(4),
                  wrap_angle(s.psi + d(5))};
    return n;
}

// `steps` Adam updates on one fixed batch (stats recomputed first); returns
// the final-pass loss.
inline double fit_model(DynModel& m, const std::vector<Transition>& batch, int steps,
                        AdamState& adam, double lr) {
    if (batch.empty()) throw std::invalid_argument("fit_model: empty batch");
    m.set_stats_from(batch);
    double loss = 0.0;
    for (int i = 0; i < steps; ++i) loss = m.train_step(batch, adam, lr);
    return loss;
}

}  // namespace berth
