#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "berth/agents.hpp"
#include "berth/vessel.hpp"
#include "berth/world_model.hpp"

namespace berth {

// One-step state predictor: either a learned DynModel or the true dynamics.
using Predictor = std::function<VesselState(const VesselState&, const ControlAction&)>;

inline Predictor learned_predictor(const DynModel& m) {
    return [&m](const VesselState& s, const ControlAction& a) { return predict_next(m, s, a); };
}

inline Predictor oracle_predictor(const ShipParams& p, const BerthingTask& task) {
    return [&p, &task](const VesselState& s, const ControlAction& a) {
        VesselState n = dynamics_raw(s, a, p);
        n.u = clip(n.u, task.s_min[0], task.s_max[0]);
        n.v = clip(n.v, task.s_min[1], task.s_max[1]);
        n.phi = clip(n.phi, task.s_min[2], task.s_max[2]);
        n.psi = wrap_angle(n.psi);
        return n;
    };
}

// H+1 actions and H+1 predicted states; states[0] is the current true state.
struct ControlSequence {
    std::vector<ControlAction> actions;
    std::vector<VesselState> states;
};

struct RolloutScore {
    double g_hat = 0.0;
};

struct MpbeConfig {
    int M = 10;              // number of candidate sequences
    int H = 3;               // optimization horizon
    double gamma = 0.9;
    double noise_scale = 1.0;  // scale on the policy covariance during rollouts
    RewardSign sign = RewardSign::Negated;
};

inline ControlSequence rollout(const GaussianPolicy& policy, const Predictor& predict,
                               const VesselState& s_k, int H, double noise_scale,
                               std::mt19937_64& rng) {
    if (H < 1) throw std::invalid_argument("rollout: H must be >= 1");
    ControlSequence seq;
    seq.states.reserve(H + 1);
    seq.actions.reserve(H + 1);
    seq.states.push_back(s_k);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int l = 0; l <= H; ++l) {
        Vec mu = policy.mean(seq.states[l]);
        if (noise_scale > 0.0) {
            for (Eigen::Index i = 0; i < mu.size(); ++i)
                mu(i) += noise_scale * std::sqrt(policy.sigma_pi(i)) * n01(rng);
        }
        seq.actions.push_back(clip_action(to_action(mu)));
        if (l < H) seq.states.push_back(predict(seq.states[l], seq.actions[l]));
    }
    return seq;
}

// G_hat = sum_{l=0..H-1} gamma^l R(s_l, a_l) + gamma^H Qbar(s_H, a_H), with
// prev-action chaining inside the sequence starting from the environment's
// last executed action.
inline RolloutScore score_sequence(const ControlSequence& seq, const BerthingTask& task,
                                   RewardSign sign, const ControlAction& prev_a_env,
                                   const Mlp& target_critic, double gamma) {
    const int H = static_cast<int>(seq.actions.size()) - 1;
    double g = 0.0;
    double disc = 1.0;
    ControlAction prev = prev_a_env;
    for (int l = 0; l < H; ++l) {
        g += disc * reward(seq.states[l], seq.actions[l], prev, task, sign);
        prev = seq.actions[l];
        disc *= gamma;
    }
    Vec qin(8);
    qin << state_vec(seq.states[H]), seq.actions[H].tau_u, seq.actions[H].tau_phi;
    g += disc * target_critic.forward(qin)(0);
    return {g};
}

struct ExpertQuery {
    ControlAction action;
    int elite_index = 0;
    double elite_score = 0.0;
    double worst_score = 0.0;
};

// Sample M candidate sequences through the model, score each, and return the
// first action of the elite sequence. Ties break to the lowest sequence index.
inline ExpertQuery expert_query(const GaussianPolicy& policy, const Predictor& predict,
                                const Mlp& target_critic, const VesselState& s_k,
                                const ControlAction& prev_a_env, const BerthingTask& task,
                                const MpbeConfig& cfg, std::mt19937_64& rng) {
    if (cfg.M < 1) throw std::invalid_argument("expert_action: M must be >= 1");
    ExpertQuery out;
    std::vector<double> scores;
    scores.reserve(cfg.M);
    ControlAction best_first{};
    for (int m = 0; m < cfg.M; ++m) {
        ControlSequence seq = rollout(policy, predict, s_k, cfg.H, cfg.noise_scale, rng);
        double g = score_sequence(seq, task, cfg.sign, prev_a_env, target_critic, cfg.gamma).g_hat;
        scores.push_back(g);
        if (m == 0 || g > scores[out.elite_index]) {
            out.elite_index = m;
            best_first = seq.actions.front();
        }
    }
    out.action = best_first;
    out.elite_score = scores[out.elite_index];
    out.worst_score = *std::min_element(scores.begin(), scores.end());
#ifndef NDEBUG
    for (double g : scores) assert(out.elite_score >= g);
#endif
    return out;
}

}  // namespace berth
