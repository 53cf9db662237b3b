#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "berth/mlp.hpp"
#include "berth/replay.hpp"
#include "berth/vessel.hpp"

namespace berth {

inline Vec state_vec(const VesselState& s) {
    Vec x(6);
    x << s.u, s.v, s.phi, s.X, s.Y, s.psi;
    return x;
}

inline ControlAction to_action(const Vec& a) { return {a(0), a(1)}; }

inline Mlp make_actor_net() { return Mlp({6, 30, 2}, OutputActivation::Tanh); }
inline Mlp make_critic_net() { return Mlp({8, 100, 100, 1}, OutputActivation::Linear); }

// pi_theta(a|s) = mu_theta(s) + Z, Z ~ N(0, noise_scale^2 * Sigma_pi).
struct GaussianPolicy {
    Mlp actor = make_actor_net();
    Vec sigma_pi = Vec::Ones(2);  // diagonal of Sigma_pi
    double noise_scale = 1.0;

    Vec mean(const VesselState& s) const { return actor.forward(state_vec(s)); }

    ControlAction act(const VesselState& s, std::mt19937_64& rng, bool explore) const {
        Vec mu = mean(s);
        if (explore && noise_scale > 0.0) {
            std::normal_distribution<double> n01(0.0, 1.0);
            for (Eigen::Index i = 0; i < mu.size(); ++i)
                mu(i) += noise_scale * std::sqrt(sigma_pi(i)) * n01(rng);
        }
        return clip_action(to_action(mu));
    }
};

struct UpdateLosses {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

namespace detail {

inline void add_grads(GradientBundle& acc, const GradientBundle& g) {
    if (acc.dW.empty()) {
        acc.dW = g.dW;
        acc.db = g.db;
    } else {
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            acc.dW[l] += g.dW[l];
            acc.db[l] += g.db[l];
        }
    }
}

inline Mat pack_cols(const std::vector<Vec>& cols) {
    if (cols.empty()) throw std::invalid_argument("pack_cols: empty batch");
    Mat X(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = cols[i];
    return X;
}

// Accumulates d(coeff * sum_i (Q(X.col(i)) - y_i)^2)/domega into `acc` and
// returns coeff * sum of squared errors.
inline double critic_loss_grads(const Mlp& critic, const Mat& X, const Vec& targets, double coeff,
                                GradientBundle& acc) {
    Mat q = critic.forward_batch(X);  // 1 x n
    Vec err = q.transpose() - targets;
    double loss = coeff * err.squaredNorm();
    Mat up = (2.0 * coeff) * err.transpose();
    add_grads(acc, critic.backward_batch(X, up));
    return loss;
}

inline double critic_loss_grads(const Mlp& critic, const std::vector<Vec>& inputs,
                                const std::vector<double>& targets, double coeff,
                                GradientBundle& acc) {
    return critic_loss_grads(critic, pack_cols(inputs),
                             Eigen::Map<const Vec>(targets.data(),
                                                   static_cast<Eigen::Index>(targets.size())),
                             coeff, acc);
}

// Accumulates the gradient of mean_i Q(s_i, mu(s_i)) w.r.t. the actor into
// `acc` and returns that mean (the actor objective estimate). Columns of S
// are states.
inline double actor_q_objective_grads(const Mlp& actor, const Mlp& critic, const Mat& S,
                                      GradientBundle& acc) {
    const Eigen::Index n = S.cols();
    double inv_n = 1.0 / static_cast<double>(n);
    Mat mu = actor.forward_batch(S);
    Mat qin(S.rows() + mu.rows(), n);
    qin.topRows(S.rows()) = S;
    qin.bottomRows(mu.rows()) = mu;
    Mat q = critic.forward_batch(qin);
    Mat dX;
    critic.backward_batch(qin, Mat::Ones(1, n), &dX);
    add_grads(acc, actor.backward_batch(S, (inv_n * dX.bottomRows(mu.rows())).eval()));
    return q.sum() * inv_n;
}

// Mean critic input-gradient actor update: ascend E[dQ/da * dmu/dtheta].
// Returns the mean Q value (the actor objective estimate).
inline double actor_ascent(Mlp& actor, AdamState& adam, const Mlp& critic, const Mat& S,
                           double lr) {
    GradientBundle acc;
    double obj = actor_q_objective_grads(actor, critic, S, acc);
    adam_step(actor, acc, adam, lr, /*maximize=*/true);
    return obj;
}

inline double actor_ascent(Mlp& actor, AdamState& adam, const Mlp& critic,
                           const std::vector<Vec>& states, double lr) {
    return actor_ascent(actor, adam, critic, pack_cols(states), lr);
}

// One Adam step of the critic toward fixed targets; returns the pre-update
// mean squared TD error.
inline double critic_regress(Mlp& critic, AdamState& adam, const Mat& X, const Vec& targets,
                             double lr) {
    GradientBundle acc;
    double loss = critic_loss_grads(critic, X, targets, 1.0 / static_cast<double>(X.cols()), acc);
    if (!std::isfinite(loss)) throw std::runtime_error("critic_regress: non-finite loss");
    adam_step(critic, acc, adam, lr);
    return loss;
}

inline double critic_regress(Mlp& critic, AdamState& adam, const std::vector<Vec>& inputs,
                             const std::vector<double>& targets, double lr) {
    return critic_regress(critic, adam, pack_cols(inputs),
                          Eigen::Map<const Vec>(targets.data(),
                                                static_cast<Eigen::Index>(targets.size())),
                          lr);
}

}  // namespace detail

class DdpgAgent {
public:
    DdpgAgent(std::mt19937_64& init_rng, double gamma, double lr, double eps)
        : gamma_(gamma), lr_(lr), eps_(eps), critic_(make_critic_net()) {
        policy_.actor.init(init_rng, 3e-3);
        critic_.init(init_rng);
        target_actor_ = policy_.actor;
        target_critic_ = critic_;
        adam_actor_ = AdamState(policy_.actor);
        adam_critic_ = AdamState(critic_);
    }

    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }
    Mlp& critic() { return critic_; }
    const Mlp& critic() const { return critic_; }
    Mlp& target_actor() { return target_actor_; }
    Mlp& target_critic() { return target_critic_; }
    double gamma() const { return gamma_; }
    double lr() const { return lr_; }
    double eps() const { return eps_; }
    AdamState& adam_actor() { return adam_actor_; }
    AdamState& adam_critic() { return adam_critic_; }

    double td_target(const Transition& t) const {
        if (t.terminal) return t.r;
        Vec sn = state_vec(t.s_next);
        Vec an = target_actor_.forward(sn);
        Vec qin(8);
        qin << sn, an;
        return t.r + gamma_ * target_critic_.forward(qin)(0);
    }

    // Batched td_target over a whole batch (terminal rows masked).
    Vec td_targets(const std::vector<Transition>& batch) const {
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        Mat Sn(6, n);
        for (Eigen::Index i = 0; i < n; ++i) Sn.col(i) = state_vec(batch[i].s_next);
        Mat An = target_actor_.forward_batch(Sn);
        Mat Qin(8, n);
        Qin.topRows(6) = Sn;
        Qin.bottomRows(2) = An;
        Mat Q = target_critic_.forward_batch(Qin);
        Vec y(n);
        for (Eigen::Index i = 0; i < n; ++i)
            y(i) = batch[i].terminal ? batch[i].r : batch[i].r + gamma_ * Q(0, i);
        return y;
    }

    UpdateLosses update(const std::vector<Transition>& batch) {
        if (batch.empty()) throw std::invalid_argument("ddpg_update: empty batch");
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        Mat S(6, n);
        Mat X(8, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            S.col(i) = state_vec(batch[i].s);
            X.col(i).head(6) = S.col(i);
            X(6, i) = batch[i].a.tau_u;
            X(7, i) = batch[i].a.tau_phi;
        }
        Vec targets = td_targets(batch);
        UpdateLosses out;
        out.critic_loss = detail::critic_regress(critic_, adam_critic_, X, targets, lr_);
        out.actor_objective = detail::actor_ascent(policy_.actor, adam_actor_, critic_, S, lr_);
        soft_update(target_actor_, policy_.actor, eps_);
        soft_update(target_critic_, critic_, eps_);
        return out;
    }

private:
    double gamma_, lr_, eps_;
    GaussianPolicy policy_;
    Mlp critic_;
    Mlp target_actor_{make_actor_net()};
    Mlp target_critic_{make_critic_net()};
    AdamState adam_actor_{policy_.actor};
    AdamState adam_critic_{critic_};
};

inline UpdateLosses ddpg_update(DdpgAgent& ag, const std::vector<Transition>& batch) {
    return ag.update(batch);
}

struct Td3Losses {
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double actor_objective = 0.0;
    bool actor_updated = false;
};

class Td3Agent {
public:
    Td3Agent(std::mt19937_64& init_rng, double gamma, double lr, double eps,
             double target_noise_std = 0.2, double target_noise_clip = 0.5, int policy_delay = 2)
        : gamma_(gamma), lr_(lr), eps_(eps), sigma_tilde_(target_noise_std),
          clip_c_(target_noise_clip), delay_(policy_delay) {
        policy_.actor.init(init_rng, 3e-3);
        critic1_.init(init_rng);
        critic2_.init(init_rng);
        target_actor_ = policy_.actor;
        target_critic1_ = critic1_;
        target_critic2_ = critic2_;
    }

    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }
    Mlp& critic1() { return critic1_; }
    Mlp& critic2() { return critic2_; }
    Mlp& target_critic1() { return target_critic1_; }
    Mlp& target_critic2() { return target_critic2_; }
    Mlp& target_actor() { return target_actor_; }
    double gamma() const { return gamma_; }

    // Clipped double-Q target with clipped Gaussian noise on the target action.
    double td_target(const Transition& t, std::mt19937_64& rng) const {
        if (t.terminal) return t.r;
        Vec sn = state_vec(t.s_next);
        Vec an = target_actor_.forward(sn);
        if (sigma_tilde_ > 0.0) {
            std::normal_distribution<double> nz(0.0, sigma_tilde_);
            for (Eigen::Index i = 0; i < an.size(); ++i)
                an(i) += clip(nz(rng), -clip_c_, clip_c_);
        }
        an(0) = clip(an(0), kActionMin, kActionMax);
        an(1) = clip(an(1), kActionMin, kActionMax);
        Vec qin(8);
        qin << sn, an;
        double q1 = target_critic1_.forward(qin)(0);
        double q2 = target_critic2_.forward(qin)(0);
        return t.r + gamma_ * std::min(q1, q2);
    }

    Td3Losses update(const std::vector<Transition>& batch, std::mt19937_64& rng) {
        if (batch.empty()) throw std::invalid_argument("td3_update: empty batch");
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        Mat S(6, n);
        Mat X(8, n);
        Mat Sn(6, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            S.col(i) = state_vec(batch[i].s);
            X.col(i).head(6) = S.col(i);
            X(6, i) = batch[i].a.tau_u;
            X(7, i) = batch[i].a.tau_phi;
            Sn.col(i) = state_vec(batch[i].s_next);
        }
        Mat An = target_actor_.forward_batch(Sn);
        if (sigma_tilde_ > 0.0) {
            std::normal_distribution<double> nz(0.0, sigma_tilde_);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (batch[i].terminal) continue;  // target unused; no draws
                for (Eigen::Index j = 0; j < An.rows(); ++j)
                    An(j, i) += clip(nz(rng), -clip_c_, clip_c_);
            }
        }
        An = An.cwiseMax(kActionMin).cwiseMin(kActionMax);
        Mat Qin(8, n);
        Qin.topRows(6) = Sn;
        Qin.bottomRows(2) = An;
        Mat Q1 = target_critic1_.forward_batch(Qin);
        Mat Q2 = target_critic2_.forward_batch(Qin);
        Vec targets(n);
        for (Eigen::Index i = 0; i < n; ++i)
            targets(i) = batch[i].terminal
                             ? batch[i].r
                             : batch[i].r + gamma_ * std::min(Q1(0, i), Q2(0, i));

        Td3Losses out;
        out.critic1_loss = detail::critic_regress(critic1_, adam_c1_, X, targets, lr_);
        out.critic2_loss = detail::critic_regress(critic2_, adam_c2_, X, targets, lr_);
        ++step_count_;
        if (step_count_ % delay_ == 0) {
            out.actor_objective =
                detail::actor_ascent(policy_.actor, adam_actor_, critic1_, S, lr_);
            out.actor_updated = true;
            soft_update(target_actor_, policy_.actor, eps_);
            soft_update(target_critic1_, critic1_, eps_);
            soft_update(target_critic2_, critic2_, eps_);
        }
        return out;
    }

private:
    double gamma_, lr_, eps_, sigma_tilde_, clip_c_;
    int delay_;
    long step_count_ = 0;
    GaussianPolicy policy_;
    Mlp critic1_{make_critic_net()};
    Mlp critic2_{make_critic_net()};
    Mlp target_actor_{make_actor_net()};
    Mlp target_critic1_{make_critic_net()};
    Mlp target_critic2_{make_critic_net()};
    AdamState adam_actor_{policy_.actor};
    AdamState adam_c1_{critic1_};
    AdamState adam_c2_{critic2_};
};

inline Td3Losses td3_update(Td3Agent& ag, const std::vector<Transition>& batch,
                            std::mt19937_64& rng) {
    return ag.update(batch, rng);
}

}  // namespace berth
