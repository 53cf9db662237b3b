#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "berth/agents.hpp"
#include "berth/mpbe.hpp"
#include "berth/replay.hpp"
#include "berth/vessel.hpp"
#include "berth/world_model.hpp"

namespace berth {

// ---------------------------------------------------------------------------
// KL divergence between diagonal Gaussians: KL(A || B).

inline double gaussian_kl(const Vec& mu_a, const Vec& cov_a, const Vec& mu_b, const Vec& cov_b) {
    const Eigen::Index n = mu_a.size();
    if (mu_b.size() != n || cov_a.size() != n || cov_b.size() != n)
        throw std::invalid_argument("gaussian_kl: dimension mismatch");
    if ((cov_a.array() <= 0.0).any() || (cov_b.array() <= 0.0).any())
        throw std::invalid_argument("gaussian_kl: non-positive variance");
    double logdet = 0.0, trace = 0.0, quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        logdet += std::log(cov_b(i)) - std::log(cov_a(i));
        trace += cov_a(i) / cov_b(i);
        double d = mu_b(i) - mu_a(i);
        quad += d * d / cov_b(i);
    }
    return 0.5 * (logdet - static_cast<double>(n) + trace + quad);
}

// ---------------------------------------------------------------------------
// Environment bundle used by the episode drivers.

struct BerthingEnv {
    ShipParams params;
    BerthingTask task = default_task();
    RewardSign sign = RewardSign::Negated;
    int case_id = 1;
};

// Per-episode training record (one CSV row).
struct EpisodeLog {
    int episode = 0;
    double ret = 0.0;
    double test_return = std::numeric_limits<double>::quiet_NaN();
    double critic_loss = 0.0;
    double actor_obj = 0.0;
    double lambda = 0.0;
    double imitation_residual = 0.0;
    double model_loss = 0.0;
    int steps = 0;
    StopReason reason = StopReason::Running;
};

// Episode-end model refit: whitening stats from everything stored, then
// `steps` Adam updates on fresh minibatches.
template <typename Buffer>
inline double refit_model(DynModel& model, AdamState& adam, const Buffer& buf, int steps,
                          std::size_t batch_size, double lr, std::mt19937_64& rng) {
    if (buf.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<Transition> all;
    all.reserve(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if constexpr (std::is_same_v<std::decay_t<decltype(buf[i])>, AugmentedTransition>) {
            const auto& t = buf[i];
            all.push_back({t.s, t.a, t.r, t.s_next, t.terminal});
        } else {
            all.push_back(buf[i]);
        }
    }
    model.set_stats_from(all);
    std::vector<Transition> mini;
    double loss = 0.0;
    std::uniform_int_distribution<std::size_t> d(0, all.size() - 1);
    for (int i = 0; i < steps; ++i) {
        mini.clear();
        for (std::size_t j = 0; j < batch_size; ++j) mini.push_back(all[d(rng)]);
        loss = model.train_step(mini, adam, lr);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// MP-DDPG: DDPG trained from expert-generated transitions, with optional
// stochastic mixing (SM) of expert/agent control and a behavior-cloning (BC)
// penalty on the actor.

class MpDdpgAgent {
public:
    MpDdpgAgent(std::mt19937_64& init_rng, double gamma, double lr, double eps, bool use_sm,
                bool use_bc, double lambda_bc, std::size_t buffer_capacity)
        : base_(init_rng, gamma, lr, eps), use_sm_(use_sm), use_bc_(use_bc),
          lambda_bc_(lambda_bc), rb_expert_(buffer_capacity), rb_agent_(buffer_capacity) {
        if (lambda_bc < 0.0) throw std::invalid_argument("MpDdpgAgent: lambda_bc must be >= 0");
        model_.init(init_rng);
    }

    DdpgAgent& base() { return base_; }
    const DdpgAgent& base() const { return base_; }
    bool use_sm() const { return use_sm_; }
    bool use_bc() const { return use_bc_; }
    double lambda_bc() const { return lambda_bc_; }
    RingBuffer<Transition>& rb_expert() { return rb_expert_; }
    RingBuffer<Transition>& rb_agent() { return rb_agent_; }
    DynModel& model() { return model_; }
    AdamState& model_adam() { return model_adam_; }

    // Critic: TD regression over the expert buffer alone, or a two-term sum
    // over both buffers under SM. Actor: mean critic value of the actor's
    // action, minus the BC penalty when enabled.
    UpdateLosses update(std::size_t n, std::mt19937_64& sample_rng) {
        if (rb_expert_.empty() || (use_sm_ && rb_agent_.empty()))
            throw std::runtime_error("mpddpg_update: required buffer empty");
        std::vector<Transition> batch_e = rb_expert_.sample(n, sample_rng);
        std::vector<Transition> batch_a;
        if (use_sm_) batch_a = rb_agent_.sample(n, sample_rng);

        // Critic.
        GradientBundle cgrads;
        double closs = 0.0;
        auto term = [&](const std::vector<Transition>& b) {
            const Eigen::Index m = static_cast<Eigen::Index>(b.size());
            Mat X(8, m);
            for (Eigen::Index i = 0; i < m; ++i) {
                X.col(i).head(6) = state_vec(b[i].s);
                X(6, i) = b[i].a.tau_u;
                X(7, i) = b[i].a.tau_phi;
            }
            closs += detail::critic_loss_grads(base_.critic(), X, base_.td_targets(b),
                                               1.0 / static_cast<double>(b.size()), cgrads);
        };
        term(batch_e);
        if (use_sm_) term(batch_a);
        if (!std::isfinite(closs)) throw std::runtime_error("mpddpg_update: non-finite loss");
        adam_step(base_.critic(), cgrads, base_.adam_critic(), base_.lr());

        // Actor. Q-term states come from RB_theta under SM, otherwise RB_E.
        const std::vector<Transition>& q_batch = use_sm_ ? batch_a : batch_e;
        const Eigen::Index nq = static_cast<Eigen::Index>(q_batch.size());
        Mat S(6, nq);
        for (Eigen::Index i = 0; i < nq; ++i) S.col(i) = state_vec(q_batch[i].s);
        GradientBundle agrads;
        Mlp& actor = base_.policy().actor;
        double aobj = detail::actor_q_objective_grads(actor, base_.critic(), S, agrads);
        if (use_bc_) {
            const Eigen::Index ne = static_cast<Eigen::Index>(batch_e.size());
            double inv_e = 1.0 / static_cast<double>(ne);
            Mat Se(6, ne);
            for (Eigen::Index i = 0; i < ne; ++i) Se.col(i) = state_vec(batch_e[i].s);
            Mat mu = actor.forward_batch(Se);
            Mat up = Mat::Zero(2, ne);
            for (Eigen::Index i = 0; i < ne; ++i) {
                Vec resid(2);
                resid << mu(0, i) - batch_e[i].a.tau_u, mu(1, i) - batch_e[i].a.tau_phi;
                double norm = resid.norm();
                aobj -= lambda_bc_ * norm * inv_e;
                if (norm > 1e-12) up.col(i) = (-lambda_bc_ * inv_e / norm) * resid;
            }
            detail::add_grads(agrads, actor.backward_batch(Se, up));
        }
        adam_step(actor, agrads, base_.adam_actor(), base_.lr(), /*maximize=*/true);

        soft_update(base_.target_actor(), actor, base_.eps());
        soft_update(base_.target_critic(), base_.critic(), base_.eps());
        return {closs, aobj};
    }

private:
    DdpgAgent base_;
    bool use_sm_, use_bc_;
    double lambda_bc_;
    RingBuffer<Transition> rb_expert_;
    RingBuffer<Transition> rb_agent_;
    DynModel model_;
    AdamState model_adam_{model_.net()};
};

inline UpdateLosses mpddpg_update(MpDdpgAgent& ag, std::size_t n, std::mt19937_64& sample_rng) {
    return ag.update(n, sample_rng);
}

struct EpisodeRngs {
    std::mt19937_64* exploration;
    std::mt19937_64* mpbe;
    std::mt19937_64* sampling;
};

struct TrainingKnobs {
    std::size_t batch_size = 64;
    int model_fit_steps = 200;
    double model_lr = 0.001;
};

// One MP-DDPG training episode. Odd steps go to the expert under SM; without
// SM the expert acts at every step.
inline EpisodeLog mpddpg_episode(MpDdpgAgent& ag, const BerthingEnv& env, const Predictor& predict,
                                 const MpbeConfig& mpbe_cfg, const TrainingKnobs& knobs,
                                 EpisodeRngs rngs) {
    EpisodeLog log;
    VesselState s = reset(env.case_id);
    ControlAction prev_a{};
    double resid_sum = 0.0;
    int expert_steps = 0;
    for (int k = 0; k < env.task.T; ++k) {
        bool expert_turn = !ag.use_sm() || (k % 2 == 1);
        ControlAction a;
        if (expert_turn) {
            a = expert_query(ag.base().policy(), predict, ag.base().target_critic(), s, prev_a,
                             env.task, mpbe_cfg, *rngs.mpbe)
                    .action;
            Vec mu = ag.base().policy().mean(s);
            resid_sum += std::hypot(mu(0) - a.tau_u, mu(1) - a.tau_phi);
            ++expert_steps;
        } else {
            a = ag.base().policy().act(s, *rngs.exploration, true);
        }
        StepOutcome out = step(s, a, prev_a, env.params, env.task, k, env.sign);
        // Always-bootstrap convention; see baseline_episode for the rationale.
        Transition t{s, a, out.reward, out.next_state, false};
        if (expert_turn) {
            ag.rb_expert().push(t);
        } else {
            ag.rb_agent().push(t);
        }
        log.ret += out.reward;
        log.steps += 1;
        log.reason = out.reason;
        if (!ag.rb_expert().empty() && (!ag.use_sm() || !ag.rb_agent().empty())) {
            UpdateLosses l = ag.update(knobs.batch_size, *rngs.sampling);
            log.critic_loss += l.critic_loss;
            log.actor_obj += l.actor_objective;
        }
        s = out.next_state;
        prev_a = a;
        // Full-horizon episode; see baseline_episode for the rationale.
    }
    if (log.steps > 0) {
        log.critic_loss /= log.steps;
        log.actor_obj /= log.steps;
    }
    if (expert_steps > 0) log.imitation_residual = resid_sum / expert_steps;

    // Episode-end model refit from everything stored in both buffers.
    if (ag.use_sm() && !ag.rb_agent().empty()) {
        std::vector<Transition> all;
        for (std::size_t i = 0; i < ag.rb_expert().size(); ++i) all.push_back(ag.rb_expert()[i]);
        for (std::size_t i = 0; i < ag.rb_agent().size(); ++i) all.push_back(ag.rb_agent()[i]);
        ag.model().set_stats_from(all);
        std::vector<Transition> mini;
        std::uniform_int_distribution<std::size_t> d(0, all.size() - 1);
        for (int i = 0; i < knobs.model_fit_steps; ++i) {
            mini.clear();
            for (std::size_t j = 0; j < knobs.batch_size; ++j) mini.push_back(all[d(*rngs.sampling)]);
            log.model_loss = ag.model().train_step(mini, ag.model_adam(), knobs.model_lr);
        }
    } else {
        log.model_loss = refit_model(ag.model(), ag.model_adam(), ag.rb_expert(),
                                     knobs.model_fit_steps, knobs.batch_size, knobs.model_lr,
                                     *rngs.sampling);
    }
    return log;
}

// ---------------------------------------------------------------------------
// SGAC: actor-critic with a KL-based imitation constraint handled by dual
// ascent on a multiplier lambda. The expert action is stored as a label; the
// agent's own noisy action is always the one executed.

class SgacAgent {
public:
    SgacAgent(std::mt19937_64& init_rng, double gamma, double lr, double eps, double lambda0,
              double zeta, std::size_t buffer_capacity, double target_noise_std = 0.2,
              double target_noise_clip = 0.5)
        : gamma_(gamma), lr_(lr), eps_(eps), lambda_(lambda0), zeta_(zeta),
          sigma_tilde_(target_noise_std), clip_c_(target_noise_clip), rb_(buffer_capacity) {
        if (lambda0 < 0.0) throw std::invalid_argument("SgacAgent: lambda0 must be >= 0");
        policy_.actor.init(init_rng, 3e-3);
        critic1_.init(init_rng);
        critic2_.init(init_rng);
        target_actor_ = policy_.actor;
        target_critic1_ = critic1_;
        target_critic2_ = critic2_;
        model_.init(init_rng);
    }

    GaussianPolicy& policy() { return policy_; }
    const GaussianPolicy& policy() const { return policy_; }
    Mlp& critic1() { return critic1_; }
    Mlp& critic2() { return critic2_; }
    Mlp& target_critic1() { return target_critic1_; }
    Mlp& target_critic2() { return target_critic2_; }
    Mlp& target_actor() { return target_actor_; }
    double lambda() const { return lambda_; }
    void set_lambda(double l) { lambda_ = l; }
    double zeta() const { return zeta_; }
    double gamma() const { return gamma_; }
    double lr() const { return lr_; }
    double eps() const { return eps_; }
    RingBuffer<AugmentedTransition>& rb() { return rb_; }
    DynModel& model() { return model_; }
    AdamState& model_adam() { return model_adam_; }
    AdamState& adam_actor() { return adam_actor_; }

    // Clipped double-Q TD regression, then polyak update of both critic
    // targets.
    std::pair<double, double> critic_step(const std::vector<AugmentedTransition>& batch,
                                          std::mt19937_64& rng) {
        if (batch.empty()) throw std::invalid_argument("sgac_critic_step: empty batch");
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        Mat X(8, n);
        Mat Sn(6, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            X.col(i).head(6) = state_vec(batch[i].s);
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
        Mat Qn(8, n);
        Qn.topRows(6) = Sn;
        Qn.bottomRows(2) = An;
        Mat Q1 = target_critic1_.forward_batch(Qn);
        Mat Q2 = target_critic2_.forward_batch(Qn);
        Vec targets(n);
        for (Eigen::Index i = 0; i < n; ++i)
            targets(i) = batch[i].terminal
                             ? batch[i].r
                             : batch[i].r + gamma_ * std::min(Q1(0, i), Q2(0, i));
        double l1 = detail::critic_regress(critic1_, adam_c1_, X, targets, lr_);
        double l2 = detail::critic_regress(critic2_, adam_c2_, X, targets, lr_);
        soft_update(target_critic1_, critic1_, eps_);
        soft_update(target_critic2_, critic2_, eps_);
        return {l1, l2};
    }

    // Ascend E[dQ1/da(s, mu+Z) dmu/dtheta
    //          - lambda/2 * dtheta (mu - aE)^T Sigma^-1 (mu - aE)],
    // with lambda held constant.
    double actor_step(const std::vector<AugmentedTransition>& batch, std::mt19937_64& rng) {
        if (batch.empty()) throw std::invalid_argument("sgac_actor_step: empty batch");
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        double inv_n = 1.0 / static_cast<double>(n);
        Mat S(6, n);
        for (Eigen::Index i = 0; i < n; ++i) S.col(i) = state_vec(batch[i].s);
        Mat mu = policy_.actor.forward_batch(S);
        Mat a_noised = mu;
        if (policy_.noise_scale > 0.0) {
            std::normal_distribution<double> n01(0.0, 1.0);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < a_noised.rows(); ++j)
                    a_noised(j, i) +=
                        policy_.noise_scale * std::sqrt(policy_.sigma_pi(j)) * n01(rng);
        }
        Mat qin(8, n);
        qin.topRows(6) = S;
        qin.bottomRows(2) = a_noised;
        Mat q = critic1_.forward_batch(qin);
        double obj = q.sum() * inv_n;
        Mat dX;
        critic1_.backward_batch(qin, Mat::Ones(1, n), &dX);
        Mat up = dX.bottomRows(2);
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec resid(2);
            resid << mu(0, i) - batch[i].a_expert.tau_u, mu(1, i) - batch[i].a_expert.tau_phi;
            Vec kl_grad = resid.cwiseQuotient(policy_.sigma_pi);
            obj -= 0.5 * lambda_ * resid.dot(kl_grad) * inv_n;
            up.col(i) -= lambda_ * kl_grad;
        }
        GradientBundle acc = policy_.actor.backward_batch(S, (inv_n * up).eval());
        if (!acc.finite()) throw std::runtime_error("sgac_actor_step: non-finite gradient");
        adam_step(policy_.actor, acc, adam_actor_, lr_, /*maximize=*/true);
        return obj;
    }

    // Dual ascent on lambda, projected onto lambda >= 0; uses the
    // just-updated actor.
    double dual_step(const std::vector<AugmentedTransition>& batch) {
        double resid = mean_imitation_residual(batch);
        lambda_ = std::max(0.0, lambda_ + zeta_ * 0.5 * resid);
        return lambda_;
    }

    double mean_imitation_residual(const std::vector<AugmentedTransition>& batch) const {
        const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
        Mat S(6, n);
        for (Eigen::Index i = 0; i < n; ++i) S.col(i) = state_vec(batch[i].s);
        Mat mu = policy_.actor.forward_batch(S);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            acc += std::hypot(mu(0, i) - batch[i].a_expert.tau_u,
                              mu(1, i) - batch[i].a_expert.tau_phi);
        return acc / static_cast<double>(n);
    }

    void target_actor_update() { soft_update(target_actor_, policy_.actor, eps_); }

private:
    double gamma_, lr_, eps_, lambda_, zeta_, sigma_tilde_, clip_c_;
    GaussianPolicy policy_;
    Mlp critic1_{make_critic_net()};
    Mlp critic2_{make_critic_net()};
    Mlp target_actor_{make_actor_net()};
    Mlp target_critic1_{make_critic_net()};
    Mlp target_critic2_{make_critic_net()};
    AdamState adam_actor_{policy_.actor};
    AdamState adam_c1_{critic1_};
    AdamState adam_c2_{critic2_};
    RingBuffer<AugmentedTransition> rb_;
    DynModel model_;
    AdamState model_adam_{model_.net()};
};

inline std::pair<double, double> sgac_critic_step(SgacAgent& ag,
                                                  const std::vector<AugmentedTransition>& batch,
                                                  std::mt19937_64& rng) {
    return ag.critic_step(batch, rng);
}

inline double sgac_actor_step(SgacAgent& ag, const std::vector<AugmentedTransition>& batch,
                              std::mt19937_64& rng) {
    return ag.actor_step(batch, rng);
}

inline double sgac_dual_step(double lambda, const std::vector<AugmentedTransition>& batch,
                             const Mlp& actor, double zeta) {
    double acc = 0.0;
    for (const auto& t : batch) {
        Vec mu = actor.forward(state_vec(t.s));
        acc += std::hypot(mu(0) - t.a_expert.tau_u, mu(1) - t.a_expert.tau_phi);
    }
    double resid = acc / static_cast<double>(batch.size());
    return std::max(0.0, lambda + zeta * 0.5 * resid);
}

// One SGAC training episode. The expert action is a label only; the executed
// action always comes from the agent policy.
inline EpisodeLog sgac_episode(SgacAgent& ag, const BerthingEnv& env, const Predictor& predict,
                               const MpbeConfig& mpbe_cfg, const TrainingKnobs& knobs,
                               EpisodeRngs rngs) {
    EpisodeLog log;
    VesselState s = reset(env.case_id);
    ControlAction prev_a{};
    double resid_sum = 0.0;
    for (int k = 0; k < env.task.T; ++k) {
        ControlAction a_expert =
            expert_query(ag.policy(), predict, ag.target_critic1(), s, prev_a, env.task, mpbe_cfg,
                         *rngs.mpbe)
                .action;
        ControlAction a = ag.policy().act(s, *rngs.exploration, true);
        StepOutcome out = step(s, a, prev_a, env.params, env.task, k, env.sign);
        // Always-bootstrap convention; see baseline_episode for the rationale.
        ag.rb().push({s, a, a_expert, out.reward, out.next_state, false});
        log.ret += out.reward;
        log.steps += 1;
        log.reason = out.reason;

        std::vector<AugmentedTransition> batch = ag.rb().sample(knobs.batch_size, *rngs.sampling);
        auto [l1, l2] = ag.critic_step(batch, *rngs.sampling);
        log.critic_loss += 0.5 * (l1 + l2);
        log.actor_obj += ag.actor_step(batch, *rngs.exploration);
        ag.dual_step(batch);
        ag.target_actor_update();
        resid_sum += ag.mean_imitation_residual(batch);

        s = out.next_state;
        prev_a = a;
        // Full-horizon episode; see baseline_episode for the rationale.
    }
    if (log.steps > 0) {
        log.critic_loss /= log.steps;
        log.actor_obj /= log.steps;
        log.imitation_residual = resid_sum / log.steps;
    }
    log.lambda = ag.lambda();
    log.model_loss = refit_model(ag.model(), ag.model_adam(), ag.rb(), knobs.model_fit_steps,
                                 knobs.batch_size, knobs.model_lr, *rngs.sampling);
    return log;
}

// ---------------------------------------------------------------------------
// Tabular oracle for the expert-mixture Bellman operator: next states are
// drawn under the behavior policy while next actions follow the evaluated
// policy.

struct TabularMdp {
    int nS = 0;
    int nA = 0;
    std::vector<Mat> P;  // P[a](s, s'), rows sum to 1
    Mat R;               // R(s, a)
    double gamma = 0.9;
};

// Row-stochastic policy matrix pi(s, a).
using TabularPolicy = Mat;

// (T^{pi_E} Q)(s,a) = R(s,a) + gamma * E_{s' ~ P(.|s, pi_E), a' ~ pi_theta}[Q(s',a')],
// computed exactly by enumeration.
inline Mat bellman_operator_apply(const TabularMdp& mdp, const TabularPolicy& pi_behavior,
                                  const TabularPolicy& pi_eval, const Mat& Q) {
    if (Q.rows() != mdp.nS || Q.cols() != mdp.nA)
        throw std::invalid_argument("bellman_operator_apply: Q shape mismatch");
    // P_E(s'|s) = sum_a pi_E(a|s) P(s'|s,a)
    Mat P_E = Mat::Zero(mdp.nS, mdp.nS);
    for (int a = 0; a < mdp.nA; ++a)
        P_E += pi_behavior.col(a).asDiagonal() * mdp.P[a];
    // V(s') = sum_a' pi_theta(a'|s') Q(s',a')
    Vec V = (pi_eval.cwiseProduct(Q)).rowwise().sum();
    Vec bootstrap = mdp.gamma * (P_E * V);
    return mdp.R + bootstrap.replicate(1, mdp.nA);
}

// Direct dense solve of the operator's fixed point:
//   V = R_eval + gamma P_E V,  Q = R + gamma (P_E V) 1^T.
// With pi_behavior == pi_eval this is the policy-evaluation solution the
// operator iteration must converge to.
inline Mat bellman_fixed_point(const TabularMdp& mdp, const TabularPolicy& pi_behavior,
                               const TabularPolicy& pi_eval) {
    Mat P_E = Mat::Zero(mdp.nS, mdp.nS);
    for (int a = 0; a < mdp.nA; ++a)
        P_E += pi_behavior.col(a).asDiagonal() * mdp.P[a];
    Vec R_eval = (pi_eval.cwiseProduct(mdp.R)).rowwise().sum();
    Mat A = Mat::Identity(mdp.nS, mdp.nS) - mdp.gamma * P_E;
    Vec V = A.colPivHouseholderQr().solve(R_eval);
    Vec bootstrap = mdp.gamma * (P_E * V);
    return mdp.R + bootstrap.replicate(1, mdp.nA);
}

inline Mat tabular_policy_evaluation(const TabularMdp& mdp, const TabularPolicy& pi) {
    return bellman_fixed_point(mdp, pi, pi);
}

}  // namespace berth
