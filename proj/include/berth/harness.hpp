#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "berth/agents.hpp"
#include "berth/mpbe.hpp"
#include "berth/replay.hpp"
#include "berth/rlfd.hpp"
#include "berth/rng.hpp"
#include "berth/vessel.hpp"
#include "berth/world_model.hpp"

namespace berth {

enum class Algorithm { Ddpg, Td3, MpDdpg, MpDdpgSmBc, Sgac };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Ddpg: return "ddpg";
        case Algorithm::Td3: return "td3";
        case Algorithm::MpDdpg: return "mpddpg";
        case Algorithm::MpDdpgSmBc: return "mpddpg_smbc";
        case Algorithm::Sgac: return "sgac";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "ddpg") return Algorithm::Ddpg;
    if (s == "td3") return Algorithm::Td3;
    if (s == "mpddpg") return Algorithm::MpDdpg;
    if (s == "mpddpg_smbc") return Algorithm::MpDdpgSmBc;
    if (s == "sgac") return Algorithm::Sgac;
    throw std::invalid_argument("unknown algorithm: " + s);
}

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::Sgac;
    int case_id = 1;
    std::uint64_t seed = 0;
    int episodes = 700;
    int T = 150;
    double gamma = 0.9;
    double alpha = 0.001;
    int H = 3;
    int M = 10;
    int N = 64;
    double eps = 0.005;
    double lambda_bc = 0.5;
    double lambda0 = 1.0;
    double zeta = 1e-3;
    double noise_scale = 1.0;
    RewardSign sign_mode = RewardSign::Negated;
    bool oracle_model = false;
    std::size_t buffer_capacity = 100000;
    int model_fit_steps = 200;
    int eval_every = 10;
    std::string output_dir = "runs/untitled";

    void validate() const {
        if (case_id < 1 || case_id > 3) throw std::invalid_argument("config: case must be 1..3");
        if (episodes < 0) throw std::invalid_argument("config: episodes must be >= 0");
        if (T <= 0) throw std::invalid_argument("config: T must be > 0");
        if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("config: gamma out of range");
        if (alpha <= 0.0) throw std::invalid_argument("config: alpha must be > 0");
        if (H < 1 || M < 1 || N < 1) throw std::invalid_argument("config: H, M, N must be >= 1");
        if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("config: eps out of range");
        if (lambda_bc < 0.0 || lambda0 < 0.0 || zeta < 0.0 || noise_scale < 0.0)
            throw std::invalid_argument("config: negative hyperparameter");
    }
};

inline std::string serialize_config(const ExperimentConfig& c) {
    char buf[128];
    std::ostringstream os;
    auto put = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%s=%.17g\n", k, v);
        os << buf;
    };
    os << "algorithm=" << to_string(c.algorithm) << '\n';
    os << "case=" << c.case_id << '\n';
    os << "seed=" << c.seed << '\n';
    os << "episodes=" << c.episodes << '\n';
    os << "T=" << c.T << '\n';
    put("gamma", c.gamma);
    put("alpha", c.alpha);
    os << "H=" << c.H << '\n';
    os << "M=" << c.M << '\n';
    os << "N=" << c.N << '\n';
    put("eps", c.eps);
    put("lambda_bc", c.lambda_bc);
    put("lambda0", c.lambda0);
    put("zeta", c.zeta);
    put("noise_scale", c.noise_scale);
    os << "sign_mode=" << (c.sign_mode == RewardSign::Negated ? "negated" : "verbatim") << '\n';
    os << "model=" << (c.oracle_model ? "oracle" : "learned") << '\n';
    os << "buffer_capacity=" << c.buffer_capacity << '\n';
    os << "model_fit_steps=" << c.model_fit_steps << '\n';
    os << "eval_every=" << c.eval_every << '\n';
    os << "output_dir=" << c.output_dir << '\n';
    return os.str();
}

// Flat key=value format; '#' starts a comment; unknown keys are rejected.
inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": missing '='");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "algorithm") c.algorithm = algorithm_from_string(val);
        else if (key == "case") c.case_id = std::stoi(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "episodes") c.episodes = std::stoi(val);
        else if (key == "T") c.T = std::stoi(val);
        else if (key == "gamma") c.gamma = std::stod(val);
        else if (key == "alpha") c.alpha = std::stod(val);
        else if (key == "H") c.H = std::stoi(val);
        else if (key == "M") c.M = std::stoi(val);
        else if (key == "N") c.N = std::stoi(val);
        else if (key == "eps") c.eps = std::stod(val);
        else if (key == "lambda_bc") c.lambda_bc = std::stod(val);
        else if (key == "lambda0") c.lambda0 = std::stod(val);
        else if (key == "zeta") c.zeta = std::stod(val);
        else if (key == "noise_scale") c.noise_scale = std::stod(val);
        else if (key == "sign_mode") {
            if (val == "negated") c.sign_mode = RewardSign::Negated;
            else if (val == "verbatim") c.sign_mode = RewardSign::Verbatim;
            else throw std::invalid_argument("config: bad sign_mode '" + val + "'");
        } else if (key == "model") {
            if (val == "learned") c.oracle_model = false;
            else if (val == "oracle") c.oracle_model = true;
            else throw std::invalid_argument("config: bad model '" + val + "'");
        } else if (key == "buffer_capacity") c.buffer_capacity = std::stoull(val);
        else if (key == "model_fit_steps") c.model_fit_steps = std::stoi(val);
        else if (key == "eval_every") c.eval_every = std::stoi(val);
        else if (key == "output_dir") c.output_dir = val;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    return parse_config(f);
}

// Output root: $BERTH_OUTPUT_ROOT when set, else relative to cwd.
inline std::filesystem::path resolve_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("BERTH_OUTPUT_ROOT")) return std::filesystem::path(root) / p;
    return p;
}

// --- evaluation -------------------------------------------------------------

struct EvalResult {
    double total_return = 0.0;
    bool success = false;
    bool in_zone = false;
    VesselState final_state;
    StopReason reason = StopReason::TimeLimit;
    int steps = 0;
    std::vector<std::string> trajectory_rows;  // CSV, header included
};

// Deterministic rollout of mu_theta from reset(case_id). Success requires the
// final state inside the berth zone with |u|,|v| <= 0.05 m/s and
// |phi| <= 1 deg/s.
inline EvalResult evaluate_policy(const Mlp& actor, int case_id, RewardSign sign,
                                  const ShipParams& params = {},
                                  const BerthingTask& task = default_task()) {
    EvalResult res;
    res.trajectory_rows.push_back(trajectory_header());
    VesselState s = reset(case_id);
    ControlAction prev_a{};
    for (int k = 0; k < task.T; ++k) {
        ControlAction a = clip_action(to_action(actor.forward(state_vec(s))));
        StepOutcome out = step(s, a, prev_a, params, task, k, sign);
        res.total_return += out.reward;
        res.trajectory_rows.push_back(trajectory_row(k, s, a, out.reward, in_berth_zone(s, task)));
        s = out.next_state;
        prev_a = a;
        res.steps = k + 1;
        res.reason = out.reason;
        if (out.terminal) break;
    }
    res.final_state = s;
    res.in_zone = in_berth_zone(s, task) && res.reason != StopReason::OutOfBounds;
    res.success = res.in_zone && std::abs(s.u) <= 0.05 && std::abs(s.v) <= 0.05 &&
                  std::abs(s.phi) <= deg2rad(1.0);
    return res;
}

// --- training ---------------------------------------------------------------

struct TrainResult {
    std::filesystem::path run_dir;
    std::vector<EpisodeLog> logs;
    double final_test_return = std::numeric_limits<double>::quiet_NaN();
    bool final_in_zone = false;
};

inline std::string episode_csv_row(const EpisodeLog& l) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%s", l.episode,
                  l.ret, l.test_return, l.critic_loss, l.actor_obj, l.lambda,
                  l.imitation_residual, l.model_loss, l.steps, to_string(l.reason));
    return buf;
}

inline const char* episode_csv_header() {
    return "episode,return,test_return,critic_loss,actor_obj,lambda,imitation_residual,"
           "model_loss,steps,terminated_reason";
}

namespace detail {

// DDPG/TD3 episode driver shared by the two baselines.
template <typename Agent, typename UpdateFn>
EpisodeLog baseline_episode(Agent& ag, RingBuffer<Transition>& rb, const BerthingEnv& env,
                            std::size_t batch_size, std::mt19937_64& explore_rng,
                            std::mt19937_64& sample_rng, UpdateFn&& do_update) {
    EpisodeLog log;
    VesselState s = reset(env.case_id);
    ControlAction prev_a{};
    for (int k = 0; k < env.task.T; ++k) {
        ControlAction a = ag.policy().act(s, explore_rng, true);
        StepOutcome out = step(s, a, prev_a, env.params, env.task, k, env.sign);
        // Stored transitions always bootstrap: the TD target uses Q̄(s', μ̄(s'))
        // even when the episode ends here. Early termination otherwise makes
        // boundary escape the discount-optimal policy (the per-step reward is
        // strongly negative far from the berth, so truncating the stream beats
        // approaching the berth under γ = 0.9).
        rb.push({s, a, out.reward, out.next_state, false});
        log.ret += out.reward;
        log.steps += 1;
        log.reason = out.reason;
        std::vector<Transition> batch = rb.sample(batch_size, sample_rng);
        do_update(batch, log);
        s = out.next_state;
        prev_a = a;
        // Training episodes run the full horizon: a default run performs
        // exactly episodes*T environment steps. Leaving the position box is
        // not an exit hatch during training -- the ship keeps sailing through
        // ever-worsening rewards, so the critic learns a real deterrent
        // instead of a truncation artifact. Evaluation still stops at the
        // boundary.
    }
    if (log.steps > 0) {
        log.critic_loss /= log.steps;
        log.actor_obj /= log.steps;
    }
    return log;
}

}  // namespace detail

inline TrainResult train(const ExperimentConfig& cfg) {
    cfg.validate();
    TrainResult result;
    result.run_dir = resolve_output_dir(cfg.output_dir);
    std::filesystem::create_directories(result.run_dir);
    {
        std::ofstream cf(result.run_dir / "config.txt", std::ios::binary);
        cf << serialize_config(cfg);
    }

    BerthingEnv env;
    env.case_id = cfg.case_id;
    env.sign = cfg.sign_mode;
    env.task.T = cfg.T;

    RunRng rng(cfg.seed);
    auto init_rng = rng.stream("init");
    auto explore_rng = rng.stream("exploration");
    auto mpbe_rng = rng.stream("mpbe");
    auto sample_rng = rng.stream("sampling");
    EpisodeRngs rngs{&explore_rng, &mpbe_rng, &sample_rng};

    MpbeConfig mpbe_cfg;
    mpbe_cfg.M = cfg.M;
    mpbe_cfg.H = cfg.H;
    mpbe_cfg.gamma = cfg.gamma;
    mpbe_cfg.noise_scale = cfg.noise_scale;
    mpbe_cfg.sign = cfg.sign_mode;

    TrainingKnobs knobs;
    knobs.batch_size = static_cast<std::size_t>(cfg.N);
    knobs.model_fit_steps = cfg.model_fit_steps;
    knobs.model_lr = cfg.alpha;

    std::ofstream curve(result.run_dir / "learning_curve.csv", std::ios::binary);
    curve << episode_csv_header() << '\n';

    double last_test = std::numeric_limits<double>::quiet_NaN();

    auto run_episodes = [&](auto&& one_episode, const Mlp& actor_ref) {
        for (int ep = 0; ep < cfg.episodes; ++ep) {
            EpisodeLog log;
            try {
                log = one_episode();
            } catch (const std::exception& err) {
                std::ofstream ef(result.run_dir / "error.txt", std::ios::binary);
                ef << "episode " << ep << ": " << err.what() << '\n';
                throw;
            }
            log.episode = ep;
            if (cfg.eval_every > 0 && (ep + 1) % cfg.eval_every == 0) {
                EvalResult ev = evaluate_policy(actor_ref, cfg.case_id, cfg.sign_mode, env.params,
                                                env.task);
                last_test = ev.total_return;
                result.final_in_zone = ev.in_zone;
            }
            log.test_return = last_test;
            curve << episode_csv_row(log) << '\n';
            result.logs.push_back(log);
        }
        // Final deterministic evaluation and checkpoint.
        EvalResult ev = evaluate_policy(actor_ref, cfg.case_id, cfg.sign_mode, env.params,
                                        env.task);
        result.final_test_return = ev.total_return;
        result.final_in_zone = ev.in_zone;
        {
            std::ofstream tf(result.run_dir / "trajectory.csv", std::ios::binary);
            for (const auto& row : ev.trajectory_rows) tf << row << '\n';
        }
        {
            std::ofstream ck(result.run_dir / "checkpoint.txt", std::ios::binary);
            save_mlp(ck, actor_ref);
        }
        {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.9g,%d,%d\n", ev.total_return, ev.in_zone ? 1 : 0,
                          ev.success ? 1 : 0);
            std::ofstream sf(result.run_dir / "final_eval.csv", std::ios::binary);
            sf << "test_return,in_zone,success\n" << buf;
        }
    };

    switch (cfg.algorithm) {
        case Algorithm::Ddpg: {
            DdpgAgent ag(init_rng, cfg.gamma, cfg.alpha, cfg.eps);
            ag.policy().noise_scale = cfg.noise_scale;
            RingBuffer<Transition> rb(cfg.buffer_capacity);
            run_episodes(
                [&] {
                    return detail::baseline_episode(
                        ag, rb, env, knobs.batch_size, explore_rng, sample_rng,
                        [&](const std::vector<Transition>& b, EpisodeLog& l) {
                            UpdateLosses u = ag.update(b);
                            l.critic_loss += u.critic_loss;
                            l.actor_obj += u.actor_objective;
                        });
                },
                ag.policy().actor);
            break;
        }
        case Algorithm::Td3: {
            Td3Agent ag(init_rng, cfg.gamma, cfg.alpha, cfg.eps);
            ag.policy().noise_scale = cfg.noise_scale;
            RingBuffer<Transition> rb(cfg.buffer_capacity);
            run_episodes(
                [&] {
                    return detail::baseline_episode(
                        ag, rb, env, knobs.batch_size, explore_rng, sample_rng,
                        [&](const std::vector<Transition>& b, EpisodeLog& l) {
                            Td3Losses u = ag.update(b, sample_rng);
                            l.critic_loss += 0.5 * (u.critic1_loss + u.critic2_loss);
                            if (u.actor_updated) l.actor_obj += u.actor_objective;
                        });
                },
                ag.policy().actor);
            break;
        }
        case Algorithm::MpDdpg:
        case Algorithm::MpDdpgSmBc: {
            bool smbc = cfg.algorithm == Algorithm::MpDdpgSmBc;
            MpDdpgAgent ag(init_rng, cfg.gamma, cfg.alpha, cfg.eps, smbc, smbc, cfg.lambda_bc,
                           cfg.buffer_capacity);
            ag.base().policy().noise_scale = cfg.noise_scale;
            Predictor predict = cfg.oracle_model ? oracle_predictor(env.params, env.task)
                                                 : learned_predictor(ag.model());
            run_episodes([&] { return mpddpg_episode(ag, env, predict, mpbe_cfg, knobs, rngs); },
                         ag.base().policy().actor);
            break;
        }
        case Algorithm::Sgac: {
            SgacAgent ag(init_rng, cfg.gamma, cfg.alpha, cfg.eps, cfg.lambda0, cfg.zeta,
                         cfg.buffer_capacity);
            ag.policy().noise_scale = cfg.noise_scale;
            Predictor predict = cfg.oracle_model ? oracle_predictor(env.params, env.task)
                                                 : learned_predictor(ag.model());
            run_episodes([&] { return sgac_episode(ag, env, predict, mpbe_cfg, knobs, rngs); },
                         ag.policy().actor);
            break;
        }
    }
    return result;
}

// --- comparison report ------------------------------------------------------

struct RunSummary {
    std::string algorithm;
    double max_training_return = std::numeric_limits<double>::quiet_NaN();
    double test_return = std::numeric_limits<double>::quiet_NaN();
};

inline RunSummary summarize_run(const std::filesystem::path& run_dir) {
    RunSummary s;
    {
        std::ifstream cf(run_dir / "config.txt");
        if (!cf) throw std::runtime_error("compare: missing config.txt in " + run_dir.string());
        std::string line;
        while (std::getline(cf, line))
            if (line.rfind("algorithm=", 0) == 0) s.algorithm = line.substr(10);
    }
    {
        std::ifstream lf(run_dir / "learning_curve.csv");
        if (!lf)
            throw std::runtime_error("compare: missing learning_curve.csv in " + run_dir.string());
        std::string line;
        std::getline(lf, line);  // header
        while (std::getline(lf, line)) {
            auto c1 = line.find(',');
            auto c2 = line.find(',', c1 + 1);
            double ret = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
            if (std::isnan(s.max_training_return) || ret > s.max_training_return)
                s.max_training_return = ret;
        }
    }
    {
        std::ifstream ff(run_dir / "final_eval.csv");
        if (!ff) throw std::runtime_error("compare: missing final_eval.csv in " + run_dir.string());
        std::string line;
        std::getline(ff, line);  // header
        std::getline(ff, line);
        s.test_return = std::stod(line.substr(0, line.find(',')));
    }
    return s;
}

// Two-row report in the style of the comparative-evaluation table.
inline std::string compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.size() < 2) throw std::invalid_argument("compare: need at least 2 runs");
    std::vector<std::string> missing;
    std::vector<RunSummary> rows;
    for (const auto& d : run_dirs) {
        try {
            rows.push_back(summarize_run(d));
        } catch (const std::exception&) {
            missing.push_back(d);
        }
    }
    if (!missing.empty()) {
        std::string msg = "compare: missing runs:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }
    std::ostringstream os;
    char buf[64];
    os << "metric";
    for (const auto& r : rows) os << ',' << r.algorithm;
    os << '\n' << "max_training_return";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), ",%.9g", r.max_training_return);
        os << buf;
    }
    os << '\n' << "test_return";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), ",%.9g", r.test_return);
        os << buf;
    }
    os << '\n';
    return os.str();
}

}  // namespace berth
