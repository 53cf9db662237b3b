// Command-line front end: train / evaluate / compare / selftest.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "berth/harness.hpp"
#include "berth/rlfd.hpp"

namespace {

int run_selftest();

int main_impl(int argc, char** argv) {
    CLI::App app{"Underactuated-vessel berthing RL trainer"};
    app.require_subcommand(1);

    std::string config_path;
    auto* train_cmd = app.add_subcommand("train", "Train an agent from a config file");
    train_cmd->add_option("--config", config_path, "key=value config file")->required();

    std::string checkpoint_path;
    int case_id = 1;
    std::string sign_mode = "negated";
    std::string traj_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "Deterministic evaluation of a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "actor checkpoint file")->required();
    eval_cmd->add_option("--case", case_id, "initial condition case (1|2|3)")->required();
    eval_cmd->add_option("--sign-mode", sign_mode, "reward sign: negated|verbatim");
    eval_cmd->add_option("--trajectory-out", traj_out, "trajectory CSV output path");

    std::vector<std::string> run_dirs;
    auto* compare_cmd = app.add_subcommand("compare", "Tabulate runs for comparison");
    compare_cmd->add_option("--runs", run_dirs, "run directories")->required()->expected(-1);

    app.add_subcommand("selftest", "Run the tabular/KL/gradient oracle checks");

    CLI11_PARSE(app, argc, argv);

    if (train_cmd->parsed()) {
        berth::ExperimentConfig cfg = berth::load_config(config_path);
        berth::TrainResult res = berth::train(cfg);
        std::printf("run_dir=%s\n", res.run_dir.string().c_str());
        std::printf("final_test_return=%.9g in_zone=%d\n", res.final_test_return,
                    res.final_in_zone ? 1 : 0);
        return 0;
    }
    if (eval_cmd->parsed()) {
        std::ifstream ck(checkpoint_path);
        if (!ck) {
            std::fprintf(stderr, "cannot open checkpoint: %s\n", checkpoint_path.c_str());
            return 1;
        }
        berth::Mlp actor = berth::load_mlp(ck);
        berth::RewardSign sign =
            sign_mode == "verbatim" ? berth::RewardSign::Verbatim : berth::RewardSign::Negated;
        berth::EvalResult res = berth::evaluate_policy(actor, case_id, sign);
        if (!traj_out.empty()) {
            std::ofstream tf(traj_out, std::ios::binary);
            for (const auto& row : res.trajectory_rows) tf << row << '\n';
        } else {
            for (const auto& row : res.trajectory_rows) std::printf("%s\n", row.c_str());
        }
        std::printf("total_return=%.9g success=%d in_zone=%d reason=%s\n", res.total_return,
                    res.success ? 1 : 0, res.in_zone ? 1 : 0, berth::to_string(res.reason));
        return 0;
    }
    if (compare_cmd->parsed()) {
        std::printf("%s", berth::compare_runs(run_dirs).c_str());
        return 0;
    }
    return run_selftest();
}

bool check(const char* name, bool ok) {
    std::printf("%-40s %s\n", name, ok ? "ok" : "FAIL");
    return ok;
}

int run_selftest() {
    using namespace berth;
    bool all = true;
    std::mt19937_64 rng(20240817);

    // Gradient check on a random 6-30-2 tanh net.
    {
        Mlp net({6, 30, 2}, OutputActivation::Tanh);
        net.init(rng);
        Vec x(6), up(2);
        std::normal_distribution<double> n01(0.0, 1.0);
        for (int i = 0; i < 6; ++i) x(i) = n01(rng);
        for (int i = 0; i < 2; ++i) up(i) = n01(rng);
        GradientBundle g = net.backward(x, up);
        double h = 1e-5;
        double max_rel = 0.0;
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            Mat& W = net.weights(l);
            for (int t = 0; t < 5; ++t) {
                Eigen::Index i = static_cast<Eigen::Index>(rng() % W.rows());
                Eigen::Index j = static_cast<Eigen::Index>(rng() % W.cols());
                double orig = W(i, j);
                W(i, j) = orig + h;
                double fp = up.dot(net.forward(x));
                W(i, j) = orig - h;
                double fm = up.dot(net.forward(x));
                W(i, j) = orig;
                double fd = (fp - fm) / (2.0 * h);
                double rel = std::abs(fd - g.dW[l](i, j)) / std::max(1e-8, std::abs(fd));
                max_rel = std::max(max_rel, rel);
            }
        }
        all &= check("gradient finite-difference", max_rel < 1e-4);
    }

    // KL identities.
    {
        Vec mu = Vec::Zero(2), cov = Vec::Ones(2);
        Vec mu2(2);
        mu2 << 1.0, 0.0;
        bool ok = gaussian_kl(mu, cov, mu, cov) == 0.0 &&
                  std::abs(gaussian_kl(mu, cov, mu2, cov) - 0.5) < 1e-12;
        all &= check("gaussian KL identities", ok);
    }

    // Tabular contraction + fixed point.
    {
        TabularMdp mdp;
        mdp.nS = 5;
        mdp.nA = 3;
        mdp.gamma = 0.9;
        std::uniform_real_distribution<double> u01(0.01, 1.0);
        mdp.R = Mat::Zero(5, 3);
        for (int a = 0; a < 3; ++a) {
            Mat P(5, 5);
            for (int s = 0; s < 5; ++s) {
                double sum = 0.0;
                for (int sp = 0; sp < 5; ++sp) {
                    P(s, sp) = u01(rng);
                    sum += P(s, sp);
                }
                P.row(s) /= sum;
                mdp.R(s, a) = u01(rng);
            }
            mdp.P.push_back(P);
        }
        TabularPolicy pi(5, 3);
        for (int s = 0; s < 5; ++s) {
            double sum = 0.0;
            for (int a = 0; a < 3; ++a) {
                pi(s, a) = u01(rng);
                sum += pi(s, a);
            }
            pi.row(s) /= sum;
        }
        Mat Q = Mat::Zero(5, 3);
        for (int i = 0; i < 300; ++i) Q = bellman_operator_apply(mdp, pi, pi, Q);
        Mat Qstar = tabular_policy_evaluation(mdp, pi);
        all &= check("tabular operator convergence",
                     (Q - Qstar).cwiseAbs().maxCoeff() < 1e-8);
    }

    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) { return main_impl(argc, argv); }
