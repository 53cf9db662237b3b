#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace berth {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class OutputActivation { Linear, Tanh };

// Gradients of <upstream, forward(net, x)> w.r.t. all parameters and x.
struct GradientBundle {
    std::vector<Mat> dW;
    std::vector<Vec> db;
    Vec dx;

    bool finite() const {
        for (const auto& m : dW)
            if (!m.allFinite()) return false;
        for (const auto& v : db)
            if (!v.allFinite()) return false;
        return dx.allFinite();
    }
};

// Feedforward net: ReLU between layers, Linear or Tanh on the output.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<int> dims, OutputActivation out_act)
        : dims_(std::move(dims)), out_act_(out_act) {
        if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least 2 layer dims");
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            W_.push_back(Mat::Zero(dims_[l + 1], dims_[l]));
            b_.push_back(Vec::Zero(dims_[l + 1]));
        }
    }

    // Uniform fan-in init; `final_scale`, when positive, overrides the last
    // layer's range (used to start actors near the zero action).
    void init(std::mt19937_64& rng, double final_scale = -1.0) {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
            if (final_scale > 0.0 && l + 1 == W_.size()) bound = final_scale;
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index i = 0; i < W_[l].rows(); ++i)
                for (Eigen::Index j = 0; j < W_[l].cols(); ++j) W_[l](i, j) = dist(rng);
            for (Eigen::Index i = 0; i < b_[l].size(); ++i) b_[l](i) = dist(rng);
        }
    }

    const std::vector<int>& dims() const { return dims_; }
    OutputActivation output_activation() const { return out_act_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    std::size_t num_layers() const { return W_.size(); }
    Mat& weights(std::size_t l) { return W_[l]; }
    const Mat& weights(std::size_t l) const { return W_[l]; }
    Vec& biases(std::size_t l) { return b_[l]; }
    const Vec& biases(std::size_t l) const { return b_[l]; }

    bool same_architecture(const Mlp& o) const {
        return dims_ == o.dims_ && out_act_ == o.out_act_;
    }

    Vec forward(const Vec& x) const {
        if (x.size() != input_dim()) throw std::invalid_argument("Mlp::forward: bad input dim");
        Vec h = x;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Vec z = W_[l] * h + b_[l];
            if (l + 1 < W_.size()) {
                h = z.cwiseMax(0.0);
            } else if (out_act_ == OutputActivation::Tanh) {
                h = z.array().tanh();
            } else {
                h = std::move(z);
            }
        }
        return h;
    }

    // Batched forward: columns of X are independent inputs.
    Mat forward_batch(const Mat& X) const {
        if (X.rows() != input_dim())
            throw std::invalid_argument("Mlp::forward_batch: bad input dim");
        Mat h = X;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Mat z = (W_[l] * h).colwise() + b_[l];
            if (l + 1 < W_.size()) {
                h = z.cwiseMax(0.0);
            } else if (out_act_ == OutputActivation::Tanh) {
                h = z.array().tanh();
            } else {
                h = std::move(z);
            }
        }
        return h;
    }

    // Batched backward of sum_i <Up.col(i), forward(X.col(i))>: parameter
    // gradients are summed over columns; per-column input gradients are
    // written to *dX when requested.
    GradientBundle backward_batch(const Mat& X, const Mat& Up, Mat* dX = nullptr) const {
        if (X.rows() != input_dim())
            throw std::invalid_argument("Mlp::backward_batch: bad input dim");
        if (Up.rows() != output_dim() || Up.cols() != X.cols())
            throw std::invalid_argument("Mlp::backward_batch: bad upstream shape");

        std::vector<Mat> act(W_.size() + 1);
        std::vector<Mat> pre(W_.size());
        act[0] = X;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            pre[l] = (W_[l] * act[l]).colwise() + b_[l];
            if (l + 1 < W_.size()) {
                act[l + 1] = pre[l].cwiseMax(0.0);
            } else if (out_act_ == OutputActivation::Tanh) {
                act[l + 1] = pre[l].array().tanh();
            } else {
                act[l + 1] = pre[l];
            }
        }

        GradientBundle g;
        g.dW.resize(W_.size());
        g.db.resize(W_.size());

        Mat delta;
        if (out_act_ == OutputActivation::Tanh) {
            delta = Up.cwiseProduct((1.0 - act.back().array().square()).matrix());
        } else {
            delta = Up;
        }
        for (std::size_t li = W_.size(); li-- > 0;) {
            g.dW[li] = delta * act[li].transpose();
            g.db[li] = delta.rowwise().sum();
            Mat dprev = W_[li].transpose() * delta;
            if (li > 0) {
                dprev = dprev.cwiseProduct(
                    (pre[li - 1].array() > 0.0).cast<double>().matrix());
            }
            delta = std::move(dprev);
        }
        if (dX) *dX = std::move(delta);
        return g;
    }

    GradientBundle backward(const Vec& x, const Vec& upstream) const {
        if (x.size() != input_dim()) throw std::invalid_argument("Mlp::backward: bad input dim");
        if (upstream.size() != output_dim())
            throw std::invalid_argument("Mlp::backward: bad upstream dim");

        // Forward with cached pre/post activations.
        std::vector<Vec> act(W_.size() + 1);
        std::vector<Vec> pre(W_.size());
        act[0] = x;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            pre[l] = W_[l] * act[l] + b_[l];
            if (l + 1 < W_.size()) {
                act[l + 1] = pre[l].cwiseMax(0.0);
            } else if (out_act_ == OutputActivation::Tanh) {
                act[l + 1] = pre[l].array().tanh();
            } else {
                act[l + 1] = pre[l];
            }
        }

        GradientBundle g;
        g.dW.resize(W_.size());
        g.db.resize(W_.size());

        Vec delta;
        if (out_act_ == OutputActivation::Tanh) {
            Vec y = act.back();
            delta = upstream.cwiseProduct((1.0 - y.array().square()).matrix());
        } else {
            delta = upstream;
        }
        for (std::size_t li = W_.size(); li-- > 0;) {
            g.dW[li] = delta * act[li].transpose();
            g.db[li] = delta;
            Vec dprev = W_[li].transpose() * delta;
            if (li > 0) {
                // ReLU mask of the previous hidden layer.
                dprev = dprev.cwiseProduct(
                    (pre[li - 1].array() > 0.0).cast<double>().matrix());
            }
            delta = std::move(dprev);
        }
        g.dx = std::move(delta);
        return g;
    }

private:
    std::vector<int> dims_;
    OutputActivation out_act_ = OutputActivation::Linear;
    std::vector<Mat> W_;
    std::vector<Vec> b_;
};

struct AdamState {
    std::vector<Mat> mW, vW;
    std::vector<Vec> mb, vb;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_num = 1e-8;

    explicit AdamState(const Mlp& net) {
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            mW.push_back(Mat::Zero(net.weights(l).rows(), net.weights(l).cols()));
            vW.push_back(Mat::Zero(net.weights(l).rows(), net.weights(l).cols()));
            mb.push_back(Vec::Zero(net.biases(l).size()));
            vb.push_back(Vec::Zero(net.biases(l).size()));
        }
    }
};

// Standard bias-corrected Adam. `maximize` ascends instead of descending.
inline void adam_step(Mlp& net, const GradientBundle& grads, AdamState& st, double lr,
                      bool maximize = false) {
    if (grads.dW.size() != net.num_layers())
        throw std::invalid_argument("adam_step: gradient/network layer mismatch");
    if (!grads.finite()) throw std::runtime_error("adam_step: non-finite gradient");
    st.step += 1;
    double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    double sign = maximize ? -1.0 : 1.0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Mat gW = sign * grads.dW[l];
        Vec gb = sign * grads.db[l];
        st.mW[l] = st.beta1 * st.mW[l] + (1.0 - st.beta1) * gW;
        st.vW[l] = st.beta2 * st.vW[l] + (1.0 - st.beta2) * gW.cwiseProduct(gW);
        st.mb[l] = st.beta1 * st.mb[l] + (1.0 - st.beta1) * gb;
        st.vb[l] = st.beta2 * st.vb[l] + (1.0 - st.beta2) * gb.cwiseProduct(gb);
        net.weights(l) -= lr * (st.mW[l] / bc1).cwiseQuotient(
            ((st.vW[l] / bc2).cwiseSqrt().array() + st.eps_num).matrix());
        net.biases(l) -= lr * (st.mb[l] / bc1).cwiseQuotient(
            ((st.vb[l] / bc2).cwiseSqrt().array() + st.eps_num).matrix());
    }
}

// target <- eps*online + (1-eps)*target
inline void soft_update(Mlp& target, const Mlp& online, double eps) {
    if (!target.same_architecture(online))
        throw std::invalid_argument("soft_update: architecture mismatch");
    for (std::size_t l = 0; l < target.num_layers(); ++l) {
        target.weights(l) = eps * online.weights(l) + (1.0 - eps) * target.weights(l);
        target.biases(l) = eps * online.biases(l) + (1.0 - eps) * target.biases(l);
    }
}

// --- checkpoint container ---------------------------------------------------
// Text format, parameters in hexfloat so round-trips are bit-exact.

inline void save_mlp(std::ostream& os, const Mlp& net) {
    os << "mlp " << net.dims().size();
    for (int d : net.dims()) os << ' ' << d;
    os << ' ' << (net.output_activation() == OutputActivation::Tanh ? "tanh" : "linear") << '\n';
    char buf[48];
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Mat& W = net.weights(l);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%a\n", W(i, j));
                os << buf;
            }
        const Vec& b = net.biases(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a\n", b(i));
            os << buf;
        }
    }
}

inline Mlp load_mlp(std::istream& is) {
    std::string tag;
    std::size_t nd = 0;
    if (!(is >> tag >> nd) || tag != "mlp") throw std::runtime_error("load_mlp: bad header");
    std::vector<int> dims(nd);
    for (auto& d : dims) is >> d;
    std::string act;
    is >> act;
    Mlp net(dims, act == "tanh" ? OutputActivation::Tanh : OutputActivation::Linear);
    std::string tok;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Mat& W = net.weights(l);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) {
                is >> tok;
                W(i, j) = std::strtod(tok.c_str(), nullptr);
            }
        Vec& b = net.biases(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            is >> tok;
            b(i) = std::strtod(tok.c_str(), nullptr);
        }
    }
    if (!is) throw std::runtime_error("load_mlp: truncated parameters");
    return net;
}

}  // namespace berth
