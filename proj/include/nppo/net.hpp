#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace nppo {

/// Width-m two-layer ReLU network u(x) = m^{-1/2} sum_i b_i relu(w_i . x)
/// with the output signs b frozen at initialization and the input weights
/// kept inside an l2-ball of radius R around their initial value.
class TwoLayerNet {
public:
    TwoLayerNet() = default;

    static TwoLayerNet init(int m, int d, double radius, std::mt19937_64& rng) {
        if (m < 1 || d < 1) throw std::invalid_argument("TwoLayerNet: m, d must be >= 1");
        TwoLayerNet net;
        net.m_ = m;
        net.d_ = d;
        net.radius_ = radius;
        net.signs_.resize(m);
        std::uniform_int_distribution<int> coin(0, 1);
        for (int i = 0; i < m; ++i) net.signs_(i) = coin(rng) ? 1.0 : -1.0;
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        net.weights_.resize(m, d);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) net.weights_(i, j) = gauss(rng);
        net.init_weights_ = net.weights_;
        net.scaled_signs_ = net.signs_ / std::sqrt(static_cast<double>(m));
        return net;
    }

    static TwoLayerNet from_parts(const Eigen::VectorXd& signs, const Eigen::MatrixXd& init_weights,
                                  const Eigen::MatrixXd& weights, double radius) {
        if (init_weights.rows() != signs.size() || weights.rows() != signs.size() ||
            init_weights.cols() != weights.cols())
            throw std::invalid_argument("from_parts: inconsistent shapes");
        TwoLayerNet net;
        net.m_ = static_cast<int>(signs.size());
        net.d_ = static_cast<int>(weights.cols());
        net.radius_ = radius;
        net.signs_ = signs;
        net.scaled_signs_ = signs / std::sqrt(static_cast<double>(net.m_));
        net.init_weights_ = init_weights;
        net.weights_ = weights;
        return net;
    }

    /// Same initialization, different projection radius; actor and critic
    /// share one draw of (b, alpha(0)) but keep separate balls.
    TwoLayerNet with_radius(double radius) const {
        TwoLayerNet net = *this;
        net.radius_ = radius;
        return net;
    }

    int width() const { return m_; }
    int input_dim() const { return d_; }
    double radius() const { return radius_; }
    const Eigen::VectorXd& signs() const { return signs_; }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const Eigen::MatrixXd& init_weights() const { return init_weights_; }

    double dist_to_init() const { return (weights_ - init_weights_).norm(); }

    double forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dim(x);
        return scaled_signs_.dot((weights_ * x).cwiseMax(0.0));
    }

    /// Gradient in the weights, same m x d layout. ReLU subgradient at 0
    /// uses the strict indicator {z > 0}.
    Eigen::MatrixXd grad(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dim(x);
        const Eigen::VectorXd pre = weights_ * x;
        Eigen::VectorXd coeff(m_);
        for (int i = 0; i < m_; ++i) coeff(i) = pre(i) > 0.0 ? scaled_signs_(i) : 0.0;
        return coeff * x.transpose();
    }

    /// Network with activation patterns frozen at initialization; linear in
    /// the weights.
    double linearized_forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        check_dim(x);
        const Eigen::VectorXd pre0 = init_weights_ * x;
        const Eigen::VectorXd pre = weights_ * x;
        double out = 0.0;
        for (int i = 0; i < m_; ++i)
            if (pre0(i) > 0.0) out += scaled_signs_(i) * pre(i);
        return out;
    }

    /// delta = u(s,a) - v(s,a) - mu u(s',a'); one projected step
    /// w <- Pi_B(w - eta delta grad u(s,a)).
    void sgd_step(const Eigen::Ref<const Eigen::VectorXd>& x, double delta, double eta) {
        check_dim(x);
        const Eigen::VectorXd pre = weights_ * x;
        const double scale = -eta * delta;
        for (int i = 0; i < m_; ++i)
            if (pre(i) > 0.0) weights_.row(i) += (scale * scaled_signs_(i)) * x.transpose();
        project();
    }

    void set_weights(const Eigen::MatrixXd& w) {
        if (w.rows() != m_ || w.cols() != d_) throw std::invalid_argument("set_weights: wrong shape");
        weights_ = w;
    }

    void project() {
        const double dist = dist_to_init();
        if (dist > radius_)
            weights_ = init_weights_ + (radius_ / dist) * (weights_ - init_weights_);
    }

private:
    void check_dim(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != d_) throw std::invalid_argument("TwoLayerNet: input dimension mismatch");
    }

    int m_ = 0, d_ = 0;
    double radius_ = 0.0;
    Eigen::VectorXd signs_;         // +-1, frozen
    Eigen::VectorXd scaled_signs_;  // signs / sqrt(m)
    Eigen::MatrixXd weights_;
    Eigen::MatrixXd init_weights_;
};

/// Monte-Carlo estimate of E[(u - u0)^2] for a random in-ball perturbation
/// of size exactly `radius`, with inputs drawn from the rows of `inputs`
/// weighted by `weights`.
inline double linearization_gap(int m, int d, double radius, const Eigen::MatrixXd& inputs,
                                const Eigen::VectorXd& weights, int n_nets,
                                std::mt19937_64& rng) {
    if (inputs.rows() == 0 || n_nets < 1) throw std::invalid_argument("linearization_gap: empty sample");
    std::normal_distribution<double> gauss(0.0, 1.0);
    double acc = 0.0;
    for (int rep = 0; rep < n_nets; ++rep) {
        TwoLayerNet net = TwoLayerNet::init(m, d, radius, rng);
        Eigen::MatrixXd dir(m, d);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) dir(i, j) = gauss(rng);
        net.set_weights(net.init_weights() + (radius / dir.norm()) * dir);
        double gap = 0.0;
        for (int r = 0; r < inputs.rows(); ++r) {
            const Eigen::VectorXd x = inputs.row(r).transpose();
            const double diff = net.forward(x) - net.linearized_forward(x);
            gap += weights(r) * diff * diff;
        }
        acc += gap;
    }
    return acc / n_nets;
}

}  // namespace nppo
