#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "clorl/mlp.hpp"

// Central finite differences against analytic gradients. The reported
// relative error is max-norm over the whole gradient vector so dominant
// components must agree; a tiny floor keeps all-zero cases well defined.

namespace oracle {

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-12});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

// d f / d x by central differences, step h.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double orig = xp(i);
        xp(i) = orig + h;
        double up = f(xp);
        xp(i) = orig - h;
        double down = f(xp);
        xp(i) = orig;
        g(i) = (up - down) / (2.0 * h);
    }
    return g;
}

// Flatten a ParamSet in its canonical visit order.
inline Eigen::VectorXd flatten(const clorl::ParamSet& p) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(p.count()));
    Eigen::Index i = 0;
    const_cast<clorl::ParamSet&>(p).for_each([&](double& v) { out(i++) = v; });
    return out;
}

inline void unflatten(const Eigen::VectorXd& flat, clorl::ParamSet& p) {
    Eigen::Index i = 0;
    p.for_each([&](double& v) { v = flat(i++); });
}

// FD gradient of a scalar loss with respect to every parameter.
inline Eigen::VectorXd fd_param_gradient(
    const std::function<double(const clorl::ParamSet&)>& loss, const clorl::ParamSet& params,
    double h = 1e-5) {
    clorl::ParamSet work = params;
    Eigen::VectorXd flat = flatten(params);
    auto f = [&](const Eigen::VectorXd& x) {
        unflatten(x, work);
        return loss(work);
    };
    return fd_gradient(f, flat, h);
}

// Freshly initialized networks have zero biases, which parks ReLU
// preactivations exactly on the kink where finite differences straddle
// the two one-sided slopes. Jittering every parameter moves the check to
// a differentiable point.
template <typename RngT>
void jitter_params(clorl::ParamSet& params, RngT& rng, double scale = 0.05) {
    params.for_each([&](double& v) { v += rng.uniform(-scale, scale); });
}

}  // namespace oracle
