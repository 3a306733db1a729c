#pragma once

#include <vector>

#include <Eigen/Dense>

#include "clorl/algorithms.hpp"
#include "clorl/mlp.hpp"
#include "clorl/rng.hpp"
#include "clorl/value_support.hpp"

// A fixed 5-state / 3-action MDP with stochastic two-outcome transitions,
// its exact optimal Q from value iteration, and a fitted-TD harness that
// trains a linear network over one-hot state features with either critic
// head through the library's machinery.

namespace oracle {

struct TabularMdp {
    static constexpr int n_states = 5;
    static constexpr int n_actions = 3;
    double gamma = 0.9;
    double reward[5][3] = {{0.10, 0.85, 0.30},
                           {0.00, 0.45, 0.95},
                           {0.60, 0.20, 0.70},
                           {0.35, 0.90, 0.05},
                           {0.80, 0.15, 0.50}};
    int next_a[5][3] = {{1, 3, 4}, {2, 0, 1}, {3, 4, 0}, {4, 1, 2}, {0, 2, 3}};
    int next_b[5][3] = {{2, 0, 1}, {4, 3, 2}, {0, 2, 1}, {3, 0, 4}, {2, 3, 1}};
    double p_a[5][3] = {{0.7, 0.5, 0.9}, {0.6, 0.8, 0.5}, {0.7, 0.4, 0.6},
                        {0.5, 0.9, 0.3}, {0.8, 0.6, 0.7}};
};

// Exact Q* by synchronous value iteration to sup-norm residual < tol.
inline Eigen::MatrixXd exact_q(const TabularMdp& mdp, double tol = 1e-13) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    for (int sweep = 0; sweep < 100000; ++sweep) {
        Eigen::VectorXd v = q.rowwise().maxCoeff();
        Eigen::MatrixXd next(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                next(s, a) = mdp.reward[s][a] +
                             mdp.gamma * (mdp.p_a[s][a] * v(mdp.next_a[s][a]) +
                                          (1.0 - mdp.p_a[s][a]) * v(mdp.next_b[s][a]));
        double residual = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (residual < tol) break;
    }
    return q;
}

// Fitted TD over one-hot state features: a zero-hidden-layer network maps
// the 5 one-hot inputs to per-action outputs (3 scalars, or 3 blocks of m
// logits for the categorical head). Each outer sweep freezes the target
// network, fits the online network with Adam, then copies it over.
struct FittedTdResult {
    Eigen::MatrixXd q;  // n_states x n_actions, scalarized
    int sweeps = 0;
};

inline FittedTdResult fitted_td(const TabularMdp& mdp, const clorl::CriticHead& head,
                                int outer_sweeps, int inner_steps, double lr,
                                std::uint64_t seed) {
    using namespace clorl;
    const int S = mdp.n_states, A = mdp.n_actions;
    const int out_per_action = head.kind == HeadKind::Scalar ? 1 : head.support.m;

    MlpSpec spec{S, 1, 0, A * out_per_action};
    Rng rng(seed);
    ParamSet params = init_params(spec, rng);
    ParamSet target = params;
    // Cosine decay drives the late-phase Adam chatter to zero so the
    // final table settles to the fitted fixed point.
    AdamState adam = make_adam(params, lr, LrSchedule::CosineDecay,
                               static_cast<std::int64_t>(outer_sweeps) * inner_steps);

    Eigen::MatrixXd features = Eigen::MatrixXd::Identity(S, S);

    auto scalarize = [&](const ParamSet& which) {
        Eigen::MatrixXd out = forward_batch(which, spec, features, ForwardMode::Eval);
        Eigen::MatrixXd q(S, A);
        for (int a = 0; a < A; ++a) {
            Eigen::MatrixXd block = out.middleCols(a * out_per_action, out_per_action);
            q.col(a) = head_values(head, block);
        }
        return q;
    };

    FittedTdResult result;
    for (int sweep = 0; sweep < outer_sweeps; ++sweep) {
        Eigen::MatrixXd q_target = scalarize(target);
        Eigen::VectorXd v = q_target.rowwise().maxCoeff();
        Eigen::MatrixXd y(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                y(s, a) = mdp.reward[s][a] +
                          mdp.gamma * (mdp.p_a[s][a] * v(mdp.next_a[s][a]) +
                                       (1.0 - mdp.p_a[s][a]) * v(mdp.next_b[s][a]));

        for (int it = 0; it < inner_steps; ++it) {
            ForwardCache cache;
            Eigen::MatrixXd out =
                forward_batch(params, spec, features, ForwardMode::Eval, nullptr, &cache);
            Eigen::MatrixXd upstream(S, A * out_per_action);
            for (int a = 0; a < A; ++a) {
                Eigen::MatrixXd block = out.middleCols(a * out_per_action, out_per_action);
                CriticLossGrad lg = critic_loss_grad(head, block, y.col(a));
                upstream.middleCols(a * out_per_action, out_per_action) = lg.dloss_doutputs;
            }
            BackwardResult back = backward_batch(params, spec, cache, upstream);
            adam_step(adam, params, back.param_grads);
        }
        target = params;
        result.sweeps = sweep + 1;
    }
    result.q = scalarize(params);
    return result;
}

}  // namespace oracle
