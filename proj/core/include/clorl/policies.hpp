#pragma once

#include <Eigen/Dense>

#include "clorl/mlp.hpp"

namespace clorl {

class Rng;

/// Tanh-squashed deterministic policy head. Actions always land in
/// [-1, 1]^action_dim.
struct DeterministicPolicy {
    MlpSpec spec;  // output_dim = action_dim
    ParamSet params;

    int action_dim() const { return spec.output_dim; }
};

Eigen::MatrixXd det_action_batch(const DeterministicPolicy& policy,
                                 const Eigen::MatrixXd& states,
                                 ForwardCache* cache = nullptr);
Eigen::VectorXd det_action(const DeterministicPolicy& policy, const Eigen::VectorXd& state);

/// Gradients of a loss through tanh back to the policy parameters.
/// `actions` must be the tanh outputs recorded with `cache`.
ParamSet det_action_backward(const DeterministicPolicy& policy, const ForwardCache& cache,
                             const Eigen::MatrixXd& actions, const Eigen::MatrixXd& dloss_daction);

enum class SquashMode {
    Tanh,             // a = tanh(u), with the log-det correction in log_prob
    ClippedIdentity,  // unsquashed normal, log_prob at actions clipped by 1e-6
};

/// Gaussian policy head. The network emits (mean, log_std) per action
/// dimension; log_std is clamped to [-5, 2] after every forward pass.
struct GaussianPolicy {
    MlpSpec spec;  // output_dim = 2 * action_dim
    ParamSet params;
    SquashMode squash = SquashMode::Tanh;

    int action_dim() const { return spec.output_dim / 2; }
};

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kActionClipEps = 1e-6;
constexpr double kTanhLogDetEps = 1e-6;

/// Everything one sampling pass produces, including what the
/// reparameterized backward needs.
struct GaussSample {
    Eigen::MatrixXd actions;    // B x d, squashed / clipped
    Eigen::VectorXd log_probs;  // B, summed over dimensions
    Eigen::MatrixXd mean;       // B x d
    Eigen::MatrixXd log_std;    // B x d, clamped
    Eigen::MatrixXd raw_log_std;
    Eigen::MatrixXd noise;  // B x d standard normal draws
    ForwardCache cache;
    bool train_mode = false;
};

GaussSample gauss_sample_and_logprob_batch(const GaussianPolicy& policy,
                                           const Eigen::MatrixXd& states, Rng& rng,
                                           ForwardMode mode = ForwardMode::Eval,
                                           Rng* dropout_rng = nullptr);

std::pair<Eigen::VectorXd, double> gauss_sample_and_logprob(const GaussianPolicy& policy,
                                                            const Eigen::VectorXd& state,
                                                            Rng& rng);

/// Pathwise (reparameterized) gradients: combines an upstream gradient on
/// the sampled actions with one on the log-probabilities, both routed
/// through mean and log_std back to the parameters. Tanh mode only.
ParamSet gauss_rsample_backward(const GaussianPolicy& policy, const GaussSample& sample,
                                const Eigen::MatrixXd& dloss_daction,
                                const Eigen::VectorXd& dloss_dlogp);

struct GaussLogProb {
    Eigen::VectorXd log_probs;  // B
    Eigen::MatrixXd mean;
    Eigen::MatrixXd log_std;  // clamped
    Eigen::MatrixXd raw_log_std;
    Eigen::MatrixXd eval_points;  // clipped actions (or their atanh in Tanh mode)
    ForwardCache cache;
};

GaussLogProb gauss_logprob_batch(const GaussianPolicy& policy, const Eigen::MatrixXd& states,
                                 const Eigen::MatrixXd& actions,
                                 ForwardMode mode = ForwardMode::Eval,
                                 Rng* dropout_rng = nullptr);

double gauss_logprob(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                     const Eigen::VectorXd& action);

/// Gradients of sum(dloss_dlogp .* log_probs) with respect to parameters.
ParamSet gauss_logprob_backward(const GaussianPolicy& policy, const GaussLogProb& lp,
                                const Eigen::VectorXd& dloss_dlogp);

/// Deterministic evaluation head: tanh(mean) in Tanh mode, clipped mean
/// otherwise.
Eigen::VectorXd gauss_mean_action(const GaussianPolicy& policy, const Eigen::VectorXd& state);
Eigen::MatrixXd gauss_mean_action_batch(const GaussianPolicy& policy,
                                        const Eigen::MatrixXd& states);

}  // namespace clorl
