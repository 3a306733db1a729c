#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clorl/config.hpp"
#include "clorl/dataset.hpp"
#include "clorl/evaluation.hpp"
#include "clorl/mlp.hpp"
#include "clorl/policies.hpp"
#include "clorl/rng.hpp"
#include "clorl/value_support.hpp"

namespace clorl {

class Env;

/// Thrown when a training step produces a non-finite loss or gradient;
/// divergence is detected and reported, never silently ignored.
struct DivergenceError : std::runtime_error {
    std::int64_t step;
    DivergenceError(std::int64_t at, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(at)), step(at) {}
};

/// A critic either regresses a scalar (MSE) or classifies over value bins
/// (cross-entropy on HL-Gauss targets). Categorical outputs are always
/// scalarized through the expected bin value before any min or penalty
/// arithmetic; the min is never taken in distribution space.
struct CriticHead {
    HeadKind kind = HeadKind::Scalar;
    ValueSupport support;
    HlGaussParams hl_gauss;

    int output_dim() const { return kind == HeadKind::Scalar ? 1 : support.m; }
};

/// Build the categorical head for a dataset: support range from the
/// discounted suffix returns, optionally expanded, then binned.
CriticHead make_head(HeadKind kind, const ClassificationConfig& cls,
                     const OfflineDataset& dataset, double gamma);

/// Scalar value of each row of raw critic outputs.
Eigen::VectorXd head_values(const CriticHead& head, const Eigen::MatrixXd& outputs);
/// Row-wise gradient of the scalar value with respect to the raw outputs
/// (softmax-weighted centered bin values for the categorical head).
Eigen::MatrixXd head_value_grad(const CriticHead& head, const Eigen::MatrixXd& outputs);

/// Critic regression/classification loss toward scalar targets, with the
/// gradient in output space. MSE: mean (q - y)^2. CE: mean cross-entropy
/// of softmax(outputs) against the HL-Gauss encoding of y.
struct CriticLossGrad {
    double loss = 0.0;
    Eigen::MatrixXd dloss_doutputs;
};
CriticLossGrad critic_loss_grad(const CriticHead& head, const Eigen::MatrixXd& outputs,
                                const Eigen::VectorXd& targets);

/// One Q network with its target copy and optimizer state.
struct Critic {
    MlpSpec spec;
    ParamSet params;
    ParamSet target;
    AdamState adam;
};

Critic make_critic(int obs_dim, int act_dim, const NetworkConfig& net, const CriticHead& head,
                   double lr, Rng& rng);

Eigen::MatrixXd critic_forward(const Critic& critic, const ParamSet& which,
                               const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                               ForwardCache* cache = nullptr);

struct UpdateDiagnostics {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_q = 0.0;  // batch mean of the (min-)scalarized online Q(s, a)
};

// ---------------------------------------------------------------------------
// ReBRAC: TD3+BC-style twin critics, deterministic tanh actor, squared
// behavior-cloning penalties on both the actor and the critic target.

struct RebracState {
    RebracConfig cfg;
    CriticHead head;
    DeterministicPolicy actor;
    ParamSet actor_target;
    AdamState actor_adam;
    std::vector<Critic> critics;  // twin
};

RebracState make_rebrac(const RunConfig& config, const CriticHead& head, int obs_dim,
                        int act_dim, Rng& rng);

/// Target: r + (1-done) gamma (min_k Q_k(s', a') - beta2 |a' - a'_data|^2)
/// with a' = clip(actor_target(s') + clipped noise, -1, 1).
UpdateDiagnostics rebrac_critic_update(RebracState& state, const Batch& batch, Rng& noise_rng);

/// Loss: mean(beta1 |pi(s) - a|^2 - lambda min_k Q_k(s, pi(s))), lambda the
/// stop-gradient 1/mean|Q| when normalize_q; also soft-updates the actor
/// and critic targets.
UpdateDiagnostics rebrac_actor_update(RebracState& state, const Batch& batch);

// ---------------------------------------------------------------------------
// IQL: expectile value net, twin Q critics regressed on r + gamma V(s'),
// advantage-weighted actor on dataset actions.

struct IqlState {
    IqlConfig cfg;
    CriticHead head;
    GaussianPolicy actor;  // ClippedIdentity squash
    AdamState actor_adam;  // cosine decay
    MlpSpec value_spec;
    ParamSet value_params;
    AdamState value_adam;
    std::vector<Critic> critics;  // twin
};

IqlState make_iql(const RunConfig& config, const CriticHead& head, int obs_dim, int act_dim,
                  std::int64_t n_steps, Rng& rng);

/// Expectile regression of V(s) toward min_k target Q_k(s, a_data).
UpdateDiagnostics iql_v_update(IqlState& state, const Batch& batch, Rng& dropout_rng);
/// Both critics toward r + (1-done) gamma V(s'); soft-updates targets.
UpdateDiagnostics iql_q_update(IqlState& state, const Batch& batch);
/// Advantage-weighted regression: -mean(clip(exp(beta A), 100) log pi(a|s)).
UpdateDiagnostics iql_actor_update(IqlState& state, const Batch& batch, Rng& dropout_rng);

// ---------------------------------------------------------------------------
// LB-SAC: N-critic soft actor-critic with automatic temperature,
// large-batch flavored defaults.

struct LbSacState {
    LbSacConfig cfg;
    CriticHead head;
    GaussianPolicy actor;  // Tanh squash
    AdamState actor_adam;
    std::vector<Critic> critics;  // N
    double log_alpha = 0.0;
    double alpha_m = 0.0;  // scalar Adam moments for log_alpha
    double alpha_v = 0.0;
    std::int64_t alpha_step = 0;
    double target_entropy = 0.0;

    double alpha() const { return std::exp(log_alpha); }
};

LbSacState make_lbsac(const RunConfig& config, const CriticHead& head, int obs_dim,
                      int act_dim, Rng& rng);

/// Critic, actor and temperature updates, in that order.
UpdateDiagnostics lbsac_updates(LbSacState& state, const Batch& batch, Rng& sample_rng);

// ---------------------------------------------------------------------------

struct TrainSinks {
    std::string log_csv;         // run log path; empty disables it
    std::string checkpoint_dir;  // final network checkpoints; empty disables
};

/// Full training loop: per-algorithm update order (ReBRAC delays the
/// actor; IQL runs V, Q, actor; LB-SAC runs critic, actor, alpha),
/// deterministic given the seed, evaluating at the configured cadence
/// (and at step 0, so n_steps = 0 yields the initial evaluation only).
RunResult train(const RunConfig& config, const OfflineDataset& dataset,
                const DatasetMeta& meta, const Env& env, const TrainSinks& sinks = {});

}  // namespace clorl
