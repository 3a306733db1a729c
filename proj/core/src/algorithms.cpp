#include "clorl/algorithms.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "clorl/envs.hpp"

namespace clorl {

namespace {

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
        p.row(r) = (e / e.sum()).matrix();
    }
    return p;
}

Eigen::VectorXd support_centers(const ValueSupport& s) {
    Eigen::VectorXd c(s.m);
    for (int i = 0; i < s.m; ++i) c(i) = s.center(i);
    return c;
}

}  // namespace

CriticHead make_head(HeadKind kind, const ClassificationConfig& cls,
                     const OfflineDataset& dataset, double gamma) {
    CriticHead head;
    head.kind = kind;
    if (kind == HeadKind::Categorical) {
        auto [lo, hi] = support_from_dataset(dataset, gamma);
        ExpandStrategy strategy{cls.expand_strategy, cls.v_expand};
        auto [elo, ehi] = expand_support(lo, hi, strategy);
        head.support = build_support(elo, ehi, cls.m);
        head.hl_gauss = make_hl_gauss_params(head.support, cls.sigma_zeta_ratio);
    }
    return head;
}

Eigen::VectorXd head_values(const CriticHead& head, const Eigen::MatrixXd& outputs) {
    if (head.kind == HeadKind::Scalar) return outputs.col(0);
    Eigen::MatrixXd p = row_softmax(outputs);
    return p * support_centers(head.support);
}

Eigen::MatrixXd head_value_grad(const CriticHead& head, const Eigen::MatrixXd& outputs) {
    if (head.kind == HeadKind::Scalar)
        return Eigen::MatrixXd::Ones(outputs.rows(), 1);
    Eigen::MatrixXd p = row_softmax(outputs);
    Eigen::VectorXd centers = support_centers(head.support);
    Eigen::VectorXd q = p * centers;
    // d(sum p c)/dlogit_j = p_j (c_j - q)
    Eigen::MatrixXd grad(outputs.rows(), outputs.cols());
    for (Eigen::Index r = 0; r < outputs.rows(); ++r)
        grad.row(r) = p.row(r).cwiseProduct((centers.array() - q(r)).matrix().transpose());
    return grad;
}

CriticLossGrad critic_loss_grad(const CriticHead& head, const Eigen::MatrixXd& outputs,
                                const Eigen::VectorXd& targets) {
    const Eigen::Index B = outputs.rows();
    CriticLossGrad out;
    out.dloss_doutputs.resize(B, outputs.cols());
    if (head.kind == HeadKind::Scalar) {
        Eigen::VectorXd diff = outputs.col(0) - targets;
        out.loss = diff.squaredNorm() / static_cast<double>(B);
        out.dloss_doutputs.col(0) = 2.0 * diff / static_cast<double>(B);
        return out;
    }
    Eigen::MatrixXd p = row_softmax(outputs);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < B; ++r) {
        std::vector<double> target_row =
            target_to_probs(targets(r), head.support, head.hl_gauss);
        double mx = outputs.row(r).maxCoeff();
        double lse = mx + std::log((outputs.row(r).array() - mx).exp().sum());
        double mass = 0.0;
        for (int i = 0; i < head.support.m; ++i) {
            loss -= target_row[i] * (outputs(r, i) - lse);
            mass += target_row[i];
        }
        for (int i = 0; i < head.support.m; ++i)
            out.dloss_doutputs(r, i) = (mass * p(r, i) - target_row[i]) / static_cast<double>(B);
    }
    out.loss = loss / static_cast<double>(B);
    return out;
}

Critic make_critic(int obs_dim, int act_dim, const NetworkConfig& net, const CriticHead& head,
                   double lr, Rng& rng) {
    Critic c;
    c.spec.input_dim = obs_dim + act_dim;
    c.spec.hidden_dim = net.hidden_dim;
    c.spec.n_hidden_layers = net.n_hidden_layers;
    c.spec.output_dim = head.output_dim();
    c.params = init_params(c.spec, rng);
    c.target = c.params;
    c.adam = make_adam(c.params, lr);
    return c;
}

Eigen::MatrixXd critic_forward(const Critic& critic, const ParamSet& which,
                               const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                               ForwardCache* cache) {
    Eigen::MatrixXd input(states.rows(), states.cols() + actions.cols());
    input << states, actions;
    return forward_batch(which, critic.spec, input, ForwardMode::Eval, nullptr, cache);
}

// ---------------------------------------------------------------------------
// ReBRAC

RebracState make_rebrac(const RunConfig& config, const CriticHead& head, int obs_dim,
                        int act_dim, Rng& rng) {
    RebracState s;
    s.cfg = config.rebrac;
    s.head = head;
    s.actor.spec = {obs_dim, config.network.hidden_dim, config.network.n_hidden_layers,
                    act_dim, Activation::ReLU, 0.0};
    Rng actor_rng = rng.split("rebrac_actor");
    s.actor.params = init_params(s.actor.spec, actor_rng);
    s.actor_target = s.actor.params;
    s.actor_adam = make_adam(s.actor.params, s.cfg.learning_rate);
    for (int k = 0; k < 2; ++k) {
        Rng critic_rng = rng.split("rebrac_critic_" + std::to_string(k));
        s.critics.push_back(make_critic(obs_dim, act_dim, config.network, head,
                                        s.cfg.learning_rate, critic_rng));
    }
    return s;
}

UpdateDiagnostics rebrac_critic_update(RebracState& state, const Batch& batch, Rng& noise_rng) {
    const auto& cfg = state.cfg;
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    const int act_dim = state.actor.action_dim();
    if (batch.next_actions.cols() != act_dim)
        throw std::invalid_argument("rebrac_critic_update: batch lacks next_actions");

    // Target policy smoothing: clipped noise on the target actor's action.
    Eigen::MatrixXd next_pre =
        forward_batch(state.actor_target, state.actor.spec, batch.next_states, ForwardMode::Eval);
    Eigen::MatrixXd next_a = next_pre.array().tanh();
    for (Eigen::Index r = 0; r < B; ++r) {
        for (int c = 0; c < act_dim; ++c) {
            double noise = noise_rng.normal() * cfg.policy_noise;
            noise = std::min(cfg.noise_clip, std::max(-cfg.noise_clip, noise));
            next_a(r, c) = std::min(1.0, std::max(-1.0, next_a(r, c) + noise));
        }
    }
    Eigen::VectorXd bc_penalty = (next_a - batch.next_actions).rowwise().squaredNorm();

    Eigen::VectorXd next_q;
    for (auto& critic : state.critics) {
        Eigen::MatrixXd out = critic_forward(critic, critic.target, batch.next_states, next_a);
        Eigen::VectorXd q = head_values(state.head, out);
        next_q = next_q.size() == 0 ? q : next_q.cwiseMin(q);
    }
    next_q -= cfg.beta2 * bc_penalty;
    Eigen::VectorXd target =
        batch.rewards.array() +
        (1.0 - batch.dones.array()) * cfg.gamma * next_q.array();

    UpdateDiagnostics diag;
    Eigen::VectorXd online_min;
    for (auto& critic : state.critics) {
        ForwardCache cache;
        Eigen::MatrixXd out =
            critic_forward(critic, critic.params, batch.states, batch.actions, &cache);
        Eigen::VectorXd q = head_values(state.head, out);
        online_min = online_min.size() == 0 ? q : online_min.cwiseMin(q);
        CriticLossGrad lg = critic_loss_grad(state.head, out, target);
        diag.critic_loss += lg.loss;
        BackwardResult back = backward_batch(critic.params, critic.spec, cache, lg.dloss_doutputs);
        adam_step(critic.adam, critic.params, back.param_grads);
    }
    diag.mean_q = online_min.mean();
    return diag;
}

UpdateDiagnostics rebrac_actor_update(RebracState& state, const Batch& batch) {
    const auto& cfg = state.cfg;
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(B);

    ForwardCache actor_cache;
    Eigen::MatrixXd actions = det_action_batch(state.actor, batch.states, &actor_cache);
    Eigen::VectorXd bc_penalty = (actions - batch.actions).rowwise().squaredNorm();

    // Q of the policy action under both critics, tracking the per-row min.
    std::vector<ForwardCache> caches(state.critics.size());
    std::vector<Eigen::MatrixXd> outs(state.critics.size());
    Eigen::VectorXd q_min;
    std::vector<int> which(B, 0);
    for (std::size_t k = 0; k < state.critics.size(); ++k) {
        outs[k] = critic_forward(state.critics[k], state.critics[k].params, batch.states,
                                 actions, &caches[k]);
        Eigen::VectorXd q = head_values(state.head, outs[k]);
        if (q_min.size() == 0) {
            q_min = q;
        } else {
            for (Eigen::Index r = 0; r < B; ++r) {
                if (q(r) < q_min(r)) {
                    q_min(r) = q(r);
                    which[r] = static_cast<int>(k);
                }
            }
        }
    }

    double lambda = 1.0;
    if (cfg.normalize_q)
        lambda = 1.0 / std::max(q_min.cwiseAbs().mean(), 1e-12);  // stop-gradient

    UpdateDiagnostics diag;
    diag.actor_loss = (cfg.beta1 * bc_penalty.array() - lambda * q_min.array()).mean();

    // d loss / d action: BC term plus -lambda dQmin/da through the
    // selected critic of each row.
    Eigen::MatrixXd dloss_da = 2.0 * cfg.beta1 * inv_b * (actions - batch.actions);
    for (std::size_t k = 0; k < state.critics.size(); ++k) {
        Eigen::MatrixXd vgrad = head_value_grad(state.head, outs[k]);
        Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(B, outs[k].cols());
        for (Eigen::Index r = 0; r < B; ++r)
            if (which[r] == static_cast<int>(k))
                upstream.row(r) = -lambda * inv_b * vgrad.row(r);
        BackwardResult back = backward_batch(state.critics[k].params, state.critics[k].spec,
                                             caches[k], upstream);
        dloss_da += back.input_grads.rightCols(actions.cols());
    }

    ParamSet actor_grads = det_action_backward(state.actor, actor_cache, actions, dloss_da);
    adam_step(state.actor_adam, state.actor.params, actor_grads);

    soft_update(state.actor_target, state.actor.params, cfg.tau);
    for (auto& critic : state.critics) soft_update(critic.target, critic.params, cfg.tau);
    return diag;
}

// ---------------------------------------------------------------------------
// IQL

IqlState make_iql(const RunConfig& config, const CriticHead& head, int obs_dim, int act_dim,
                  std::int64_t n_steps, Rng& rng) {
    IqlState s;
    s.cfg = config.iql;
    s.head = head;

    s.actor.spec = {obs_dim, config.network.hidden_dim, config.network.n_hidden_layers,
                    2 * act_dim, Activation::ReLU, s.cfg.dropout_rate};
    s.actor.squash = SquashMode::ClippedIdentity;
    Rng actor_rng = rng.split("iql_actor");
    s.actor.params = init_params(s.actor.spec, actor_rng);
    std::int64_t total = s.cfg.cosine_total_steps > 0 ? s.cfg.cosine_total_steps : n_steps;
    s.actor_adam = make_adam(s.actor.params, s.cfg.learning_rate, LrSchedule::CosineDecay,
                             std::max<std::int64_t>(total, 1));

    s.value_spec = {obs_dim, config.network.hidden_dim, config.network.n_hidden_layers, 1,
                    Activation::ReLU, s.cfg.dropout_rate};
    Rng value_rng = rng.split("iql_value");
    s.value_params = init_params(s.value_spec, value_rng);
    s.value_adam = make_adam(s.value_params, s.cfg.learning_rate);

    for (int k = 0; k < 2; ++k) {
        Rng critic_rng = rng.split("iql_critic_" + std::to_string(k));
        s.critics.push_back(make_critic(obs_dim, act_dim, config.network, head,
                                        s.cfg.learning_rate, critic_rng));
    }
    return s;
}

namespace {

Eigen::VectorXd iql_target_q_min(IqlState& state, const Batch& batch) {
    Eigen::VectorXd q_min;
    for (auto& critic : state.critics) {
        Eigen::MatrixXd out =
            critic_forward(critic, critic.target, batch.states, batch.actions);
        Eigen::VectorXd q = head_values(state.head, out);
        q_min = q_min.size() == 0 ? q : q_min.cwiseMin(q);
    }
    return q_min;
}

}  // namespace

UpdateDiagnostics iql_v_update(IqlState& state, const Batch& batch, Rng& dropout_rng) {
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    Eigen::VectorXd q = iql_target_q_min(state, batch);

    ForwardCache cache;
    Eigen::MatrixXd v_out = forward_batch(state.value_params, state.value_spec, batch.states,
                                          ForwardMode::Train, &dropout_rng, &cache);
    Eigen::VectorXd v = v_out.col(0);
    Eigen::VectorXd diff = q - v;

    double loss = 0.0;
    Eigen::MatrixXd upstream(B, 1);
    for (Eigen::Index r = 0; r < B; ++r) {
        double w = diff(r) > 0.0 ? state.cfg.expectile : 1.0 - state.cfg.expectile;
        loss += w * diff(r) * diff(r);
        upstream(r, 0) = -2.0 * w * diff(r) / static_cast<double>(B);
    }
    loss /= static_cast<double>(B);

    BackwardResult back = backward_batch(state.value_params, state.value_spec, cache, upstream);
    adam_step(state.value_adam, state.value_params, back.param_grads);

    UpdateDiagnostics diag;
    diag.critic_loss = loss;
    diag.mean_q = q.mean();
    return diag;
}

UpdateDiagnostics iql_q_update(IqlState& state, const Batch& batch) {
    Eigen::MatrixXd next_v = forward_batch(state.value_params, state.value_spec,
                                           batch.next_states, ForwardMode::Eval);
    Eigen::VectorXd target =
        batch.rewards.array() +
        state.cfg.gamma * (1.0 - batch.dones.array()) * next_v.col(0).array();

    UpdateDiagnostics diag;
    Eigen::VectorXd online_min;
    for (auto& critic : state.critics) {
        ForwardCache cache;
        Eigen::MatrixXd out =
            critic_forward(critic, critic.params, batch.states, batch.actions, &cache);
        Eigen::VectorXd q = head_values(state.head, out);
        online_min = online_min.size() == 0 ? q : online_min.cwiseMin(q);
        CriticLossGrad lg = critic_loss_grad(state.head, out, target);
        diag.critic_loss += lg.loss;
        BackwardResult back = backward_batch(critic.params, critic.spec, cache, lg.dloss_doutputs);
        adam_step(critic.adam, critic.params, back.param_grads);
    }
    for (auto& critic : state.critics) soft_update(critic.target, critic.params, state.cfg.tau);
    diag.mean_q = online_min.mean();
    return diag;
}

UpdateDiagnostics iql_actor_update(IqlState& state, const Batch& batch, Rng& dropout_rng) {
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    Eigen::VectorXd q = iql_target_q_min(state, batch);
    Eigen::VectorXd v =
        forward_batch(state.value_params, state.value_spec, batch.states, ForwardMode::Eval)
            .col(0);

    Eigen::VectorXd weight(B);
    for (Eigen::Index r = 0; r < B; ++r) {
        double w = std::exp(state.cfg.inv_temperature * (q(r) - v(r)));
        weight(r) = std::min(state.cfg.adv_clip, std::max(-state.cfg.adv_clip, w));
    }

    GaussLogProb lp = gauss_logprob_batch(state.actor, batch.states, batch.actions,
                                          ForwardMode::Train, &dropout_rng);
    UpdateDiagnostics diag;
    diag.actor_loss = -(weight.array() * lp.log_probs.array()).mean();

    Eigen::VectorXd dloss_dlogp = -weight / static_cast<double>(B);
    ParamSet grads = gauss_logprob_backward(state.actor, lp, dloss_dlogp);
    adam_step(state.actor_adam, state.actor.params, grads);
    return diag;
}

// ---------------------------------------------------------------------------
// LB-SAC

LbSacState make_lbsac(const RunConfig& config, const CriticHead& head, int obs_dim,
                      int act_dim, Rng& rng) {
    LbSacState s;
    s.cfg = config.lbsac;
    s.head = head;
    s.actor.spec = {obs_dim, config.network.hidden_dim, config.network.n_hidden_layers,
                    2 * act_dim, Activation::ReLU, 0.0};
    s.actor.squash = SquashMode::Tanh;
    Rng actor_rng = rng.split("lbsac_actor");
    s.actor.params = init_params(s.actor.spec, actor_rng);
    s.actor_adam = make_adam(s.actor.params, s.cfg.learning_rate);
    for (int k = 0; k < s.cfg.n_critics; ++k) {
        Rng critic_rng = rng.split("lbsac_critic_" + std::to_string(k));
        s.critics.push_back(make_critic(obs_dim, act_dim, config.network, head,
                                        s.cfg.learning_rate, critic_rng));
    }
    s.log_alpha = std::log(s.cfg.init_alpha);
    s.target_entropy =
        s.cfg.target_entropy != 0.0 ? s.cfg.target_entropy : -static_cast<double>(act_dim);
    return s;
}

UpdateDiagnostics lbsac_updates(LbSacState& state, const Batch& batch, Rng& sample_rng) {
    if (state.critics.size() < 2)
        throw std::invalid_argument("lbsac_updates: need at least 2 critics");
    const auto& cfg = state.cfg;
    const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(B);
    const double alpha = state.alpha();
    UpdateDiagnostics diag;

    // Critic update.
    {
        GaussSample next = gauss_sample_and_logprob_batch(state.actor, batch.next_states,
                                                          sample_rng);
        Eigen::VectorXd next_q;
        for (auto& critic : state.critics) {
            Eigen::MatrixXd out =
                critic_forward(critic, critic.target, batch.next_states, next.actions);
            Eigen::VectorXd q = head_values(state.head, out);
            next_q = next_q.size() == 0 ? q : next_q.cwiseMin(q);
        }
        next_q -= alpha * next.log_probs;
        Eigen::VectorXd target =
            batch.rewards.array() +
            (1.0 - batch.dones.array()) * cfg.gamma * next_q.array();

        Eigen::VectorXd online_min;
        for (auto& critic : state.critics) {
            ForwardCache cache;
            Eigen::MatrixXd out =
                critic_forward(critic, critic.params, batch.states, batch.actions, &cache);
            Eigen::VectorXd q = head_values(state.head, out);
            online_min = online_min.size() == 0 ? q : online_min.cwiseMin(q);
            CriticLossGrad lg = critic_loss_grad(state.head, out, target);
            diag.critic_loss += lg.loss;
            BackwardResult back =
                backward_batch(critic.params, critic.spec, cache, lg.dloss_doutputs);
            adam_step(critic.adam, critic.params, back.param_grads);
        }
        diag.mean_q = online_min.mean();
        for (auto& critic : state.critics) soft_update(critic.target, critic.params, cfg.tau);
    }

    // Actor update (reparameterized), then temperature on the same sample.
    double mean_logp = 0.0;
    {
        GaussSample sample = gauss_sample_and_logprob_batch(state.actor, batch.states,
                                                            sample_rng);
        mean_logp = sample.log_probs.mean();

        std::vector<ForwardCache> caches(state.critics.size());
        std::vector<Eigen::MatrixXd> outs(state.critics.size());
        Eigen::VectorXd q_min;
        std::vector<int> which(B, 0);
        for (std::size_t k = 0; k < state.critics.size(); ++k) {
            outs[k] = critic_forward(state.critics[k], state.critics[k].params, batch.states,
                                     sample.actions, &caches[k]);
            Eigen::VectorXd q = head_values(state.head, outs[k]);
            if (q_min.size() == 0) {
                q_min = q;
            } else {
                for (Eigen::Index r = 0; r < B; ++r) {
                    if (q(r) < q_min(r)) {
                        q_min(r) = q(r);
                        which[r] = static_cast<int>(k);
                    }
                }
            }
        }
        diag.actor_loss = (alpha * sample.log_probs.array() - q_min.array()).mean();

        Eigen::MatrixXd dloss_da = Eigen::MatrixXd::Zero(B, sample.actions.cols());
        for (std::size_t k = 0; k < state.critics.size(); ++k) {
            Eigen::MatrixXd vgrad = head_value_grad(state.head, outs[k]);
            Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(B, outs[k].cols());
            bool any = false;
            for (Eigen::Index r = 0; r < B; ++r) {
                if (which[r] == static_cast<int>(k)) {
                    upstream.row(r) = -inv_b * vgrad.row(r);
                    any = true;
                }
            }
            if (!any) continue;
            BackwardResult back = backward_batch(state.critics[k].params, state.critics[k].spec,
                                                 caches[k], upstream);
            dloss_da += back.input_grads.rightCols(sample.actions.cols());
        }
        Eigen::VectorXd dloss_dlogp = Eigen::VectorXd::Constant(B, alpha * inv_b);
        ParamSet grads = gauss_rsample_backward(state.actor, sample, dloss_da, dloss_dlogp);
        adam_step(state.actor_adam, state.actor.params, grads);
    }

    // Temperature: loss = -log_alpha * (mean log pi + target entropy).
    {
        double g = -(mean_logp + state.target_entropy);
        if (!std::isfinite(g))
            throw std::invalid_argument("lbsac_updates: non-finite temperature gradient");
        state.alpha_step += 1;
        state.alpha_m = 0.9 * state.alpha_m + 0.1 * g;
        state.alpha_v = 0.999 * state.alpha_v + 0.001 * g * g;
        double m_hat = state.alpha_m / (1.0 - std::pow(0.9, static_cast<double>(state.alpha_step)));
        double v_hat = state.alpha_v / (1.0 - std::pow(0.999, static_cast<double>(state.alpha_step)));
        state.log_alpha -= cfg.alpha_lr * m_hat / (std::sqrt(v_hat) + 1e-8);
    }
    return diag;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct LogWindow {
    double critic_sum = 0.0, actor_sum = 0.0, q_sum = 0.0;
    std::int64_t critic_n = 0, actor_n = 0, q_n = 0;
    double last_actor = 0.0;

    void add(const UpdateDiagnostics& d, bool actor_updated) {
        critic_sum += d.critic_loss;
        critic_n += 1;
        q_sum += d.mean_q;
        q_n += 1;
        if (actor_updated) {
            actor_sum += d.actor_loss;
            actor_n += 1;
            last_actor = d.actor_loss;
        }
    }
    double critic_mean() const { return critic_n ? critic_sum / critic_n : 0.0; }
    double actor_mean() const { return actor_n ? actor_sum / actor_n : last_actor; }
    double q_mean() const { return q_n ? q_sum / q_n : 0.0; }
    void reset() {
        critic_sum = actor_sum = q_sum = 0.0;
        critic_n = actor_n = q_n = 0;
    }
};

}  // namespace

RunResult train(const RunConfig& config, const OfflineDataset& dataset,
                const DatasetMeta& meta, const Env& env, const TrainSinks& sinks) {
    config.validate();
    (void)meta;
    const double gamma = config.gamma();
    CriticHead head = make_head(config.head, config.classification, dataset, gamma);

    Rng root(config.seed);
    Rng init_rng = root.split("init");
    Rng sample_rng = root.split("sampling");
    Rng noise_rng = root.split("noise");
    Rng dropout_rng = root.split("dropout");
    const std::uint64_t eval_seed_base = root.split("eval").next_u64();

    const int obs_dim = dataset.obs_dim;
    const int act_dim = dataset.act_dim;

    enum class Algo { Rebrac, Iql, LbSac };
    Algo algo = config.algorithm == "rebrac" ? Algo::Rebrac
               : config.algorithm == "iql"  ? Algo::Iql
                                            : Algo::LbSac;

    RebracState rebrac_state;
    IqlState iql_state;
    LbSacState lbsac_state;
    switch (algo) {
    case Algo::Rebrac: rebrac_state = make_rebrac(config, head, obs_dim, act_dim, init_rng); break;
    case Algo::Iql: iql_state = make_iql(config, head, obs_dim, act_dim, config.n_steps, init_rng); break;
    case Algo::LbSac: lbsac_state = make_lbsac(config, head, obs_dim, act_dim, init_rng); break;
    }

    PolicyFn eval_policy = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
        switch (algo) {
        case Algo::Rebrac: return det_action(rebrac_state.actor, s);
        case Algo::Iql: return gauss_mean_action(iql_state.actor, s);
        default: return gauss_mean_action(lbsac_state.actor, s);
        }
    };

    std::ofstream log;
    if (!sinks.log_csv.empty()) {
        log.open(sinks.log_csv, std::ios::trunc);
        if (!log) throw std::runtime_error("train: cannot open log: " + sinks.log_csv);
        log << "step,critic_loss,actor_loss,mean_q_estimate,eval_return_mean,eval_return_std\n";
    }

    RunResult result;
    result.fingerprint = config_fingerprint(config);
    result.seed = config.seed;

    LogWindow window;
    auto emit = [&](std::int64_t at_step) {
        auto [mean, stddev] = evaluate_policy(env, eval_policy, config.eval_episodes,
                                              eval_seed_base + static_cast<std::uint64_t>(at_step));
        result.evals.push_back({at_step, mean, stddev, config.eval_episodes});
        result.q_trace.push_back({at_step, window.q_mean()});
        if (log.is_open()) {
            log << at_step << "," << format_double(window.critic_mean()) << ","
                << format_double(window.actor_mean()) << "," << format_double(window.q_mean())
                << "," << format_double(mean) << "," << format_double(stddev) << "\n";
        }
        window.reset();
    };

    emit(0);

    for (std::int64_t t = 0; t < config.n_steps; ++t) {
        Batch batch = sample_batch(dataset, static_cast<std::size_t>(config.batch_size()),
                                   sample_rng);
        UpdateDiagnostics diag;
        bool actor_updated = false;
        try {
            switch (algo) {
            case Algo::Rebrac: {
                diag = rebrac_critic_update(rebrac_state, batch, noise_rng);
                if ((t + 1) % rebrac_state.cfg.actor_update_period == 0) {
                    UpdateDiagnostics a = rebrac_actor_update(rebrac_state, batch);
                    diag.actor_loss = a.actor_loss;
                    actor_updated = true;
                }
                break;
            }
            case Algo::Iql: {
                UpdateDiagnostics v = iql_v_update(iql_state, batch, dropout_rng);
                UpdateDiagnostics q = iql_q_update(iql_state, batch);
                UpdateDiagnostics a = iql_actor_update(iql_state, batch, dropout_rng);
                diag.critic_loss = v.critic_loss + q.critic_loss;
                diag.mean_q = q.mean_q;
                diag.actor_loss = a.actor_loss;
                actor_updated = true;
                break;
            }
            case Algo::LbSac: {
                diag = lbsac_updates(lbsac_state, batch, noise_rng);
                actor_updated = true;
                break;
            }
            }
        } catch (const std::invalid_argument& e) {
            throw DivergenceError(t, e.what());
        }
        if (!std::isfinite(diag.critic_loss) || !std::isfinite(diag.actor_loss) ||
            !std::isfinite(diag.mean_q))
            throw DivergenceError(t, "non-finite loss");
        window.add(diag, actor_updated);

        std::int64_t completed = t + 1;
        if (completed % config.eval_every == 0 || completed == config.n_steps)
            emit(completed);
    }

    result.final_score = result.evals.back().mean;

    if (!sinks.checkpoint_dir.empty()) {
        std::filesystem::create_directories(sinks.checkpoint_dir);
        auto save_net = [&](const MlpSpec& spec, const ParamSet& params, const AdamState& adam,
                            const std::string& name) {
            Checkpoint ckpt;
            ckpt.spec = spec;
            ckpt.params = params;
            ckpt.step = adam.step;
            ckpt.schedule = adam.schedule;
            ckpt.total_steps = adam.total_steps;
            ckpt.base_lr = adam.base_lr;
            save_checkpoint(ckpt, sinks.checkpoint_dir + "/" + name + ".ckpt");
        };
        switch (algo) {
        case Algo::Rebrac:
            save_net(rebrac_state.actor.spec, rebrac_state.actor.params, rebrac_state.actor_adam,
                     "actor");
            for (std::size_t k = 0; k < rebrac_state.critics.size(); ++k)
                save_net(rebrac_state.critics[k].spec, rebrac_state.critics[k].params,
                         rebrac_state.critics[k].adam, "critic" + std::to_string(k));
            break;
        case Algo::Iql:
            save_net(iql_state.actor.spec, iql_state.actor.params, iql_state.actor_adam, "actor");
            save_net(iql_state.value_spec, iql_state.value_params, iql_state.value_adam, "value");
            for (std::size_t k = 0; k < iql_state.critics.size(); ++k)
                save_net(iql_state.critics[k].spec, iql_state.critics[k].params,
                         iql_state.critics[k].adam, "critic" + std::to_string(k));
            break;
        case Algo::LbSac:
            save_net(lbsac_state.actor.spec, lbsac_state.actor.params, lbsac_state.actor_adam,
                     "actor");
            for (std::size_t k = 0; k < lbsac_state.critics.size(); ++k)
                save_net(lbsac_state.critics[k].spec, lbsac_state.critics[k].params,
                         lbsac_state.critics[k].adam, "critic" + std::to_string(k));
            break;
        }
    }
    return result;
}

}  // namespace clorl
