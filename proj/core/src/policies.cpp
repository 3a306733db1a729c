#include "clorl/policies.hpp"

#include <cmath>
#include <stdexcept>

#include "clorl/rng.hpp"

namespace clorl {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

void split_heads(const Eigen::MatrixXd& net_out, int d, Eigen::MatrixXd& mean,
                 Eigen::MatrixXd& raw_log_std, Eigen::MatrixXd& log_std) {
    mean = net_out.leftCols(d);
    raw_log_std = net_out.rightCols(d);
    log_std = raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

}  // namespace

Eigen::MatrixXd det_action_batch(const DeterministicPolicy& policy,
                                 const Eigen::MatrixXd& states, ForwardCache* cache) {
    Eigen::MatrixXd pre = forward_batch(policy.params, policy.spec, states, ForwardMode::Eval,
                                        nullptr, cache);
    return pre.array().tanh();
}

Eigen::VectorXd det_action(const DeterministicPolicy& policy, const Eigen::VectorXd& state) {
    Eigen::MatrixXd row = state.transpose();
    return det_action_batch(policy, row).row(0).transpose();
}

ParamSet det_action_backward(const DeterministicPolicy& policy, const ForwardCache& cache,
                             const Eigen::MatrixXd& actions,
                             const Eigen::MatrixXd& dloss_daction) {
    // d tanh(u) / du = 1 - tanh(u)^2
    Eigen::MatrixXd upstream =
        dloss_daction.cwiseProduct((1.0 - actions.array().square()).matrix());
    return backward_batch(policy.params, policy.spec, cache, upstream).param_grads;
}

GaussSample gauss_sample_and_logprob_batch(const GaussianPolicy& policy,
                                           const Eigen::MatrixXd& states, Rng& rng,
                                           ForwardMode mode, Rng* dropout_rng) {
    const int d = policy.action_dim();
    GaussSample s;
    s.train_mode = mode == ForwardMode::Train;
    Eigen::MatrixXd out =
        forward_batch(policy.params, policy.spec, states, mode, dropout_rng, &s.cache);
    split_heads(out, d, s.mean, s.raw_log_std, s.log_std);

    const Eigen::Index B = states.rows();
    s.noise.resize(B, d);
    for (Eigen::Index r = 0; r < B; ++r)
        for (int c = 0; c < d; ++c) s.noise(r, c) = rng.normal();

    Eigen::MatrixXd std = s.log_std.array().exp();
    Eigen::MatrixXd u = s.mean + std.cwiseProduct(s.noise);
    s.actions.resize(B, d);
    s.log_probs = Eigen::VectorXd::Zero(B);

    if (policy.squash == SquashMode::Tanh) {
        for (Eigen::Index r = 0; r < B; ++r) {
            double lp = 0.0;
            for (int c = 0; c < d; ++c) {
                double a = std::tanh(u(r, c));
                s.actions(r, c) = a;
                double z = s.noise(r, c);
                lp += -0.5 * z * z - s.log_std(r, c) - kHalfLog2Pi;
                lp -= std::log(1.0 - a * a + kTanhLogDetEps);
            }
            s.log_probs(r) = lp;
        }
    } else {
        for (Eigen::Index r = 0; r < B; ++r) {
            double lp = 0.0;
            for (int c = 0; c < d; ++c) {
                double a = std::min(1.0, std::max(-1.0, u(r, c)));
                s.actions(r, c) = a;
                double c_eval = std::min(1.0 - kActionClipEps, std::max(-1.0 + kActionClipEps, u(r, c)));
                double sd = std::exp(s.log_std(r, c));
                double zz = (c_eval - s.mean(r, c)) / sd;
                lp += -0.5 * zz * zz - s.log_std(r, c) - kHalfLog2Pi;
            }
            s.log_probs(r) = lp;
        }
    }
    return s;
}

std::pair<Eigen::VectorXd, double> gauss_sample_and_logprob(const GaussianPolicy& policy,
                                                            const Eigen::VectorXd& state,
                                                            Rng& rng) {
    Eigen::MatrixXd row = state.transpose();
    GaussSample s = gauss_sample_and_logprob_batch(policy, row, rng);
    return {s.actions.row(0).transpose(), s.log_probs(0)};
}

ParamSet gauss_rsample_backward(const GaussianPolicy& policy, const GaussSample& sample,
                                const Eigen::MatrixXd& dloss_daction,
                                const Eigen::VectorXd& dloss_dlogp) {
    if (policy.squash != SquashMode::Tanh)
        throw std::invalid_argument("gauss_rsample_backward: only Tanh policies are reparameterized");
    const int d = policy.action_dim();
    const Eigen::Index B = sample.actions.rows();

    Eigen::MatrixXd upstream(B, 2 * d);
    for (Eigen::Index r = 0; r < B; ++r) {
        for (int c = 0; c < d; ++c) {
            double a = sample.actions(r, c);
            double one_m_a2 = 1.0 - a * a;
            double sd = std::exp(sample.log_std(r, c));
            double z = sample.noise(r, c);
            double da_dmean = one_m_a2;
            double da_dlogstd = one_m_a2 * sd * z;
            // logp = -0.5 z^2 - log_std - C - log(1 - a^2 + eps), z fixed
            double dlp_da = 2.0 * a / (one_m_a2 + kTanhLogDetEps);
            double dlp_dmean = dlp_da * da_dmean;
            double dlp_dlogstd = -1.0 + dlp_da * da_dlogstd;

            double g_a = dloss_daction(r, c);
            double g_lp = dloss_dlogp(r);
            double gm = g_a * da_dmean + g_lp * dlp_dmean;
            double gl = g_a * da_dlogstd + g_lp * dlp_dlogstd;
            // Hard clamp on log_std: no gradient where it saturated.
            if (sample.raw_log_std(r, c) < kLogStdMin || sample.raw_log_std(r, c) > kLogStdMax)
                gl = 0.0;
            upstream(r, c) = gm;
            upstream(r, d + c) = gl;
        }
    }
    return backward_batch(policy.params, policy.spec, sample.cache, upstream).param_grads;
}

GaussLogProb gauss_logprob_batch(const GaussianPolicy& policy, const Eigen::MatrixXd& states,
                                 const Eigen::MatrixXd& actions, ForwardMode mode,
                                 Rng* dropout_rng) {
    if (actions.cols() != policy.action_dim())
        throw std::invalid_argument("gauss_logprob: action dimension mismatch");
    if (actions.rows() != states.rows())
        throw std::invalid_argument("gauss_logprob: batch size mismatch");
    const int d = policy.action_dim();
    GaussLogProb lp;
    Eigen::MatrixXd out =
        forward_batch(policy.params, policy.spec, states, mode, dropout_rng, &lp.cache);
    split_heads(out, d, lp.mean, lp.raw_log_std, lp.log_std);

    const Eigen::Index B = states.rows();
    lp.eval_points.resize(B, d);
    lp.log_probs = Eigen::VectorXd::Zero(B);
    for (Eigen::Index r = 0; r < B; ++r) {
        double total = 0.0;
        for (int c = 0; c < d; ++c) {
            double clipped = std::min(1.0 - kActionClipEps,
                                      std::max(-1.0 + kActionClipEps, actions(r, c)));
            double sd = std::exp(lp.log_std(r, c));
            if (policy.squash == SquashMode::Tanh) {
                double u = std::atanh(clipped);
                lp.eval_points(r, c) = u;
                double z = (u - lp.mean(r, c)) / sd;
                total += -0.5 * z * z - lp.log_std(r, c) - kHalfLog2Pi;
                total -= std::log(1.0 - clipped * clipped + kTanhLogDetEps);
            } else {
                lp.eval_points(r, c) = clipped;
                double z = (clipped - lp.mean(r, c)) / sd;
                total += -0.5 * z * z - lp.log_std(r, c) - kHalfLog2Pi;
            }
        }
        lp.log_probs(r) = total;
    }
    return lp;
}

double gauss_logprob(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                     const Eigen::VectorXd& action) {
    Eigen::MatrixXd srow = state.transpose();
    Eigen::MatrixXd arow = action.transpose();
    return gauss_logprob_batch(policy, srow, arow).log_probs(0);
}

ParamSet gauss_logprob_backward(const GaussianPolicy& policy, const GaussLogProb& lp,
                                const Eigen::VectorXd& dloss_dlogp) {
    const int d = policy.action_dim();
    const Eigen::Index B = lp.mean.rows();
    Eigen::MatrixXd upstream(B, 2 * d);
    for (Eigen::Index r = 0; r < B; ++r) {
        for (int c = 0; c < d; ++c) {
            double sd = std::exp(lp.log_std(r, c));
            double z = (lp.eval_points(r, c) - lp.mean(r, c)) / sd;
            double dlp_dmean = z / sd;
            double dlp_dlogstd = z * z - 1.0;
            if (lp.raw_log_std(r, c) < kLogStdMin || lp.raw_log_std(r, c) > kLogStdMax)
                dlp_dlogstd = 0.0;
            upstream(r, c) = dloss_dlogp(r) * dlp_dmean;
            upstream(r, d + c) = dloss_dlogp(r) * dlp_dlogstd;
        }
    }
    return backward_batch(policy.params, policy.spec, lp.cache, upstream).param_grads;
}

Eigen::MatrixXd gauss_mean_action_batch(const GaussianPolicy& policy,
                                        const Eigen::MatrixXd& states) {
    const int d = policy.action_dim();
    Eigen::MatrixXd out = forward_batch(policy.params, policy.spec, states, ForwardMode::Eval);
    Eigen::MatrixXd mean = out.leftCols(d);
    if (policy.squash == SquashMode::Tanh) return mean.array().tanh();
    return mean.cwiseMax(-1.0).cwiseMin(1.0);
}

Eigen::VectorXd gauss_mean_action(const GaussianPolicy& policy, const Eigen::VectorXd& state) {
    Eigen::MatrixXd row = state.transpose();
    return gauss_mean_action_batch(policy, row).row(0).transpose();
}

}  // namespace clorl
