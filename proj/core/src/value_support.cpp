#include "clorl/value_support.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clorl/dataset.hpp"

namespace clorl {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

ValueSupport build_support(double v_min, double v_max, int m) {
    if (!(v_max > v_min))
        throw std::invalid_argument("build_support: v_max must exceed v_min");
    if (m < 2)
        throw std::invalid_argument("build_support: need at least 2 bins");

    ValueSupport s;
    s.m = m;
    s.v_min = v_min;
    s.v_max = v_max;
    s.zeta = (v_max - v_min) / m;
    s.edges.resize(m + 1);
    for (int i = 0; i <= m; ++i)
        s.edges[i] = v_min + (v_max - v_min) * (static_cast<double>(i) / m);
    s.edges[0] = v_min;
    s.edges[m] = v_max;
    return s;
}

HlGaussParams make_hl_gauss_params(const ValueSupport& support, double sigma_zeta_ratio) {
    if (!(sigma_zeta_ratio > 0.0))
        throw std::invalid_argument("make_hl_gauss_params: sigma/zeta ratio must be positive");
    HlGaussParams p;
    p.sigma_zeta_ratio = sigma_zeta_ratio;
    p.sigma = sigma_zeta_ratio * support.zeta;
    return p;
}

std::pair<double, double> expand_support(double v_min, double v_max,
                                         const ExpandStrategy& strategy) {
    if (!(v_max > v_min))
        throw std::invalid_argument("expand_support: v_max must exceed v_min");
    double range = v_max - v_min;
    double lo = v_min, hi = v_max;
    switch (strategy.kind) {
    case ExpandStrategy::Kind::Min:
        lo = v_min - strategy.v_expand * range;
        break;
    case ExpandStrategy::Kind::Both:
        lo = v_min - strategy.v_expand * range / 2.0;
        hi = v_max + strategy.v_expand * range / 2.0;
        break;
    }
    if (!(hi > lo))
        throw std::invalid_argument("expand_support: expansion collapsed the range");
    return {lo, hi};
}

std::vector<double> target_to_probs(double target, const ValueSupport& support,
                                    const HlGaussParams& params) {
    const int m = support.m;
    const double denom = kSqrt2 * params.sigma;
    std::vector<double> cdf(m + 1);
    for (int i = 0; i <= m; ++i)
        cdf[i] = std::erf((support.edges[i] - target) / denom);
    const double z = cdf[m] - cdf[0];
    std::vector<double> probs(m);
    for (int i = 0; i < m; ++i)
        probs[i] = (cdf[i + 1] - cdf[i]) / (z + 1e-6);
    return probs;
}

double probs_to_value(const std::vector<double>& probs, const ValueSupport& support) {
    if (static_cast<int>(probs.size()) != support.m)
        throw std::invalid_argument("probs_to_value: vector length does not match bin count");
    double value = 0.0;
    for (int i = 0; i < support.m; ++i)
        value += probs[i] * support.center(i);
    return value;
}

CeLossGrad ce_loss_and_grad(const std::vector<double>& logits,
                            const std::vector<double>& target_probs) {
    if (logits.size() != target_probs.size())
        throw std::invalid_argument("ce_loss_and_grad: size mismatch");
    for (double x : logits)
        if (!std::isfinite(x))
            throw std::invalid_argument("ce_loss_and_grad: non-finite logit");

    const std::size_t n = logits.size();
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum_exp = 0.0;
    for (double x : logits) sum_exp += std::exp(x - max_logit);
    const double log_sum_exp = max_logit + std::log(sum_exp);

    CeLossGrad out;
    out.grad_logits.resize(n);
    double target_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.loss -= target_probs[i] * (logits[i] - log_sum_exp);
        target_mass += target_probs[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        double softmax_i = std::exp(logits[i] - log_sum_exp);
        out.grad_logits[i] = target_mass * softmax_i - target_probs[i];
    }
    return out;
}

std::pair<double, double> support_from_dataset(const OfflineDataset& dataset, double gamma) {
    if (dataset.n == 0)
        throw std::invalid_argument("support_from_dataset: empty dataset");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    const auto& starts = dataset.episode_starts;
    for (std::size_t e = 0; e < starts.size(); ++e) {
        std::size_t begin = starts[e];
        std::size_t end = (e + 1 < starts.size()) ? starts[e + 1] : dataset.n;
        // Suffix returns run to the trajectory's end with no bootstrap
        // term; timeout truncations count the same as terminals.
        for (std::size_t start = begin; start < end; ++start) {
            double suffix = 0.0, weight = 1.0;
            for (std::size_t t = start; t < end; ++t) {
                suffix += weight * dataset.rewards[t];
                weight *= gamma;
            }
            lo = std::min(lo, suffix);
            hi = std::max(hi, suffix);
        }
    }
    return {lo, hi};
}

}  // namespace clorl
