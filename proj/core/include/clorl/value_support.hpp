#pragma once

#include <utility>
#include <vector>

namespace clorl {

struct OfflineDataset;

/// Uniform bin grid [v_min, v_max] carved into m bins of width zeta.
/// Bin centers are the edge midpoints; a categorical value head places
/// one logit per bin.
struct ValueSupport {
    std::vector<double> edges;  // m+1 strictly increasing edges
    int m = 0;
    double zeta = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;

    double center(int i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

/// Gaussian smoothing width for mapping scalar targets onto bins,
/// expressed as the ratio sigma/zeta (0.75 is the usual default).
struct HlGaussParams {
    double sigma_zeta_ratio = 0.75;
    double sigma = 0.0;  // sigma_zeta_ratio * zeta, in return units
};

HlGaussParams make_hl_gauss_params(const ValueSupport& support, double sigma_zeta_ratio);

/// How to widen (or shrink) a dataset-derived value range before building
/// the support. Min moves only the lower bound; Both splits the adjustment
/// across the two bounds, halved so both variants keep the same bin width.
struct ExpandStrategy {
    enum class Kind { Min, Both };
    Kind kind = Kind::Both;
    double v_expand = 0.0;  // fraction of (v_max - v_min), may be negative
};

ValueSupport build_support(double v_min, double v_max, int m);

std::pair<double, double> expand_support(double v_min, double v_max,
                                         const ExpandStrategy& strategy);

/// Spread a scalar target over the bins with a Gaussian of std sigma.
/// probs[i] = (erf_i+1 - erf_i) / (z + 1e-6) where erf_i is evaluated at
/// (edges[i] - target) / (sqrt(2) sigma) and z spans the whole support.
/// Targets far outside the support yield a near-zero vector; they are
/// intentionally not clamped, since pessimism penalties can push TD
/// targets below v_min.
std::vector<double> target_to_probs(double target, const ValueSupport& support,
                                    const HlGaussParams& params);

/// Expected value of a bin distribution: sum of probs[i] * center_i.
double probs_to_value(const std::vector<double>& probs, const ValueSupport& support);

/// Cross-entropy of softmax(logits) against a (possibly sub-normalized)
/// target histogram, with its exact gradient. loss = -sum t_i log p_i;
/// grad = (sum_i t_i) * softmax - t, which reduces to the familiar
/// softmax - t when the targets sum to one.
struct CeLossGrad {
    double loss = 0.0;
    std::vector<double> grad_logits;
};
CeLossGrad ce_loss_and_grad(const std::vector<double>& logits,
                            const std::vector<double>& target_probs);

/// Min and max over all discounted suffix returns in the dataset: for
/// every trajectory and every start index, the return accumulated to the
/// trajectory's end with no bootstrap term.
std::pair<double, double> support_from_dataset(const OfflineDataset& dataset, double gamma);

}  // namespace clorl
