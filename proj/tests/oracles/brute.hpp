#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "clorl/dataset.hpp"

// Brute-force reference computations kept deliberately independent of the
// library's implementations.

namespace oracle {

// Every discounted suffix return, by direct double loop over
// (episode, start index).
inline std::pair<double, double> suffix_return_range(const clorl::OfflineDataset& d,
                                                     double gamma) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t e = 0; e < d.episode_starts.size(); ++e) {
        std::size_t begin = d.episode_starts[e];
        std::size_t end = (e + 1 < d.episode_starts.size()) ? d.episode_starts[e + 1] : d.n;
        for (std::size_t start = begin; start < end; ++start) {
            double g = 0.0, w = 1.0;
            for (std::size_t t = start; t < end; ++t) {
                g += w * d.rewards[t];
                w *= gamma;
            }
            lo = std::min(lo, g);
            hi = std::max(hi, g);
        }
    }
    return {lo, hi};
}

// Expected max over uniformly drawn k-subsets by full enumeration
// (feasible for n <= ~20). Doubles version.
inline double eop_enumerate(const std::vector<double>& scores, int k) {
    const int n = static_cast<int>(scores.size());
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    double total = 0.0;
    std::uint64_t count = 0;
    for (;;) {
        double mx = scores[idx[0]];
        for (int i = 1; i < k; ++i) mx = std::max(mx, scores[idx[i]]);
        total += mx;
        count += 1;
        int pos = k - 1;
        while (pos >= 0 && idx[pos] == n - k + pos) --pos;
        if (pos < 0) break;
        idx[pos] += 1;
        for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
    return total / static_cast<double>(count);
}

// Exact-integer variant: numerator = sum over subsets of max, denominator
// = C(n, k). Scores must be integers.
inline std::pair<long long, long long> eop_enumerate_exact(const std::vector<long long>& scores,
                                                           int k) {
    const int n = static_cast<int>(scores.size());
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    long long total = 0;
    long long count = 0;
    for (;;) {
        long long mx = scores[idx[0]];
        for (int i = 1; i < k; ++i) mx = std::max(mx, scores[idx[i]]);
        total += mx;
        count += 1;
        int pos = k - 1;
        while (pos >= 0 && idx[pos] == n - k + pos) --pos;
        if (pos < 0) break;
        idx[pos] += 1;
        for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
    return {total, count};
}

// The textbook Adam recursion on a flat vector, written separately from
// the library's optimizer.
struct RefAdam {
    std::vector<double> m, v;
    long long t = 0;
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit RefAdam(std::size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}

    void step(std::vector<double>& x, const std::vector<double>& g) {
        t += 1;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
            x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

}  // namespace oracle
