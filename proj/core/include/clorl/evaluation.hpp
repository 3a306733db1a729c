#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace clorl {

class Env;

using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Mean and population std of undiscounted episode returns. Initial
/// states are drawn uniformly from the state box with the given seed;
/// pass fixed_init to pin every episode to one start state.
std::pair<double, double> evaluate_policy(const Env& env, const PolicyFn& policy,
                                          int n_episodes, std::uint64_t seed,
                                          const std::optional<Eigen::VectorXd>& fixed_init = {});

struct EvalPoint {
    std::int64_t step = 0;
    double mean = 0.0;
    double stddev = 0.0;
    int n_episodes = 0;
};

struct QTracePoint {
    std::int64_t step = 0;
    double mean_q = 0.0;
};

struct RunResult {
    std::uint64_t fingerprint = 0;
    std::uint64_t seed = 0;
    std::vector<EvalPoint> evals;
    double final_score = 0.0;
    std::vector<QTracePoint> q_trace;
};

nlohmann::json to_json(const RunResult& result);

/// (dataset id, config fingerprint) -> per-seed final scores.
class ScoreTable {
public:
    struct SeedScore {
        std::uint64_t seed;
        double score;
    };
    using Key = std::pair<std::string, std::uint64_t>;

    /// Seeds must be distinct per entry.
    void add(const std::string& dataset_id, std::uint64_t fingerprint, std::uint64_t seed,
             double score);
    const std::map<Key, std::vector<SeedScore>>& entries() const { return entries_; }
    std::vector<std::uint64_t> fingerprints(const std::string& dataset_id) const;

private:
    std::map<Key, std::vector<SeedScore>> entries_;
};

/// Expected maximum of k scores drawn uniformly without replacement:
/// sort ascending, then sum s_(i) C(i-1, k-1) / C(N, k). Coefficients are
/// exact 64-bit integers, which caps N at 64.
double eop(std::vector<double> scores, int k);

struct EopPoint {
    int k = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Per-k expected online performance over a dataset group. Each bootstrap
/// replicate picks one seed's score per (dataset, config), computes the
/// EOP of the per-config scores for each dataset, and averages across the
/// group; mean and std are taken over the replicates.
std::vector<EopPoint> eop_curve(const ScoreTable& table,
                                const std::vector<std::string>& dataset_group,
                                const std::vector<int>& ks, int n_bootstrap = 200,
                                std::uint64_t seed = 0);

void write_eop_csv(const std::vector<EopPoint>& points, const std::string& path);

/// Exact C(n, k) for n <= 64 via Pascal's triangle.
std::uint64_t binomial(int n, int k);

/// Locale-independent shortest round-trip formatting, used by every CSV
/// and log writer so repeated runs emit identical bytes.
std::string format_double(double x);

}  // namespace clorl
