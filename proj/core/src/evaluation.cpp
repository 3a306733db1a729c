#include "clorl/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "clorl/envs.hpp"
#include "clorl/rng.hpp"

namespace clorl {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::pair<double, double> evaluate_policy(const Env& env, const PolicyFn& policy,
                                          int n_episodes, std::uint64_t seed,
                                          const std::optional<Eigen::VectorXd>& fixed_init) {
    if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
    Rng rng(seed);
    Rng init_rng = rng.split("eval_init");

    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        Eigen::VectorXd s = fixed_init ? *fixed_init : env.initial_state(init_rng);
        double ret = 0.0;
        for (int t = 0; t < env.horizon(); ++t) {
            StepResult r = step(env, s, policy(s), t);
            ret += r.reward;
            s = r.next_state;
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    double mean = sum / n_episodes;
    double var = std::max(0.0, sum_sq / n_episodes - mean * mean);
    return {mean, std::sqrt(var)};
}

nlohmann::json to_json(const RunResult& r) {
    nlohmann::json j;
    char fp[17];
    std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(r.fingerprint));
    j["fingerprint"] = fp;
    j["seed"] = r.seed;
    j["final_score"] = r.final_score;
    j["evals"] = nlohmann::json::array();
    for (const auto& e : r.evals)
        j["evals"].push_back({{"step", e.step},
                              {"mean", e.mean},
                              {"std", e.stddev},
                              {"episodes", e.n_episodes}});
    j["q_trace"] = nlohmann::json::array();
    for (const auto& q : r.q_trace)
        j["q_trace"].push_back({{"step", q.step}, {"mean_q", q.mean_q}});
    return j;
}

void ScoreTable::add(const std::string& dataset_id, std::uint64_t fingerprint,
                     std::uint64_t seed, double score) {
    auto& list = entries_[{dataset_id, fingerprint}];
    for (const auto& s : list)
        if (s.seed == seed)
            throw std::invalid_argument("ScoreTable: duplicate seed for one entry");
    list.push_back({seed, score});
}

std::vector<std::uint64_t> ScoreTable::fingerprints(const std::string& dataset_id) const {
    std::vector<std::uint64_t> out;
    for (const auto& [key, scores] : entries_)
        if (key.first == dataset_id) out.push_back(key.second);
    return out;
}

std::uint64_t binomial(int n, int k) {
    if (n < 0 || k < 0 || k > n) return 0;
    if (n > 64) throw std::invalid_argument("binomial: exact integer range is n <= 64");
    // Pascal's triangle; every entry for n <= 64 fits in 64 bits.
    static const auto table = [] {
        std::vector<std::vector<std::uint64_t>> t(65);
        for (int i = 0; i <= 64; ++i) {
            t[i].resize(i + 1, 1);
            for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
        }
        return t;
    }();
    return table[n][k];
}

double eop(std::vector<double> scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (n == 0) throw std::invalid_argument("eop: empty score list");
    if (k < 1 || k > n) throw std::invalid_argument("eop: k out of range");
    if (n > 64) throw std::invalid_argument("eop: more than 64 scores");
    std::sort(scores.begin(), scores.end());
    const double denom = static_cast<double>(binomial(n, k));
    double total = 0.0;
    for (int i = k; i <= n; ++i)
        total += scores[i - 1] * (static_cast<double>(binomial(i - 1, k - 1)) / denom);
    return total;
}

std::vector<EopPoint> eop_curve(const ScoreTable& table,
                                const std::vector<std::string>& dataset_group,
                                const std::vector<int>& ks, int n_bootstrap,
                                std::uint64_t seed) {
    if (dataset_group.empty()) throw std::invalid_argument("eop_curve: empty dataset group");

    // Per dataset: the per-config seed-score lists, in fingerprint order.
    struct DatasetScores {
        std::vector<std::vector<ScoreTable::SeedScore>> configs;
    };
    std::vector<DatasetScores> group;
    for (const auto& id : dataset_group) {
        DatasetScores ds;
        for (const auto& fp : table.fingerprints(id))
            ds.configs.push_back(table.entries().at({id, fp}));
        if (ds.configs.empty())
            throw std::invalid_argument("eop_curve: dataset has no scores: " + id);
        group.push_back(std::move(ds));
    }

    bool single_seed = true;
    for (const auto& ds : group)
        for (const auto& seeds : ds.configs)
            if (seeds.size() > 1) single_seed = false;

    std::vector<EopPoint> out;
    for (int k : ks) {
        if (single_seed) {
            // Every bootstrap replicate would pick the same scores; the
            // curve degenerates to the exact closed form with zero spread.
            double group_mean = 0.0;
            for (const auto& ds : group) {
                std::vector<double> per_config;
                per_config.reserve(ds.configs.size());
                for (const auto& seeds : ds.configs) per_config.push_back(seeds[0].score);
                group_mean += eop(per_config, k);
            }
            out.push_back({k, group_mean / static_cast<double>(group.size()), 0.0});
            continue;
        }
        Rng rng(seed);
        Rng pick = rng.split("eop_bootstrap");
        double sum = 0.0, sum_sq = 0.0;
        for (int b = 0; b < n_bootstrap; ++b) {
            double group_mean = 0.0;
            for (const auto& ds : group) {
                std::vector<double> per_config;
                per_config.reserve(ds.configs.size());
                for (const auto& seeds : ds.configs) {
                    std::size_t pick_idx =
                        seeds.size() == 1 ? 0 : static_cast<std::size_t>(pick.uniform_index(seeds.size()));
                    per_config.push_back(seeds[pick_idx].score);
                }
                group_mean += eop(per_config, k);
            }
            group_mean /= static_cast<double>(group.size());
            sum += group_mean;
            sum_sq += group_mean * group_mean;
        }
        double mean = sum / n_bootstrap;
        double var = std::max(0.0, sum_sq / n_bootstrap - mean * mean);
        out.push_back({k, mean, std::sqrt(var)});
    }
    return out;
}

void write_eop_csv(const std::vector<EopPoint>& points, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("eop: cannot open for writing: " + path);
    out << "k,mean,std\n";
    for (const auto& p : points)
        out << p.k << "," << format_double(p.mean) << "," << format_double(p.stddev) << "\n";
}

}  // namespace clorl
