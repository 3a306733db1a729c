#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clorl/config.hpp"
#include "clorl/evaluation.hpp"

namespace clorl {

class Env;
struct OfflineDataset;
struct DatasetMeta;

/// Cartesian grid over dotted config paths, run per seed.
struct SweepSpec {
    nlohmann::json base_config;  // RunConfig JSON; dataset/eval fields included
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
    std::vector<std::uint64_t> seeds;
    int workers = 1;
    std::string dataset_id = "dataset";
};

struct SweepCell {
    nlohmann::json overrides;  // axis path -> value
    std::uint64_t fingerprint = 0;
    std::vector<double> seed_scores;  // NaN where a run failed
};

struct SweepResult {
    ScoreTable table;
    std::vector<SweepCell> cells;
};

/// Runs train() per cell per seed with a bounded worker pool. A failing
/// run (divergence or any error) is recorded as a NaN score; the sweep
/// itself never aborts. Output order is independent of scheduling.
SweepResult sweep(const SweepSpec& spec, const OfflineDataset& dataset,
                  const DatasetMeta& meta, const Env& env);

/// Long-format per-run scores: one row per (cell, seed).
void write_scores_csv(const SweepSpec& spec, const SweepResult& result,
                      const std::string& path);

/// Heatmap grid (rows m, columns sigma/zeta) of seed-averaged final
/// scores; requires both classification axes in the sweep.
void write_heatmap_csv(const SweepSpec& spec, const SweepResult& result,
                       const std::string& path);

}  // namespace clorl
