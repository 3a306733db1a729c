#include "clorl/sweep.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "clorl/algorithms.hpp"
#include "clorl/envs.hpp"

namespace clorl {

namespace {

std::string value_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
}

}  // namespace

SweepResult sweep(const SweepSpec& spec, const OfflineDataset& dataset,
                  const DatasetMeta& meta, const Env& env) {
    if (spec.axes.empty()) throw std::invalid_argument("sweep: no axes");
    if (spec.seeds.empty()) throw std::invalid_argument("sweep: no seeds");

    // Enumerate cells in row-major axis order.
    std::size_t n_cells = 1;
    for (const auto& [path, values] : spec.axes) {
        if (values.empty()) throw std::invalid_argument("sweep: empty axis " + path);
        n_cells *= values.size();
    }

    SweepResult result;
    result.cells.resize(n_cells);
    std::vector<RunConfig> cell_configs(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        nlohmann::json cfg_json = spec.base_config;
        nlohmann::json overrides = nlohmann::json::object();
        std::size_t rem = c;
        for (std::size_t a = spec.axes.size(); a-- > 0;) {
            const auto& [path, values] = spec.axes[a];
            const nlohmann::json& v = values[rem % values.size()];
            rem /= values.size();
            overrides[path] = v;
            apply_override(cfg_json, path + "=" + v.dump());
        }
        RunConfig cfg = parse_run_config(cfg_json);
        result.cells[c].overrides = std::move(overrides);
        result.cells[c].fingerprint = config_fingerprint(cfg);
        result.cells[c].seed_scores.assign(spec.seeds.size(),
                                           std::numeric_limits<double>::quiet_NaN());
        cell_configs[c] = std::move(cfg);
    }

    // One task per (cell, seed); results land in preassigned slots so the
    // outputs do not depend on scheduling.
    struct Task {
        std::size_t cell;
        std::size_t seed_idx;
    };
    std::vector<Task> tasks;
    tasks.reserve(n_cells * spec.seeds.size());
    for (std::size_t c = 0; c < n_cells; ++c)
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) tasks.push_back({c, s});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            RunConfig cfg = cell_configs[task.cell];
            cfg.seed = spec.seeds[task.seed_idx];
            double score = std::numeric_limits<double>::quiet_NaN();
            try {
                RunResult run = train(cfg, dataset, meta, env);
                score = run.final_score;
            } catch (const std::exception&) {
                // recorded as NaN; the sweep keeps going
            }
            result.cells[task.cell].seed_scores[task.seed_idx] = score;
        }
    };

    int n_workers = std::max(1, spec.workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t c = 0; c < n_cells; ++c)
        for (std::size_t s = 0; s < spec.seeds.size(); ++s)
            result.table.add(spec.dataset_id, result.cells[c].fingerprint, spec.seeds[s],
                             result.cells[c].seed_scores[s]);
    return result;
}

void write_scores_csv(const SweepSpec& spec, const SweepResult& result,
                      const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("sweep: cannot open " + path);
    out << "dataset,fingerprint";
    for (const auto& [axis, values] : spec.axes) out << "," << axis;
    out << ",seed,score\n";
    for (const auto& cell : result.cells) {
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
            out << spec.dataset_id << "," << fingerprint_hex(cell.fingerprint);
            for (const auto& [axis, values] : spec.axes)
                out << "," << value_to_string(cell.overrides.at(axis));
            out << "," << spec.seeds[s] << "," << format_double(cell.seed_scores[s]) << "\n";
        }
    }
}

void write_heatmap_csv(const SweepSpec& spec, const SweepResult& result,
                       const std::string& path) {
    const std::string m_axis = "classification.m";
    const std::string r_axis = "classification.sigma_zeta_ratio";
    const std::vector<nlohmann::json>* m_values = nullptr;
    const std::vector<nlohmann::json>* r_values = nullptr;
    for (const auto& [axis, values] : spec.axes) {
        if (axis == m_axis) m_values = &values;
        if (axis == r_axis) r_values = &values;
    }
    if (!m_values || !r_values)
        throw std::invalid_argument("heatmap needs classification.m and "
                                    "classification.sigma_zeta_ratio axes");

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("sweep: cannot open " + path);
    out << "m\\sigma_zeta";
    for (const auto& r : *r_values) out << "," << value_to_string(r);
    out << "\n";
    for (const auto& m : *m_values) {
        out << value_to_string(m);
        for (const auto& r : *r_values) {
            // Average final scores over seeds and any other axes.
            double sum = 0.0;
            std::size_t n = 0;
            bool saw_nan = false;
            for (const auto& cell : result.cells) {
                if (cell.overrides.at(m_axis) != m || cell.overrides.at(r_axis) != r) continue;
                for (double s : cell.seed_scores) {
                    if (std::isnan(s)) {
                        saw_nan = true;
                    } else {
                        sum += s;
                        n += 1;
                    }
                }
            }
            double value = (n == 0 || saw_nan) ? std::numeric_limits<double>::quiet_NaN()
                                               : sum / static_cast<double>(n);
            out << "," << format_double(value);
        }
        out << "\n";
    }
}

}  // namespace clorl
