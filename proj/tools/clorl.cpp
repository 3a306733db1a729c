// clorl: train and analyze offline-RL value functions with scalar (MSE)
// or categorical (cross-entropy over value bins) critic heads.
//
// Subcommands: gen-data, train, sweep, eop, inspect.
// Exit codes: 0 success, 2 configuration/usage error, 3 training
// divergence, 1 other runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clorl/algorithms.hpp"
#include "clorl/config.hpp"
#include "clorl/dataset.hpp"
#include "clorl/envs.hpp"
#include "clorl/evaluation.hpp"
#include "clorl/sweep.hpp"
#include "clorl/value_support.hpp"

namespace fs = std::filesystem;
using namespace clorl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

/// Output root: CLORL_OUT environment variable, else the working dir.
fs::path output_root() {
    if (const char* env = std::getenv("CLORL_OUT")) return fs::path(env);
    return fs::current_path();
}

fs::path resolve_out(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p;
    return output_root() / p;
}

std::string infer_env_name(const DatasetMeta& meta) {
    std::istringstream in(meta.source);
    std::string first;
    in >> first;
    return first;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON in ") + path + ": " + e.what());
    }
    return j;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (first) {
            t.header = fields;
            first = false;
        } else {
            t.rows.push_back(fields);
        }
    }
    return t;
}

int cmd_gen_data(const std::string& env_name, const std::string& behavior_name, int episodes,
                 double noise, std::uint64_t seed, double reward_scale,
                 const std::string& out_path, bool force) {
    auto env = make_env(env_name);
    Behavior behavior = behavior_from_string(behavior_name);
    fs::path out = resolve_out(out_path);
    if (fs::exists(out) && !force) {
        std::cerr << "error: " << out.string() << " already exists (use --force to overwrite)\n";
        return kExitConfig;
    }
    auto [dataset, meta] = generate_dataset(*env, behavior, episodes, noise, seed, reward_scale);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_dataset(dataset, meta, out.string());
    std::cout << "wrote " << out.string() << "\n"
              << "  transitions: " << dataset.n << " (" << dataset.episode_starts.size()
              << " episodes)\n"
              << "  obs_dim " << dataset.obs_dim << ", act_dim " << dataset.act_dim << "\n"
              << "  source: " << meta.source << "\n"
              << "  reward_scale: " << format_double(meta.reward_scale) << "\n"
              << "  random / expert Monte-Carlo return: " << format_double(meta.random_score)
              << " / " << format_double(meta.expert_score) << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& path, double gamma) {
    auto [dataset, meta] = load_dataset(path);
    std::cout << "CODS v1: " << path << "\n"
              << "  n " << dataset.n << ", obs_dim " << dataset.obs_dim << ", act_dim "
              << dataset.act_dim << ", episodes " << dataset.episode_starts.size() << "\n"
              << "  source: " << meta.source << "\n"
              << "  reward_scale " << format_double(meta.reward_scale) << ", random_score "
              << format_double(meta.random_score) << ", expert_score "
              << format_double(meta.expert_score) << "\n";
    auto [lo, hi] = support_from_dataset(dataset, gamma);
    std::cout << "  discounted suffix-return range at gamma " << format_double(gamma) << ": ["
              << format_double(lo) << ", " << format_double(hi) << "]\n";
    return kExitOk;
}

int cmd_train(const std::optional<std::string>& config_path,
              const std::vector<std::string>& overrides, bool quiet) {
    nlohmann::json cfg_json = nlohmann::json::object();
    if (config_path) cfg_json = load_json_file(*config_path);
    for (const auto& o : overrides) apply_override(cfg_json, o);

    std::vector<std::string> warnings;
    RunConfig config = parse_run_config(cfg_json, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (config.dataset_path.empty())
        throw ConfigError("no dataset given (set \"dataset\" or pass --dataset)");

    auto [dataset, meta] = load_dataset(config.dataset_path);
    std::string env_name = config.eval_env.empty() ? infer_env_name(meta) : config.eval_env;
    auto env = make_env(env_name);

    fs::path run_dir;
    TrainSinks sinks;
    if (!config.out_dir.empty()) {
        run_dir = resolve_out(config.out_dir);
        fs::create_directories(run_dir);
        sinks.log_csv = (run_dir / "log.csv").string();
        sinks.checkpoint_dir = (run_dir / "checkpoints").string();
        std::ofstream cfg_out(run_dir / "config.json");
        cfg_out << to_json(config).dump(2) << "\n";
    }

    RunResult result = train(config, dataset, meta, *env, sinks);

    nlohmann::json result_json = to_json(result);
    result_json["normalized_final_score"] = normalized_score(result.final_score, meta);
    if (!run_dir.empty()) {
        std::ofstream out(run_dir / "result.json");
        out << result_json.dump(2) << "\n";
    }
    if (!quiet) {
        std::cout << "final score " << format_double(result.final_score) << " (normalized "
                  << format_double(result_json["normalized_final_score"].get<double>())
                  << ") over " << config.n_steps << " steps\n";
        if (!run_dir.empty()) std::cout << "run directory: " << run_dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override) {
    nlohmann::json j = load_json_file(config_path);
    for (const auto& key : {"base", "grid", "seeds"})
        if (!j.contains(key))
            throw ConfigError(std::string("sweep config needs \"") + key + "\"");

    SweepSpec spec;
    spec.base_config = j.at("base");
    if (!j.at("grid").is_object() || j.at("grid").empty())
        throw ConfigError("sweep grid must be a non-empty object of path -> value list");
    for (auto it = j.at("grid").begin(); it != j.at("grid").end(); ++it) {
        if (!it.value().is_array() || it.value().empty())
            throw ConfigError("sweep grid axis " + it.key() + " must be a non-empty array");
        spec.axes.emplace_back(it.key(),
                               std::vector<nlohmann::json>(it.value().begin(), it.value().end()));
    }
    spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("workers")) spec.workers = j.at("workers").get<int>();
    if (j.contains("dataset_id")) spec.dataset_id = j.at("dataset_id").get<std::string>();

    // Validate the base config (plus each axis value) up front.
    RunConfig base = parse_run_config(spec.base_config);
    if (base.dataset_path.empty()) throw ConfigError("sweep base config needs a dataset");
    auto [dataset, meta] = load_dataset(base.dataset_path);
    std::string env_name = base.eval_env.empty() ? infer_env_name(meta) : base.eval_env;
    auto env = make_env(env_name);
    if (spec.dataset_id == "dataset")
        spec.dataset_id = fs::path(base.dataset_path).stem().string();

    std::string out_dir = out_override;
    if (out_dir.empty() && j.contains("out_dir")) out_dir = j.at("out_dir").get<std::string>();
    if (out_dir.empty()) throw ConfigError("sweep needs an output directory (-o or out_dir)");
    fs::path out = resolve_out(out_dir);
    fs::create_directories(out);

    SweepResult result = sweep(spec, dataset, meta, *env);
    write_scores_csv(spec, result, (out / "scores.csv").string());
    bool has_heatmap_axes = false;
    int with_m = 0, with_ratio = 0;
    for (const auto& [axis, values] : spec.axes) {
        if (axis == "classification.m") with_m = 1;
        if (axis == "classification.sigma_zeta_ratio") with_ratio = 1;
    }
    has_heatmap_axes = with_m && with_ratio;
    if (has_heatmap_axes)
        write_heatmap_csv(spec, result, (out / "heatmap.csv").string());

    std::size_t n_runs = result.cells.size() * spec.seeds.size();
    std::size_t n_failed = 0;
    for (const auto& cell : result.cells)
        for (double s : cell.seed_scores)
            if (std::isnan(s)) n_failed += 1;
    std::cout << "sweep: " << result.cells.size() << " cells x " << spec.seeds.size()
              << " seeds = " << n_runs << " runs, " << n_failed << " failed\n"
              << "wrote " << (out / "scores.csv").string() << "\n";
    if (has_heatmap_axes) std::cout << "wrote " << (out / "heatmap.csv").string() << "\n";
    return kExitOk;
}

int cmd_eop(const std::string& scores_path, const std::string& ks_arg,
            const std::string& out_path) {
    CsvTable t = read_csv(scores_path);
    ScoreTable table;
    int score_col = t.column("score");
    if (score_col >= 0 && t.column("dataset") >= 0 && t.column("seed") >= 0) {
        int dataset_col = t.column("dataset");
        int seed_col = t.column("seed");
        int fp_col = t.column("fingerprint");
        if (fp_col < 0) fp_col = t.column("config");
        if (fp_col < 0) throw ConfigError("scores CSV needs a fingerprint or config column");
        for (const auto& row : t.rows) {
            std::uint64_t fp = Rng::fnv1a(row[static_cast<std::size_t>(fp_col)]);
            table.add(row[static_cast<std::size_t>(dataset_col)], fp,
                      std::stoull(row[static_cast<std::size_t>(seed_col)]),
                      std::stod(row[static_cast<std::size_t>(score_col)]));
        }
    } else {
        // Plain score list: one column (optionally headed "score"); each
        // row is its own policy.
        std::uint64_t next_fp = 0;
        if (score_col < 0 && !t.header.empty()) {
            // headerless file: the "header" row is data
            table.add("scores", next_fp++, 0, std::stod(t.header[0]));
            score_col = 0;
        }
        for (const auto& row : t.rows)
            table.add("scores", next_fp++, 0,
                      std::stod(row[static_cast<std::size_t>(std::max(score_col, 0))]));
    }

    std::vector<int> ks;
    std::istringstream ks_in(ks_arg);
    std::string part;
    while (std::getline(ks_in, part, ',')) ks.push_back(std::stoi(part));
    if (ks.empty()) throw ConfigError("--ks needs at least one value");

    std::vector<std::string> datasets;
    for (const auto& [key, scores] : table.entries())
        if (datasets.empty() || datasets.back() != key.first) datasets.push_back(key.first);

    std::size_t n_policies = table.fingerprints(datasets.front()).size();
    for (int k : ks)
        if (k < 1 || static_cast<std::size_t>(k) > n_policies)
            throw ConfigError("k = " + std::to_string(k) + " is out of range for " +
                              std::to_string(n_policies) + " policies");

    auto curve = eop_curve(table, datasets, ks);
    write_eop_csv(curve, out_path);
    for (const auto& p : curve)
        std::cout << "k=" << p.k << " mean " << format_double(p.mean) << " std "
                  << format_double(p.stddev) << "\n";
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline-RL toolkit with scalar and categorical value heads"};
    app.require_subcommand(1);

    // gen-data ---------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "roll out a scripted behavior into a CODS file");
    std::string gen_env = "pointmass", gen_behavior = "expert", gen_out;
    int gen_episodes = 100;
    double gen_noise = 0.1, gen_reward_scale = 1.0;
    std::uint64_t gen_seed = 0;
    bool gen_force = false;
    gen->add_option("--env", gen_env, "environment: pointmass or chain")->capture_default_str();
    gen->add_option("--behavior", gen_behavior, "random, mediocre or expert controller")
        ->capture_default_str();
    gen->add_option("--episodes", gen_episodes, "number of episodes to roll out")
        ->capture_default_str();
    gen->add_option("--noise", gen_noise, "gaussian action noise std for the controllers")
        ->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed; output is byte-deterministic")
        ->capture_default_str();
    gen->add_option("--reward-scale", gen_reward_scale,
                    "declarative reward multiplier stored in the header and applied at load "
                    "(use 100 for sparse long-horizon tasks)")
        ->capture_default_str();
    gen->add_option("-o,--out", gen_out, "output .cods path")->required();
    gen->add_flag("--force", gen_force, "overwrite an existing file");

    // train ------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "run one training job from a JSON config");
    std::optional<std::string> tr_config;
    std::vector<std::string> tr_sets;
    std::optional<std::string> tr_algo, tr_head, tr_dataset, tr_out, tr_env;
    std::optional<int> tr_m;
    std::optional<double> tr_sigma_zeta, tr_v_expand;
    std::optional<std::int64_t> tr_steps;
    std::optional<std::uint64_t> tr_seed;
    bool tr_quiet = false;
    tr->add_option("--config", tr_config, "JSON config file (strict schema)");
    tr->add_option("--set", tr_sets, "dotted-path override, e.g. rebrac.beta1=0.05")
        ->type_name("PATH=VALUE");
    tr->add_option("--algorithm", tr_algo, "rebrac, iql or lbsac");
    tr->add_option("--head", tr_head, "critic head: mse (scalar) or ce (categorical bins)");
    tr->add_option("--m", tr_m, "bin count for the ce head (common default 101)");
    tr->add_option("--sigma-zeta", tr_sigma_zeta,
                   "gaussian width over bin width for the ce head (common default 0.75)");
    tr->add_option("--v-expand", tr_v_expand,
                   "fractional support expansion applied to the dataset return range");
    tr->add_option("--dataset", tr_dataset, "CODS dataset path");
    tr->add_option("--eval-env", tr_env, "evaluation environment (default: from the dataset)");
    tr->add_option("--seed", tr_seed, "run seed; all outputs are byte-deterministic in it");
    tr->add_option("--steps", tr_steps, "training steps");
    tr->add_option("--out", tr_out, "run directory (under CLORL_OUT when relative)");
    tr->add_flag("--quiet", tr_quiet, "suppress the final summary line");

    // sweep --------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "cartesian hyperparameter grid of training runs");
    std::string sw_config, sw_out;
    sw->add_option("--config", sw_config, "sweep JSON: {base, grid, seeds, workers?, out_dir?}")
        ->required();
    sw->add_option("-o,--out", sw_out, "output directory for scores.csv / heatmap.csv");

    // eop ----------------------------------------------------------------
    auto* ep = app.add_subcommand(
        "eop", "expected best score among k uniformly chosen policies, per k");
    std::string ep_scores, ep_ks = "1", ep_out = "eop.csv";
    ep->add_option("--scores", ep_scores,
                   "CSV of scores: either dataset,fingerprint,seed,score rows or a plain "
                   "one-column list")
        ->required();
    ep->add_option("--ks", ep_ks, "comma-separated evaluation budgets")->capture_default_str();
    ep->add_option("-o,--out", ep_out, "output CSV (k, mean, std)")->capture_default_str();

    // inspect --------------------------------------------------------------
    auto* in = app.add_subcommand("inspect", "print a CODS header and its return range");
    std::string in_path;
    double in_gamma = 0.99;
    in->add_option("file", in_path, "CODS dataset path")->required();
    in->add_option("--gamma", in_gamma, "discount for the suffix-return range")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_env, gen_behavior, gen_episodes, gen_noise, gen_seed,
                                gen_reward_scale, gen_out, gen_force);
        if (tr->parsed()) {
            std::vector<std::string> overrides;
            if (tr_algo) overrides.push_back("algorithm=\"" + *tr_algo + "\"");
            if (tr_head) overrides.push_back("head=\"" + *tr_head + "\"");
            if (tr_m) overrides.push_back("classification.m=" + std::to_string(*tr_m));
            if (tr_sigma_zeta)
                overrides.push_back("classification.sigma_zeta_ratio=" +
                                    format_double(*tr_sigma_zeta));
            if (tr_v_expand)
                overrides.push_back("classification.v_expand=" + format_double(*tr_v_expand));
            if (tr_dataset) overrides.push_back("dataset=\"" + *tr_dataset + "\"");
            if (tr_env) overrides.push_back("eval_env=\"" + *tr_env + "\"");
            if (tr_seed) overrides.push_back("seed=" + std::to_string(*tr_seed));
            if (tr_steps) overrides.push_back("n_steps=" + std::to_string(*tr_steps));
            if (tr_out) overrides.push_back("out_dir=\"" + *tr_out + "\"");
            overrides.insert(overrides.end(), tr_sets.begin(), tr_sets.end());
            return cmd_train(tr_config, overrides, tr_quiet);
        }
        if (sw->parsed()) return cmd_sweep(sw_config, sw_out);
        if (ep->parsed()) return cmd_eop(ep_scores, ep_ks, ep_out);
        if (in->parsed()) return cmd_inspect(in_path, in_gamma);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
