#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clorl/value_support.hpp"

namespace clorl {

/// Raised by config parsing and validation; the CLI maps it to its
/// config-error exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class HeadKind { Scalar, Categorical };

/// Categorical-head geometry knobs. The support range itself comes from
/// the dataset (min/max discounted suffix return), optionally expanded.
struct ClassificationConfig {
    int m = 101;
    double sigma_zeta_ratio = 0.75;
    double v_expand = 0.0;
    ExpandStrategy::Kind expand_strategy = ExpandStrategy::Kind::Both;
};

struct NetworkConfig {
    int hidden_dim = 256;
    int n_hidden_layers = 2;
};

struct RebracConfig {
    double beta1 = 0.001;  // actor BC penalty weight
    double beta2 = 0.1;    // critic BC penalty weight
    double policy_noise = 0.2;
    double noise_clip = 0.5;
    double tau = 5e-3;
    double gamma = 0.99;
    bool normalize_q = true;
    int batch_size = 256;
    double learning_rate = 1e-3;
    int actor_update_period = 2;

    void validate() const;
};

struct IqlConfig {
    double expectile = 0.7;  // weight on positive residuals
    double inv_temperature = 3.0;
    double adv_clip = 100.0;
    double tau = 5e-3;
    double gamma = 0.99;
    int batch_size = 256;
    double learning_rate = 3e-4;
    std::int64_t cosine_total_steps = 0;  // 0: use the run's n_steps
    double dropout_rate = 0.0;            // actor and value networks

    void validate() const;
};

struct LbSacConfig {
    int n_critics = 2;
    double tau = 5e-3;
    double gamma = 0.99;
    int batch_size = 1024;
    double learning_rate = 6e-4;
    double target_entropy = 0.0;  // 0: defaults to -action_dim at setup
    double alpha_lr = 6e-4;
    double init_alpha = 1.0;

    void validate() const;
};

struct RunConfig {
    std::string algorithm = "rebrac";  // rebrac | iql | lbsac
    HeadKind head = HeadKind::Scalar;
    ClassificationConfig classification;
    NetworkConfig network;
    RebracConfig rebrac;
    IqlConfig iql;
    LbSacConfig lbsac;

    std::string dataset_path;
    std::string eval_env;  // empty: inferred from the dataset source field
    std::uint64_t seed = 0;
    std::int64_t n_steps = 10000;
    std::int64_t eval_every = 1000;
    int eval_episodes = 10;
    std::string out_dir;

    double gamma() const;
    double algo_tau() const;
    int batch_size() const;

    void validate() const;
};

/// Strict parse: unknown keys anywhere are rejected. Present fields
/// override defaults. Returns warnings (e.g. an ignored classification
/// block under the mse head).
RunConfig parse_run_config(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);
RunConfig load_run_config(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Canonical JSON of the full config (sorted keys, round-trippable).
nlohmann::json to_json(const RunConfig& config);

/// Apply a `dotted.path=value` override; value parses as JSON with a
/// string fallback.
void apply_override(nlohmann::json& config_json, const std::string& assignment);

/// FNV-1a over the canonical serialization of everything that identifies
/// the experiment cell: algorithm, head, classification, network, the
/// active algorithm block, and n_steps. Seeds, paths and logging cadence
/// do not participate, so one fingerprint maps to many seeds.
std::uint64_t config_fingerprint(const RunConfig& config);
std::string fingerprint_hex(std::uint64_t fp);

HeadKind head_from_string(const std::string& s);
std::string to_string(HeadKind head);
ExpandStrategy::Kind expand_kind_from_string(const std::string& s);
std::string to_string(ExpandStrategy::Kind kind);

}  // namespace clorl
