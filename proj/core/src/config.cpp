#include "clorl/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace clorl {

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config: bad value type for \"") + key + "\"");
        }
    }
}

}  // namespace

void RebracConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("rebrac: gamma must be in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("rebrac: tau must be in (0, 1]");
    if (noise_clip < 0.0) throw ConfigError("rebrac: noise_clip must be >= 0");
    if (beta1 < 0.0 || beta2 < 0.0) throw ConfigError("rebrac: penalty weights must be >= 0");
    if (batch_size < 1) throw ConfigError("rebrac: batch_size must be >= 1");
    if (actor_update_period < 1) throw ConfigError("rebrac: actor_update_period must be >= 1");
}

void IqlConfig::validate() const {
    if (!(expectile > 0.0 && expectile < 1.0)) throw ConfigError("iql: expectile must be in (0, 1)");
    if (!(inv_temperature > 0.0)) throw ConfigError("iql: inv_temperature must be > 0");
    if (!(adv_clip > 0.0)) throw ConfigError("iql: adv_clip must be > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("iql: gamma must be in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("iql: tau must be in (0, 1]");
    if (batch_size < 1) throw ConfigError("iql: batch_size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("iql: dropout_rate must be in [0, 1)");
}

void LbSacConfig::validate() const {
    if (n_critics < 2) throw ConfigError("lbsac: n_critics must be >= 2");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("lbsac: gamma must be in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("lbsac: tau must be in (0, 1]");
    if (batch_size < 1) throw ConfigError("lbsac: batch_size must be >= 1");
    if (!(init_alpha > 0.0)) throw ConfigError("lbsac: init_alpha must be > 0");
}

double RunConfig::gamma() const {
    if (algorithm == "rebrac") return rebrac.gamma;
    if (algorithm == "iql") return iql.gamma;
    return lbsac.gamma;
}

double RunConfig::algo_tau() const {
    if (algorithm == "rebrac") return rebrac.tau;
    if (algorithm == "iql") return iql.tau;
    return lbsac.tau;
}

int RunConfig::batch_size() const {
    if (algorithm == "rebrac") return rebrac.batch_size;
    if (algorithm == "iql") return iql.batch_size;
    return lbsac.batch_size;
}

void RunConfig::validate() const {
    if (algorithm != "rebrac" && algorithm != "iql" && algorithm != "lbsac")
        throw ConfigError("config: algorithm must be rebrac, iql or lbsac");
    if (head == HeadKind::Categorical) {
        if (classification.m < 2) throw ConfigError("config: classification.m must be >= 2");
        if (!(classification.sigma_zeta_ratio > 0.0))
            throw ConfigError("config: classification.sigma_zeta_ratio must be > 0");
    }
    if (network.hidden_dim < 1 || network.n_hidden_layers < 0)
        throw ConfigError("config: bad network shape");
    if (n_steps < 0) throw ConfigError("config: n_steps must be >= 0");
    if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
    if (eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    rebrac.validate();
    iql.validate();
    lbsac.validate();
}

HeadKind head_from_string(const std::string& s) {
    if (s == "mse") return HeadKind::Scalar;
    if (s == "ce") return HeadKind::Categorical;
    throw ConfigError("config: head must be \"mse\" or \"ce\"");
}

std::string to_string(HeadKind head) {
    return head == HeadKind::Scalar ? "mse" : "ce";
}

ExpandStrategy::Kind expand_kind_from_string(const std::string& s) {
    if (s == "min") return ExpandStrategy::Kind::Min;
    if (s == "both") return ExpandStrategy::Kind::Both;
    throw ConfigError("config: expand_strategy must be \"min\" or \"both\"");
}

std::string to_string(ExpandStrategy::Kind kind) {
    return kind == ExpandStrategy::Kind::Min ? "min" : "both";
}

RunConfig parse_run_config(const nlohmann::json& j, std::vector<std::string>* warnings) {
    require_keys(j, {"algorithm", "head", "classification", "network", "rebrac", "iql", "lbsac",
                     "dataset", "eval_env", "seed", "n_steps", "eval_every", "eval_episodes",
                     "out_dir"},
                 "top level");
    RunConfig c;
    get_if(j, "algorithm", c.algorithm);
    if (j.contains("head")) c.head = head_from_string(j.at("head").get<std::string>());

    if (j.contains("classification")) {
        const auto& cls = j.at("classification");
        require_keys(cls, {"m", "sigma_zeta_ratio", "v_expand", "expand_strategy"},
                     "classification");
        get_if(cls, "m", c.classification.m);
        get_if(cls, "sigma_zeta_ratio", c.classification.sigma_zeta_ratio);
        get_if(cls, "v_expand", c.classification.v_expand);
        if (cls.contains("expand_strategy"))
            c.classification.expand_strategy =
                expand_kind_from_string(cls.at("expand_strategy").get<std::string>());
        if (c.head == HeadKind::Scalar && warnings)
            warnings->push_back("classification block is ignored under the mse head");
    } else if (c.head == HeadKind::Categorical) {
        throw ConfigError("config: the ce head requires a classification block");
    }

    if (j.contains("network")) {
        const auto& net = j.at("network");
        require_keys(net, {"hidden_dim", "n_hidden_layers"}, "network");
        get_if(net, "hidden_dim", c.network.hidden_dim);
        get_if(net, "n_hidden_layers", c.network.n_hidden_layers);
    }

    if (j.contains("rebrac")) {
        const auto& a = j.at("rebrac");
        require_keys(a,
                     {"beta1", "beta2", "policy_noise", "noise_clip", "tau", "gamma",
                      "normalize_q", "batch_size", "learning_rate", "actor_update_period"},
                     "rebrac");
        get_if(a, "beta1", c.rebrac.beta1);
        get_if(a, "beta2", c.rebrac.beta2);
        get_if(a, "policy_noise", c.rebrac.policy_noise);
        get_if(a, "noise_clip", c.rebrac.noise_clip);
        get_if(a, "tau", c.rebrac.tau);
        get_if(a, "gamma", c.rebrac.gamma);
        get_if(a, "normalize_q", c.rebrac.normalize_q);
        get_if(a, "batch_size", c.rebrac.batch_size);
        get_if(a, "learning_rate", c.rebrac.learning_rate);
        get_if(a, "actor_update_period", c.rebrac.actor_update_period);
    }
    if (j.contains("iql")) {
        const auto& a = j.at("iql");
        require_keys(a,
                     {"expectile", "inv_temperature", "adv_clip", "tau", "gamma", "batch_size",
                      "learning_rate", "cosine_total_steps", "dropout_rate"},
                     "iql");
        get_if(a, "expectile", c.iql.expectile);
        get_if(a, "inv_temperature", c.iql.inv_temperature);
        get_if(a, "adv_clip", c.iql.adv_clip);
        get_if(a, "tau", c.iql.tau);
        get_if(a, "gamma", c.iql.gamma);
        get_if(a, "batch_size", c.iql.batch_size);
        get_if(a, "learning_rate", c.iql.learning_rate);
        get_if(a, "cosine_total_steps", c.iql.cosine_total_steps);
        get_if(a, "dropout_rate", c.iql.dropout_rate);
    }
    if (j.contains("lbsac")) {
        const auto& a = j.at("lbsac");
        require_keys(a,
                     {"n_critics", "tau", "gamma", "batch_size", "learning_rate",
                      "target_entropy", "alpha_lr", "init_alpha"},
                     "lbsac");
        get_if(a, "n_critics", c.lbsac.n_critics);
        get_if(a, "tau", c.lbsac.tau);
        get_if(a, "gamma", c.lbsac.gamma);
        get_if(a, "batch_size", c.lbsac.batch_size);
        get_if(a, "learning_rate", c.lbsac.learning_rate);
        get_if(a, "target_entropy", c.lbsac.target_entropy);
        get_if(a, "alpha_lr", c.lbsac.alpha_lr);
        get_if(a, "init_alpha", c.lbsac.init_alpha);
    }

    get_if(j, "dataset", c.dataset_path);
    get_if(j, "eval_env", c.eval_env);
    get_if(j, "seed", c.seed);
    get_if(j, "n_steps", c.n_steps);
    get_if(j, "eval_every", c.eval_every);
    get_if(j, "eval_episodes", c.eval_episodes);
    get_if(j, "out_dir", c.out_dir);

    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_run_config(j, warnings);
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["algorithm"] = c.algorithm;
    j["head"] = to_string(c.head);
    j["classification"] = {{"m", c.classification.m},
                           {"sigma_zeta_ratio", c.classification.sigma_zeta_ratio},
                           {"v_expand", c.classification.v_expand},
                           {"expand_strategy", to_string(c.classification.expand_strategy)}};
    j["network"] = {{"hidden_dim", c.network.hidden_dim},
                    {"n_hidden_layers", c.network.n_hidden_layers}};
    j["rebrac"] = {{"beta1", c.rebrac.beta1},
                   {"beta2", c.rebrac.beta2},
                   {"policy_noise", c.rebrac.policy_noise},
                   {"noise_clip", c.rebrac.noise_clip},
                   {"tau", c.rebrac.tau},
                   {"gamma", c.rebrac.gamma},
                   {"normalize_q", c.rebrac.normalize_q},
                   {"batch_size", c.rebrac.batch_size},
                   {"learning_rate", c.rebrac.learning_rate},
                   {"actor_update_period", c.rebrac.actor_update_period}};
    j["iql"] = {{"expectile", c.iql.expectile},
                {"inv_temperature", c.iql.inv_temperature},
                {"adv_clip", c.iql.adv_clip},
                {"tau", c.iql.tau},
                {"gamma", c.iql.gamma},
                {"batch_size", c.iql.batch_size},
                {"learning_rate", c.iql.learning_rate},
                {"cosine_total_steps", c.iql.cosine_total_steps},
                {"dropout_rate", c.iql.dropout_rate}};
    j["lbsac"] = {{"n_critics", c.lbsac.n_critics},
                  {"tau", c.lbsac.tau},
                  {"gamma", c.lbsac.gamma},
                  {"batch_size", c.lbsac.batch_size},
                  {"learning_rate", c.lbsac.learning_rate},
                  {"target_entropy", c.lbsac.target_entropy},
                  {"alpha_lr", c.lbsac.alpha_lr},
                  {"init_alpha", c.lbsac.init_alpha}};
    j["dataset"] = c.dataset_path;
    j["eval_env"] = c.eval_env;
    j["seed"] = c.seed;
    j["n_steps"] = c.n_steps;
    j["eval_every"] = c.eval_every;
    j["eval_episodes"] = c.eval_episodes;
    j["out_dir"] = c.out_dir;
    return j;
}

void apply_override(nlohmann::json& config_json, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like dotted.path=value: " + assignment);
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    std::string pointer = "/";
    for (char ch : path) pointer += ch == '.' ? '/' : ch;

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // plain string
    }
    config_json[nlohmann::json::json_pointer(pointer)] = parsed;
}

std::uint64_t config_fingerprint(const RunConfig& c) {
    nlohmann::json full = to_json(c);
    nlohmann::json cell;
    cell["algorithm"] = full["algorithm"];
    cell["head"] = full["head"];
    if (c.head == HeadKind::Categorical) cell["classification"] = full["classification"];
    cell["network"] = full["network"];
    cell[c.algorithm] = full[c.algorithm];
    cell["n_steps"] = full["n_steps"];
    std::string canon = cell.dump();

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
    return std::string(buf);
}

}  // namespace clorl
