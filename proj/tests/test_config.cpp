#include <doctest.h>

#include "clorl/config.hpp"

using namespace clorl;

TEST_SUITE("config") {

TEST_CASE("defaults parse and validate") {
    nlohmann::json j = {{"algorithm", "iql"}, {"head", "mse"}, {"dataset", "x.cods"}};
    RunConfig c = parse_run_config(j);
    CHECK(c.algorithm == "iql");
    CHECK(c.head == HeadKind::Scalar);
    CHECK(c.iql.expectile == doctest::Approx(0.7));
    CHECK(c.iql.batch_size == 256);
    CHECK(c.lbsac.batch_size == 1024);
    CHECK(c.lbsac.learning_rate == doctest::Approx(6e-4));
    CHECK(c.rebrac.tau == doctest::Approx(5e-3));
    CHECK(c.network.hidden_dim == 256);
}

TEST_CASE("unknown keys are rejected at every level") {
    nlohmann::json top = {{"algorithm", "rebrac"}, {"bogus", 1}};
    CHECK_THROWS_AS(parse_run_config(top), ConfigError);
    nlohmann::json nested = {{"algorithm", "rebrac"},
                             {"rebrac", {{"beta1", 0.01}, {"beta_3", 0.5}}}};
    CHECK_THROWS_AS(parse_run_config(nested), ConfigError);
}

TEST_CASE("head and classification interplay") {
    SUBCASE("ce requires the classification block") {
        nlohmann::json j = {{"algorithm", "rebrac"}, {"head", "ce"}};
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
    SUBCASE("mse ignores the block with a warning") {
        nlohmann::json j = {{"algorithm", "rebrac"},
                            {"head", "mse"},
                            {"classification", {{"m", 51}}}};
        std::vector<std::string> warnings;
        RunConfig c = parse_run_config(j, &warnings);
        CHECK(c.head == HeadKind::Scalar);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("ignored") != std::string::npos);
    }
    SUBCASE("bad values fail validation") {
        nlohmann::json j = {{"algorithm", "rebrac"},
                            {"head", "ce"},
                            {"classification", {{"m", 1}}}};
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
        nlohmann::json j2 = {{"algorithm", "iql"}, {"iql", {{"expectile", 1.5}}}};
        CHECK_THROWS_AS(parse_run_config(j2), ConfigError);
    }
}

TEST_CASE("dotted overrides") {
    nlohmann::json j = {{"algorithm", "rebrac"},
                        {"head", "ce"},
                        {"classification", {{"m", 101}}}};
    apply_override(j, "classification.m=201");
    apply_override(j, "rebrac.beta1=0.05");
    apply_override(j, "eval_env=chain");
    RunConfig c = parse_run_config(j);
    CHECK(c.classification.m == 201);
    CHECK(c.rebrac.beta1 == doctest::Approx(0.05));
    CHECK(c.eval_env == "chain");
    CHECK_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("fingerprint semantics") {
    nlohmann::json j = {{"algorithm", "rebrac"},
                        {"head", "ce"},
                        {"classification", {{"m", 101}, {"sigma_zeta_ratio", 0.75}}},
                        {"dataset", "a.cods"},
                        {"seed", 0}};
    RunConfig a = parse_run_config(j);

    SUBCASE("stable under field reordering") {
        nlohmann::json reordered = {{"seed", 0},
                                    {"dataset", "a.cods"},
                                    {"classification",
                                     {{"sigma_zeta_ratio", 0.75}, {"m", 101}}},
                                    {"head", "ce"},
                                    {"algorithm", "rebrac"}};
        RunConfig b = parse_run_config(reordered);
        CHECK(config_fingerprint(a) == config_fingerprint(b));
    }
    SUBCASE("seed and paths do not participate") {
        RunConfig b = a;
        b.seed = 99;
        b.dataset_path = "elsewhere.cods";
        b.out_dir = "/tmp/x";
        CHECK(config_fingerprint(a) == config_fingerprint(b));
    }
    SUBCASE("hyperparameters do participate") {
        RunConfig b = a;
        b.classification.m = 201;
        CHECK(config_fingerprint(a) != config_fingerprint(b));
        RunConfig c = a;
        c.rebrac.beta1 *= 2;
        CHECK(config_fingerprint(a) != config_fingerprint(c));
        RunConfig d = a;
        d.head = HeadKind::Scalar;
        CHECK(config_fingerprint(a) != config_fingerprint(d));
    }
    SUBCASE("inactive algorithm blocks are excluded") {
        RunConfig b = a;
        b.iql.expectile = 0.9;  // rebrac run; iql block is dormant
        CHECK(config_fingerprint(a) == config_fingerprint(b));
    }
    SUBCASE("classification block only counts under the ce head") {
        RunConfig x = a;
        x.head = HeadKind::Scalar;
        RunConfig y = x;
        y.classification.m = 401;
        CHECK(config_fingerprint(x) == config_fingerprint(y));
    }
}

TEST_CASE("round trip through canonical json") {
    nlohmann::json j = {{"algorithm", "lbsac"},
                        {"head", "ce"},
                        {"classification", {{"m", 51}, {"v_expand", 0.1}}},
                        {"lbsac", {{"n_critics", 5}}},
                        {"n_steps", 777}};
    RunConfig c = parse_run_config(j);
    RunConfig c2 = parse_run_config(to_json(c));
    CHECK(to_json(c).dump() == to_json(c2).dump());
    CHECK(config_fingerprint(c) == config_fingerprint(c2));
}

}  // TEST_SUITE
