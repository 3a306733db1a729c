#include <benchmark/benchmark.h>

#include "clorl/algorithms.hpp"
#include "clorl/envs.hpp"

using namespace clorl;

namespace {

struct Fixture {
    OfflineDataset dataset;
    DatasetMeta meta;

    Fixture() {
        PointMass2D env;
        std::tie(dataset, meta) = generate_dataset(env, Behavior::Expert, 20, 0.2, 1);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

RunConfig bench_config(const char* algo, HeadKind head, int hidden) {
    RunConfig c;
    c.algorithm = algo;
    c.head = head;
    c.classification = {101, 0.75, 0.1, ExpandStrategy::Kind::Both};
    c.network = {hidden, 2};
    c.rebrac.batch_size = 64;
    c.iql.batch_size = 64;
    c.lbsac.batch_size = 64;
    return c;
}

}  // namespace

static void BM_MlpForwardBatch(benchmark::State& state) {
    MlpSpec spec{6, static_cast<int>(state.range(0)), 2, 101};
    Rng rng(1);
    ParamSet p = init_params(spec, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(64, 6);
    for (auto _ : state) {
        Eigen::MatrixXd out = forward_batch(p, spec, x, ForwardMode::Eval);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MlpForwardBatch)->Arg(48)->Arg(256);

static void BM_MlpForwardBackwardBatch(benchmark::State& state) {
    MlpSpec spec{6, static_cast<int>(state.range(0)), 2, 101};
    Rng rng(1);
    ParamSet p = init_params(spec, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(64, 6);
    Eigen::MatrixXd upstream = Eigen::MatrixXd::Random(64, 101);
    for (auto _ : state) {
        ForwardCache cache;
        forward_batch(p, spec, x, ForwardMode::Eval, nullptr, &cache);
        BackwardResult back = backward_batch(p, spec, cache, upstream);
        benchmark::DoNotOptimize(back.param_grads.weights.data());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MlpForwardBackwardBatch)->Arg(48)->Arg(256);

static void BM_RebracStep(benchmark::State& state) {
    auto& f = fixture();
    HeadKind head = state.range(0) ? HeadKind::Categorical : HeadKind::Scalar;
    RunConfig cfg = bench_config("rebrac", head, 48);
    PointMass2D env;
    CriticHead critic_head = make_head(cfg.head, cfg.classification, f.dataset, cfg.gamma());
    Rng init(2);
    RebracState s = make_rebrac(cfg, critic_head, env.obs_dim(), env.act_dim(), init);
    Rng sample_rng(3), noise_rng(4);
    std::int64_t t = 0;
    for (auto _ : state) {
        Batch b = sample_batch(f.dataset, 64, sample_rng);
        UpdateDiagnostics d = rebrac_critic_update(s, b, noise_rng);
        if (++t % 2 == 0) rebrac_actor_update(s, b);
        benchmark::DoNotOptimize(d.critic_loss);
    }
    state.SetItemsProcessed(state.iterations());
    state.SetLabel(head == HeadKind::Scalar ? "mse" : "ce");
}
BENCHMARK(BM_RebracStep)->Arg(0)->Arg(1);

static void BM_LbSacStep(benchmark::State& state) {
    auto& f = fixture();
    HeadKind head = state.range(0) ? HeadKind::Categorical : HeadKind::Scalar;
    RunConfig cfg = bench_config("lbsac", head, 48);
    cfg.lbsac.n_critics = 4;
    PointMass2D env;
    CriticHead critic_head = make_head(cfg.head, cfg.classification, f.dataset, cfg.gamma());
    Rng init(2);
    LbSacState s = make_lbsac(cfg, critic_head, env.obs_dim(), env.act_dim(), init);
    Rng sample_rng(3), stream(4);
    for (auto _ : state) {
        Batch b = sample_batch(f.dataset, 64, sample_rng);
        UpdateDiagnostics d = lbsac_updates(s, b, stream);
        benchmark::DoNotOptimize(d.critic_loss);
    }
    state.SetItemsProcessed(state.iterations());
    state.SetLabel(head == HeadKind::Scalar ? "mse" : "ce");
}
BENCHMARK(BM_LbSacStep)->Arg(0)->Arg(1);
