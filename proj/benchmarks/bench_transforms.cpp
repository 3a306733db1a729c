#include <benchmark/benchmark.h>

#include "clorl/dataset.hpp"
#include "clorl/rng.hpp"
#include "clorl/value_support.hpp"

using namespace clorl;

static void BM_TargetToProbs(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    ValueSupport support = build_support(-10.0, 30.0, m);
    HlGaussParams params = make_hl_gauss_params(support, 0.75);
    Rng rng(1);
    double t = rng.uniform(-10.0, 30.0);
    for (auto _ : state) {
        auto probs = target_to_probs(t, support, params);
        benchmark::DoNotOptimize(probs.data());
        t = -10.0 + (t + 17.3) * 0.5;  // wander inside the support
        if (t > 30.0 || t < -10.0) t = 3.0;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TargetToProbs)->Arg(21)->Arg(101)->Arg(401);

static void BM_ProbsToValue(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    ValueSupport support = build_support(-10.0, 30.0, m);
    HlGaussParams params = make_hl_gauss_params(support, 0.75);
    auto probs = target_to_probs(4.2, support, params);
    for (auto _ : state) {
        double v = probs_to_value(probs, support);
        benchmark::DoNotOptimize(v);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ProbsToValue)->Arg(101)->Arg(401);

static void BM_CeLossAndGrad(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    ValueSupport support = build_support(-10.0, 30.0, m);
    HlGaussParams params = make_hl_gauss_params(support, 0.75);
    auto target = target_to_probs(4.2, support, params);
    Rng rng(2);
    std::vector<double> logits(m);
    for (double& x : logits) x = rng.uniform(-2.0, 2.0);
    for (auto _ : state) {
        auto out = ce_loss_and_grad(logits, target);
        benchmark::DoNotOptimize(out.loss);
        benchmark::DoNotOptimize(out.grad_logits.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CeLossAndGrad)->Arg(101)->Arg(401);

static void BM_SupportFromDataset(benchmark::State& state) {
    // Suffix-return scan over a mid-sized synthetic dataset.
    OfflineDataset d;
    d.obs_dim = 1;
    d.act_dim = 1;
    Rng rng(3);
    for (int e = 0; e < 200; ++e) {
        d.episode_starts.push_back(d.n);
        for (int t = 0; t < 50; ++t) {
            double r = rng.uniform(-1.0, 1.0);
            d.rewards.push_back(r);
            d.raw_rewards.push_back(static_cast<float>(r));
            d.n += 1;
        }
    }
    for (auto _ : state) {
        auto range = support_from_dataset(d, 0.99);
        benchmark::DoNotOptimize(range.first);
    }
    state.SetItemsProcessed(state.iterations() * d.n);
}
BENCHMARK(BM_SupportFromDataset);

BENCHMARK_MAIN();
