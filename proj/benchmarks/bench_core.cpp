#include <numeric>

#include <benchmark/benchmark.h>

#include "tabattn/metrics.hpp"
#include "tabattn/model.hpp"
#include "tabattn/trees.hpp"
#include "tabattn/views.hpp"

using namespace tabattn;

namespace {

Dataset random_data(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.features = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            d.features(r, c) = rng.uniform();
            if (c < 3) s += d.features(r, c);
        }
        d.labels.push_back(s + 0.3 * rng.uniform() > 1.65 ? 1 : 0);
    }
    d.labels[0] = 0;
    d.labels[1] = 1;
    d.feature_names.assign(cols, "x");
    return d;
}

void BM_ForwardBackward(benchmark::State& state) {
    const auto d = random_data(static_cast<std::size_t>(state.range(0)), 20, 1);
    const auto vs = build_view_set(d, {}, 1);
    ModelConfig mc;
    mc.attention = state.range(1) != 0;
    Model m = init_model(vs, mc, 1);
    for (auto _ : state) {
        auto out = forward(m, vs, d.features);
        auto g = loss(out.local_preds, out.final_pred, d.labels, mc.aux_loss_weight);
        m.zero_grad();
        backward(m, out.trace, g);
        benchmark::DoNotOptimize(g.total);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Args({30, 1})->Args({30, 0})->Args({800, 1});

void BM_GainTree(benchmark::State& state) {
    const auto d = random_data(static_cast<std::size_t>(state.range(0)), 20, 2);
    for (auto _ : state) {
        Rng rng(0);
        auto fit = trees::fit_gain_tree(d, {}, rng);
        benchmark::DoNotOptimize(fit.importance.data());
    }
}
BENCHMARK(BM_GainTree)->Arg(200)->Arg(800);

void BM_ViewSet(benchmark::State& state) {
    const auto d = random_data(800, 20, 3);
    for (auto _ : state) {
        auto vs = build_view_set(d, {}, 0);
        benchmark::DoNotOptimize(vs.locals.data());
    }
}
BENCHMARK(BM_ViewSet)->Unit(benchmark::kMillisecond);

void BM_AucKs(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = rng.uniform();
        y[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::auc(s, y));
        benchmark::DoNotOptimize(metrics::ks(s, y));
    }
}
BENCHMARK(BM_AucKs)->Arg(200)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
