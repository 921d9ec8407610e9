#include <benchmark/benchmark.h>

#include <vector>

#include "xaiaug/attribution.hpp"
#include "xaiaug/dense_net.hpp"
#include "xaiaug/feature_augment.hpp"
#include "xaiaug/toy_data.hpp"

namespace {

using namespace xaiaug;

struct Fixture {
    DenseNetwork net;
    LabeledDataset batch;

    explicit Fixture(std::size_t batch_size) {
        const std::vector<std::size_t> sizes{5, 64, 32, 16, 2};
        const std::vector<Activation> acts{Activation::relu, Activation::relu, Activation::relu, Activation::softmax};
        net = build_network(sizes, acts, 7);
        Toy1Params p;
        p.train_size = batch_size;
        batch = gen_toy1(7, p).train;
    }
};

void BM_Forward(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(forward(f.net, f.batch.features));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(256);

void BM_Backward(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto trace = forward(f.net, f.batch.features);
    for (auto _ : state) benchmark::DoNotOptimize(backward(f.net, trace, f.batch.labels));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(32)->Arg(256);

void BM_ExplainLrp(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto trace = forward(f.net, f.batch.features);
    const auto method = AttributionMethod::lrp_epsilon();
    for (auto _ : state) benchmark::DoNotOptimize(explain(f.net, trace, f.batch.labels, method));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExplainLrp)->Arg(32)->Arg(256);

void BM_ExplainGuided(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto trace = forward(f.net, f.batch.features);
    const auto method = AttributionMethod::of_kind(AttributionKind::guided_backprop);
    for (auto _ : state) benchmark::DoNotOptimize(explain(f.net, trace, f.batch.labels, method));
}
BENCHMARK(BM_ExplainGuided)->Arg(32);

void BM_LrpVjp(benchmark::State& state) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto trace = forward(f.net, f.batch.features);
    const auto method = AttributionMethod::lrp_epsilon();
    const auto maps = explain(f.net, trace, f.batch.labels, method);
    const Matrix g(f.batch.size(), f.net.input_dim(), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(lrp_epsilon_vjp(f.net, trace, maps, method, 0, g));
}
BENCHMARK(BM_LrpVjp)->Arg(32);

void BM_XaiDropout(benchmark::State& state) {
    Fixture f(256);
    const auto trace = forward(f.net, f.batch.features);
    const auto maps = explain(f.net, trace, f.batch.labels, AttributionMethod::lrp_epsilon());
    const Matrix r = normalize_abs(maps.at_input(1));
    for (auto _ : state) benchmark::DoNotOptimize(xai_guided_dropout(trace.inputs[1], r, 0.25));
}
BENCHMARK(BM_XaiDropout);

}  // namespace

BENCHMARK_MAIN();
