#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "evtta/adapt.hpp"
#include "evtta/denoise.hpp"
#include "evtta/events.hpp"
#include "evtta/model.hpp"
#include "evtta/optim.hpp"
#include "evtta/representation.hpp"
#include "evtta/rng.hpp"
#include "evtta/synth.hpp"
#include "evtta/tensor.hpp"

namespace {

using namespace evtta;

const EventStream& bench_stream() {
    static const EventStream stream = [] {
        ShiftSpec shift;
        shift.burst = BurstPolarity::negative;
        shift.burst_rate = 0.27;
        return synth_scene(3, 10, shift, Resolution{32, 32}, 100000, 42);
    }();
    return stream;
}

void bench_synth_scene(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        const EventStream s = synth_scene(3, 10, {}, Resolution{32, 32}, 100000, ++seed);
        benchmark::DoNotOptimize(s.events.data());
    }
}
BENCHMARK(bench_synth_scene);

void bench_build_representation(benchmark::State& state) {
    const RepKind kind = static_cast<RepKind>(state.range(0));
    const auto slices = random_slices(bench_stream(), 1, 10000, 7);
    for (auto _ : state) {
        const RepTensor rep = build(slices.slices[0], kind);
        benchmark::DoNotOptimize(rep.data.data());
    }
    state.SetLabel(rep_kind_name(kind));
}
BENCHMARK(bench_build_representation)->DenseRange(0, kRepKindCount - 1);

void bench_forward(benchmark::State& state) {
    Model model = make_classifier(10, 1);
    const auto slices = random_slices(bench_stream(), 4, 10000, 7);
    Tensor batch({4, 2, 32, 32});
    for (int j = 0; j < 4; ++j) {
        const RepTensor rep = build(slices.slices[static_cast<std::size_t>(j)], RepKind::binary);
        std::copy(rep.data.begin(), rep.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>(j) * 2 * 32 * 32);
    }
    for (auto _ : state) {
        const Tensor out = model.forward(batch, true);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(bench_forward);

void bench_adapt_step(benchmark::State& state) {
    std::vector<EventStream> streams;
    for (int i = 0; i < 8; ++i)
        streams.push_back(synth_scene(i % 10, 10, {}, Resolution{32, 32}, 100000,
                                      static_cast<std::uint64_t>(100 + i)));
    std::vector<const EventStream*> batch;
    for (const auto& s : streams) batch.push_back(&s);

    AdaptConfig config;
    config.batch_size = 8;
    Model model = make_classifier(10, 2);
    AdamState opt = AdamState::init(model.bn_params(), config.lr);
    for (auto _ : state) {
        const BatchResult r = adapt_batch(model, opt, batch, 0, config, RatioStats{});
        benchmark::DoNotOptimize(r.report.total);
    }
}
BENCHMARK(bench_adapt_step);

void bench_conditional_denoise(benchmark::State& state) {
    std::vector<RepTensor> anchors;
    Rng rng(5);
    for (int i = 0; i < 16; ++i) {
        RepTensor rep = RepTensor::zeros(RepKind::binary, 32, 32);
        for (std::size_t p = 0; p < rep.data.size(); ++p)
            if (rng.uniform01() < (p % 2 == 0 ? 0.03 : 0.09)) rep.data[p] = 1.0;
        anchors.push_back(std::move(rep));
    }
    RatioStats stats{30.0, 30.0, 7.0, 7.0, 0.5};
    for (auto _ : state) {
        const DenoiseResult r = conditional_denoise(anchors, stats, {}, 1);
        benchmark::DoNotOptimize(r.anchors.data());
    }
}
BENCHMARK(bench_conditional_denoise);

} // namespace

BENCHMARK_MAIN();
