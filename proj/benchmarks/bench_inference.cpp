#include <benchmark/benchmark.h>

#include "beesense/models/recipes.hpp"
#include "beesense/nn/graph.hpp"
#include "beesense/rng.hpp"

namespace {

using namespace beesense;

nn::Tensor noise(nn::Shape shape, std::uint64_t seed) {
    SplitMix64 rng(seed);
    nn::Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = rng.uniform();
    }
    return t;
}

nn::Shape batched(std::size_t batch, const nn::Shape& sample) {
    nn::Shape out{batch};
    out.insert(out.end(), sample.begin(), sample.end());
    return out;
}

void BM_VisualCnn(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    auto graph = models::build_visual_health_cnn(side, side);
    graph.initialize(1);
    const nn::Feed feed{{"image", noise({1, side, side, 3}, 2)}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(graph.predict(feed));
    }
}
BENCHMARK(BM_VisualCnn)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_AudioDetector1d(benchmark::State& state) {
    auto graph = models::build_audio_detector_1d(12);
    graph.initialize(1);
    const nn::Feed feed{{"audio", noise({static_cast<std::size_t>(state.range(0)), 12, 1}, 2)}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(graph.predict(feed));
    }
}
BENCHMARK(BM_AudioDetector1d)->Arg(1)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Amnn(benchmark::State& state) {
    models::AmnnConfig cfg;
    auto graph = models::build_amnn(cfg);
    graph.initialize(1);
    const auto batch = static_cast<std::size_t>(state.range(0));
    const nn::Feed feed{{"image", noise(batched(batch, cfg.image_shape), 2)},
                        {"audio", noise(batched(batch, cfg.audio_shape), 3)}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(graph.predict(feed));
    }
}
BENCHMARK(BM_Amnn)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
