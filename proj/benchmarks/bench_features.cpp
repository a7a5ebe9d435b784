#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "beesense/dsp/features.hpp"
#include "beesense/dsp/spectral.hpp"
#include "beesense/ingest/audio.hpp"
#include "beesense/rng.hpp"

namespace {

using namespace beesense;

// Ten seconds at 44.1 kHz: a hive hum plus noise.
ingest::AudioClip hive_clip() {
    SplitMix64 rng(42);
    ingest::AudioClip clip;
    clip.samples.resize(ingest::kTargetSamples);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / clip.sample_rate;
        clip.samples[i] = 0.4 * std::sin(2.0 * std::numbers::pi * 250.0 * t) + 0.05 * rng.uniform(-1.0, 1.0);
    }
    return clip;
}

void BM_Stft(benchmark::State& state) {
    const auto clip = hive_clip();
    dsp::SpectralConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dsp::stft(clip, cfg));
    }
}
BENCHMARK(BM_Stft)->Unit(benchmark::kMillisecond);

void BM_Feature(benchmark::State& state) {
    const auto clip = hive_clip();
    const auto kind = static_cast<dsp::FeatureKind>(state.range(0));
    state.SetLabel(std::string(dsp::to_string(kind)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(dsp::extract_feature(clip, kind));
    }
}
BENCHMARK(BM_Feature)
    ->Arg(static_cast<int>(dsp::FeatureKind::Mel))
    ->Arg(static_cast<int>(dsp::FeatureKind::Mfcc))
    ->Arg(static_cast<int>(dsp::FeatureKind::Stft))
    ->Arg(static_cast<int>(dsp::FeatureKind::Chroma))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
