#pragma once

#include <cstdint>
#include <filesystem>

#include "beesense/ingest/manifest.hpp"

namespace beesense::pipeline {

/// Synthetic health dataset with a planted class signal in both modalities:
/// each class has its own tone (220, 277, 330, 392 Hz plus an octave
/// harmonic) and its own blob colour and quadrant.
struct FixtureOptions {
    std::size_t per_class = 6;
    std::uint64_t seed = 7;
    std::size_t image_side = 32;
    double sample_rate = 8000.0;
    double seconds = 1.0;
};

/// Writes images/, audio/, labels/ (YOLO boxes around each blob, class 0
/// "bee"), predictions/ (jittered boxes with scores plus one spurious box
/// every third image) and `manifest` under `dir`. Deterministic for a seed.
ingest::DatasetManifest write_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {});

/// Class tone frequencies in Hz.
double fixture_tone_hz(std::size_t label);

}  // namespace beesense::pipeline
