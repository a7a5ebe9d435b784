#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beesense::dsp {

enum class FeatureKind : int { Mel = 0, Mfcc = 1, Stft = 2, Chroma = 3 };

std::string_view to_string(FeatureKind kind);
std::optional<FeatureKind> parse_feature_kind(std::string_view name);

/// What the rows of a FeatureMatrix index.
enum class BinAxis : int { Hz = 0, MelBand = 1, Cepstral = 2, PitchClass = 3 };

/// Real-valued time-frequency grid, row-major n_bins x n_frames.
struct FeatureMatrix {
    std::size_t n_bins = 0;
    std::size_t n_frames = 0;
    std::vector<double> values;
    BinAxis axis = BinAxis::Hz;
    double frame_step_seconds = 0.0;  // frame t starts at t * frame_step_seconds

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t bins, std::size_t frames, BinAxis bin_axis, double step = 0.0)
        : n_bins(bins), n_frames(frames), values(bins * frames, 0.0), axis(bin_axis),
          frame_step_seconds(step) {}

    double& at(std::size_t bin, std::size_t frame) { return values[bin * n_frames + frame]; }
    double at(std::size_t bin, std::size_t frame) const { return values[bin * n_frames + frame]; }

    std::vector<double> frame_times() const;
    bool empty() const { return n_bins == 0 || n_frames == 0; }
};

/// Condensed per-bin summary in [0, 1].
struct FeatureVector {
    std::vector<double> values;
    FeatureKind kind = FeatureKind::Stft;
};

}  // namespace beesense::dsp
