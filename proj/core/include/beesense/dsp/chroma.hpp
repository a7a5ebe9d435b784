#pragma once

#include <cstddef>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/dsp/spectral.hpp"

namespace beesense::dsp {

inline constexpr std::size_t kPitchClasses = 12;

/// round(12 log2(f / 440)) mod 12, so A is class 0, A# class 1, ... G# class 11.
std::size_t pitch_class(double hz);

/// STFT power of bins 1..n_fft/2 summed into 12 pitch classes per frame.
/// The DC bin has no pitch and is dropped.
FeatureMatrix chromagram(const ingest::AudioClip& clip, const SpectralConfig& cfg);
FeatureMatrix fold_chroma(const FeatureMatrix& power_spec, const SpectralConfig& cfg);

}  // namespace beesense::dsp
