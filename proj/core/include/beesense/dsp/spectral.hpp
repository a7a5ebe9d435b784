#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/ingest/audio.hpp"

namespace beesense::dsp {

enum class WindowKind { Hann, Rectangular };

struct SpectralConfig {
    std::size_t n_fft = 1024;
    std::size_t hop = 512;
    WindowKind window = WindowKind::Hann;
    double sample_rate = 44100.0;

    std::size_t n_bins() const { return n_fft / 2 + 1; }
    void validate() const;
};

/// Periodic Hann (0.5 - 0.5 cos(2 pi n / N)) or all ones.
std::vector<double> make_window(WindowKind kind, std::size_t length);

/// In-place iterative radix-2 FFT; length must be a power of two.
void fft(std::span<std::complex<double>> data);

/// 1 + floor((n_samples - n_fft) / hop); no centre padding.
std::size_t frame_count(std::size_t n_samples, const SpectralConfig& cfg);

/// One-sided STFT, bins 0..n_fft/2, bin-major like FeatureMatrix.
struct ComplexSpectrogram {
    std::size_t n_bins = 0;
    std::size_t n_frames = 0;
    std::vector<std::complex<double>> values;
    double frame_step_seconds = 0.0;

    std::complex<double> at(std::size_t bin, std::size_t frame) const {
        return values[bin * n_frames + frame];
    }
};

ComplexSpectrogram stft(std::span<const double> samples, const SpectralConfig& cfg);
ComplexSpectrogram stft(const ingest::AudioClip& clip, const SpectralConfig& cfg);

FeatureMatrix magnitude(const ComplexSpectrogram& spec);
FeatureMatrix power(const ComplexSpectrogram& spec);

/// Frequency of one-sided bin k.
inline double bin_frequency(std::size_t k, const SpectralConfig& cfg) {
    return static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
}

}  // namespace beesense::dsp
