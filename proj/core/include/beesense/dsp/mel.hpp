#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/dsp/spectral.hpp"

namespace beesense::dsp {

inline constexpr std::size_t kMfccFilterCount = 40;
inline constexpr std::size_t kMelBandCount = 128;
inline constexpr std::size_t kMfccCoefficients = 12;
inline constexpr double kLogFloor = 1e-10;

/// 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Row-major n_filters x (n_fft / 2 + 1) weights.
struct MelFilterBank {
    std::size_t n_filters = 0;
    std::size_t n_fft = 0;
    double sample_rate = 0.0;
    double f_min = 0.0;
    double f_max = 0.0;
    std::vector<double> weights;
    std::vector<double> centers_hz;

    std::size_t n_bins() const { return n_fft / 2 + 1; }
    double weight(std::size_t filter, std::size_t bin) const { return weights[filter * n_bins() + bin]; }
};

/// Triangles with unit peaks on n_filters + 2 points equally spaced in mel
/// between f_min and f_max (f_max <= 0 means sample_rate / 2).
MelFilterBank make_mel_filter_bank(std::size_t n_filters, const SpectralConfig& cfg,
                                   double f_min = 0.0, double f_max = -1.0);

/// bank x |STFT|^2 per frame.
FeatureMatrix mel_spectrogram(const ingest::AudioClip& clip, const SpectralConfig& cfg,
                              const MelFilterBank& bank);
FeatureMatrix apply_filter_bank(const FeatureMatrix& power_spec, const MelFilterBank& bank);

/// c_i = sum_{n=1..N} S_n cos(i (n - 0.5) pi / N) for i = 1..n_coeffs.
std::vector<double> cepstral_coefficients(std::span<const double> log_energies, std::size_t n_coeffs);

/// Cepstral coefficients of ln(max(E, 1e-10)) of the bank energies.
FeatureMatrix mfcc(const ingest::AudioClip& clip, const SpectralConfig& cfg, const MelFilterBank& bank,
                   std::size_t n_coeffs = kMfccCoefficients);
FeatureMatrix mfcc_from_mel(const FeatureMatrix& mel_energies, std::size_t n_coeffs);

}  // namespace beesense::dsp
