#include "beesense/dsp/spectral.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "beesense/error.hpp"

namespace beesense::dsp {

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::Mel: return "mel";
    case FeatureKind::Mfcc: return "mfcc";
    case FeatureKind::Stft: return "stft";
    case FeatureKind::Chroma: return "chroma";
    }
    return "unknown";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view name) {
    for (auto k : {FeatureKind::Mel, FeatureKind::Mfcc, FeatureKind::Stft, FeatureKind::Chroma}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::vector<double> FeatureMatrix::frame_times() const {
    std::vector<double> t(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        t[i] = static_cast<double>(i) * frame_step_seconds;
    }
    return t;
}

void SpectralConfig::validate() const {
    require(n_fft >= 2 && std::has_single_bit(n_fft), ErrorKind::Parameter, "n_fft must be a power of two");
    require(hop > 0 && hop <= n_fft, ErrorKind::Parameter, "hop must be in (0, n_fft]");
    require(sample_rate > 0.0, ErrorKind::Parameter, "sample rate must be positive");
}

std::vector<double> make_window(WindowKind kind, std::size_t length) {
    std::vector<double> w(length, 1.0);
    if (kind == WindowKind::Hann) {
        for (std::size_t n = 0; n < length; ++n) {
            w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                        static_cast<double>(length));
        }
    }
    return w;
}

void fft(std::span<std::complex<double>> data) {
    const std::size_t n = data.size();
    require(n > 0 && std::has_single_bit(n), ErrorKind::Parameter, "FFT length must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(data[i], data[j]);
        }
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // Twiddles computed directly per index (not by repeated
        // multiplication) to keep rounding error flat in n.
        for (std::size_t k = 0; k < half; ++k) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const std::complex<double> w(std::cos(angle), std::sin(angle));
            for (std::size_t start = 0; start < n; start += len) {
                const std::complex<double> u = data[start + k];
                const std::complex<double> v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
}

std::size_t frame_count(std::size_t n_samples, const SpectralConfig& cfg) {
    if (n_samples < cfg.n_fft) {
        return 0;
    }
    return 1 + (n_samples - cfg.n_fft) / cfg.hop;
}

ComplexSpectrogram stft(std::span<const double> samples, const SpectralConfig& cfg) {
    cfg.validate();
    if (samples.size() < cfg.n_fft) {
        fail(ErrorKind::InsufficientData, "clip has " + std::to_string(samples.size()) +
                                              " samples, fewer than n_fft = " + std::to_string(cfg.n_fft));
    }
    const std::size_t frames = frame_count(samples.size(), cfg);
    const std::size_t bins = cfg.n_bins();
    const auto window = make_window(cfg.window, cfg.n_fft);

    ComplexSpectrogram out;
    out.n_bins = bins;
    out.n_frames = frames;
    out.values.resize(bins * frames);
    out.frame_step_seconds = static_cast<double>(cfg.hop) / cfg.sample_rate;

    std::vector<std::complex<double>> buffer(cfg.n_fft);
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t offset = t * cfg.hop;
        for (std::size_t n = 0; n < cfg.n_fft; ++n) {
            buffer[n] = std::complex<double>(samples[offset + n] * window[n], 0.0);
        }
        fft(buffer);
        for (std::size_t k = 0; k < bins; ++k) {
            out.values[k * frames + t] = buffer[k];
        }
    }
    return out;
}

ComplexSpectrogram stft(const ingest::AudioClip& clip, const SpectralConfig& cfg) {
    require(clip.sample_rate == cfg.sample_rate, ErrorKind::Parameter,
            "clip sample rate does not match the spectral config");
    return stft(std::span<const double>(clip.samples), cfg);
}

FeatureMatrix magnitude(const ComplexSpectrogram& spec) {
    FeatureMatrix m(spec.n_bins, spec.n_frames, BinAxis::Hz, spec.frame_step_seconds);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        m.values[i] = std::abs(spec.values[i]);
    }
    return m;
}

FeatureMatrix power(const ComplexSpectrogram& spec) {
    FeatureMatrix m(spec.n_bins, spec.n_frames, BinAxis::Hz, spec.frame_step_seconds);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        m.values[i] = std::norm(spec.values[i]);
    }
    return m;
}

}  // namespace beesense::dsp
