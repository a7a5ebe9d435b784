#include "beesense/dsp/mel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "beesense/error.hpp"

namespace beesense::dsp {

double hz_to_mel(double hz) {
    if (!(hz >= 0.0)) {
        fail(ErrorKind::Domain, "frequency must be nonnegative");
    }
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    if (!(mel >= 0.0)) {
        fail(ErrorKind::Domain, "mel value must be nonnegative");
    }
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterBank make_mel_filter_bank(std::size_t n_filters, const SpectralConfig& cfg, double f_min,
                                   double f_max) {
    cfg.validate();
    require(n_filters >= 1, ErrorKind::Parameter, "filter bank needs at least one filter");
    if (f_max <= 0.0) {
        f_max = cfg.sample_rate / 2.0;
    }
    require(f_min >= 0.0 && f_min < f_max, ErrorKind::Parameter, "need 0 <= f_min < f_max");

    MelFilterBank bank;
    bank.n_filters = n_filters;
    bank.n_fft = cfg.n_fft;
    bank.sample_rate = cfg.sample_rate;
    bank.f_min = f_min;
    bank.f_max = f_max;

    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edges(n_filters + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_filters + 1);
    }

    const std::size_t bins = bank.n_bins();
    bank.weights.assign(n_filters * bins, 0.0);
    bank.centers_hz.resize(n_filters);
    for (std::size_t m = 0; m < n_filters; ++m) {
        const double left = edges[m];
        const double centre = edges[m + 1];
        const double right = edges[m + 2];
        bank.centers_hz[m] = mel_to_hz(centre);
        for (std::size_t k = 0; k < bins; ++k) {
            const double mel = hz_to_mel(bin_frequency(k, cfg));
            const double rising = (mel - left) / (centre - left);
            const double falling = (right - mel) / (right - centre);
            bank.weights[m * bins + k] = std::max(0.0, std::min(rising, falling));
        }
    }
    return bank;
}

FeatureMatrix apply_filter_bank(const FeatureMatrix& power_spec, const MelFilterBank& bank) {
    if (bank.weights.size() != bank.n_filters * bank.n_bins() || power_spec.n_bins != bank.n_bins()) {
        fail(ErrorKind::Shape, "filter bank expects " + std::to_string(bank.n_bins()) +
                                   " bins, spectrogram has " + std::to_string(power_spec.n_bins));
    }
    FeatureMatrix out(bank.n_filters, power_spec.n_frames, BinAxis::MelBand, power_spec.frame_step_seconds);
    const std::size_t bins = bank.n_bins();
    for (std::size_t m = 0; m < bank.n_filters; ++m) {
        double* row = &out.values[m * out.n_frames];
        for (std::size_t k = 0; k < bins; ++k) {
            const double w = bank.weights[m * bins + k];
            if (w == 0.0) {
                continue;
            }
            const double* src = &power_spec.values[k * power_spec.n_frames];
            for (std::size_t t = 0; t < out.n_frames; ++t) {
                row[t] += w * src[t];
            }
        }
    }
    return out;
}

FeatureMatrix mel_spectrogram(const ingest::AudioClip& clip, const SpectralConfig& cfg,
                              const MelFilterBank& bank) {
    if (bank.n_fft != cfg.n_fft || bank.sample_rate != cfg.sample_rate) {
        fail(ErrorKind::Shape, "filter bank was built for a different n_fft or sample rate");
    }
    return apply_filter_bank(power(stft(clip, cfg)), bank);
}

std::vector<double> cepstral_coefficients(std::span<const double> log_energies, std::size_t n_coeffs) {
    const std::size_t nf = log_energies.size();
    if (n_coeffs > nf) {
        fail(ErrorKind::Parameter, std::to_string(n_coeffs) + " coefficients requested from " +
                                       std::to_string(nf) + " filters");
    }
    std::vector<double> c(n_coeffs, 0.0);
    for (std::size_t i = 1; i <= n_coeffs; ++i) {
        double acc = 0.0;
        for (std::size_t n = 1; n <= nf; ++n) {
            acc += log_energies[n - 1] * std::cos(static_cast<double>(i) * (static_cast<double>(n) - 0.5) *
                                                  std::numbers::pi / static_cast<double>(nf));
        }
        c[i - 1] = acc;
    }
    return c;
}

FeatureMatrix mfcc_from_mel(const FeatureMatrix& mel_energies, std::size_t n_coeffs) {
    if (n_coeffs > mel_energies.n_bins) {
        fail(ErrorKind::Parameter, std::to_string(n_coeffs) + " coefficients requested from " +
                                       std::to_string(mel_energies.n_bins) + " filters");
    }
    FeatureMatrix out(n_coeffs, mel_energies.n_frames, BinAxis::Cepstral, mel_energies.frame_step_seconds);
    std::vector<double> s(mel_energies.n_bins);
    for (std::size_t t = 0; t < mel_energies.n_frames; ++t) {
        for (std::size_t n = 0; n < s.size(); ++n) {
            s[n] = std::log(std::max(mel_energies.at(n, t), kLogFloor));
        }
        const auto c = cepstral_coefficients(s, n_coeffs);
        for (std::size_t i = 0; i < n_coeffs; ++i) {
            out.at(i, t) = c[i];
        }
    }
    return out;
}

FeatureMatrix mfcc(const ingest::AudioClip& clip, const SpectralConfig& cfg, const MelFilterBank& bank,
                   std::size_t n_coeffs) {
    if (n_coeffs > bank.n_filters) {
        fail(ErrorKind::Parameter, std::to_string(n_coeffs) + " coefficients requested from " +
                                       std::to_string(bank.n_filters) + " filters");
    }
    return mfcc_from_mel(mel_spectrogram(clip, cfg, bank), n_coeffs);
}

}  // namespace beesense::dsp
