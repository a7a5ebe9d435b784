#include "beesense/dsp/chroma.hpp"

#include <cmath>

#include "beesense/error.hpp"

namespace beesense::dsp {

std::size_t pitch_class(double hz) {
    if (!(hz > 0.0)) {
        fail(ErrorKind::Domain, "pitch class needs a positive frequency");
    }
    const long semis = std::lround(12.0 * std::log2(hz / 440.0));
    return static_cast<std::size_t>(((semis % 12) + 12) % 12);
}

FeatureMatrix fold_chroma(const FeatureMatrix& power_spec, const SpectralConfig& cfg) {
    require(power_spec.n_bins == cfg.n_bins(), ErrorKind::Shape, "power spectrogram does not match config");
    FeatureMatrix out(kPitchClasses, power_spec.n_frames, BinAxis::PitchClass, power_spec.frame_step_seconds);
    for (std::size_t k = 1; k < power_spec.n_bins; ++k) {
        const std::size_t pc = pitch_class(bin_frequency(k, cfg));
        const double* src = &power_spec.values[k * power_spec.n_frames];
        double* dst = &out.values[pc * out.n_frames];
        for (std::size_t t = 0; t < out.n_frames; ++t) {
            dst[t] += src[t];
        }
    }
    return out;
}

FeatureMatrix chromagram(const ingest::AudioClip& clip, const SpectralConfig& cfg) {
    return fold_chroma(power(stft(clip, cfg)), cfg);
}

}  // namespace beesense::dsp
