#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace beesense::ingest {

inline constexpr double kTargetSampleRate = 44100.0;
inline constexpr double kTargetSeconds = 10.0;
inline constexpr std::size_t kTargetSamples = 441000;

/// Mono PCM samples in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    double sample_rate = kTargetSampleRate;

    double duration() const {
        return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

enum class WavEncoding { Pcm8, Pcm16, Pcm24, Float32 };

/// Decodes a RIFF/WAVE byte buffer into a mono clip at the file's own rate.
/// Channels are averaged; integer PCM is scaled by 2^(bits-1).
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Linear interpolation onto a new rate. Output length is round(n * to / from).
std::vector<double> resample_linear(std::span<const double> samples, double from_rate,
                                    double to_rate);

/// Resamples to 44.1 kHz, then right-pads with zeros or center-truncates to
/// exactly ten seconds.
AudioClip normalize_clip(const AudioClip& clip);

/// decode_wav + normalize_clip.
AudioClip load_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding,
                                     std::uint16_t channels = 1);
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace beesense::ingest
