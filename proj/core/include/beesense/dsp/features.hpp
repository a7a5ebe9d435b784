#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/dsp/spectral.hpp"
#include "beesense/ingest/audio.hpp"

namespace beesense::dsp {

/// 10 log10(max(v, 1e-10) / max(ref, 1e-10)).
double power_to_db(double value, double ref);

/// Row means, converted to dB relative to the largest row mean, then min-max
/// scaled to [0, 1]. A constant result maps to all zeros.
FeatureVector condense(const FeatureMatrix& matrix, FeatureKind kind);

/// The four features with the library defaults: 128-band power mel
/// spectrogram, 12 MFCCs over a 40-filter bank, STFT magnitude, and
/// chromagram power.
FeatureMatrix extract_feature(const ingest::AudioClip& clip, FeatureKind kind,
                              const SpectralConfig& cfg = {});

/// Same, one clip per input, computed by up to `workers` threads; results
/// are in input order.
std::vector<FeatureMatrix> extract_batch(std::span<const ingest::AudioClip> clips, FeatureKind kind,
                                         const SpectralConfig& cfg = {}, std::size_t workers = 1);

/// Grid for 2D models: dB relative to the matrix maximum (MFCCs skip this,
/// they are already log-domain and signed), min-max scaled to [0, 1], then
/// bilinearly resized to rows x cols.
std::vector<double> to_unit_grid(const FeatureMatrix& matrix, FeatureKind kind, std::size_t rows,
                                 std::size_t cols);

// Feature record file, little-endian:
//   char[8]  magic "BSFEAT01"
//   u32      feature kind (0 mel, 1 mfcc, 2 stft, 3 chroma)
//   u32      bin axis (0 hz, 1 mel band, 2 cepstral, 3 pitch class)
//   u64      rows (bins)
//   u64      cols (frames)
//   f64      frame step in seconds
//   f64[rows*cols] values, row-major
struct FeatureRecord {
    FeatureKind kind = FeatureKind::Stft;
    FeatureMatrix matrix;
};

std::vector<std::uint8_t> encode_feature_record(const FeatureRecord& record);
FeatureRecord decode_feature_record(std::span<const std::uint8_t> bytes);
void write_feature_record(const std::filesystem::path& path, const FeatureRecord& record);
FeatureRecord read_feature_record(const std::filesystem::path& path);

}  // namespace beesense::dsp
