#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/ingest/manifest.hpp"
#include "beesense/nn/train.hpp"

namespace beesense::pipeline {

/// How one graph input is produced from a manifest entry.
enum class Representation {
    Vector,    // condensed feature vector, shaped (bins, 1)
    Matrix,    // unit-scaled feature grid, shaped (grid, grid, 1)
    Sequence,  // unit-scaled feature frames resized to T steps, shaped (T, bins)
    Image,     // RGB image resized to (side, side, 3)
};

std::string_view to_string(Representation r);

struct InputRequirement {
    std::string input_name;  // "image" or "audio"
    Representation representation = Representation::Image;
};

struct DatasetOptions {
    dsp::FeatureKind feature = dsp::FeatureKind::Chroma;
    std::size_t image_size = 128;
    std::size_t grid_size = 128;
    std::size_t sequence_length = 64;
    /// When set, feature records are read from (and written to)
    /// `<features_dir>/<id>.<kind>.feat`.
    std::filesystem::path features_dir;
    std::size_t workers = 1;
};

struct LoadedData {
    nn::Dataset data;
    std::vector<std::string> ids;  // row order
    std::vector<std::string> class_names;
};

std::filesystem::path feature_record_path(const std::filesystem::path& dir, const std::string& id,
                                          dsp::FeatureKind kind);

/// Feature matrix for one clip: cached record when present, otherwise
/// decoded and extracted.
dsp::FeatureMatrix clip_features(const ingest::DatasetManifest& manifest, const ingest::ManifestEntry& entry,
                                 const DatasetOptions& options);

/// Builds one tensor per requirement for the listed ids (all entries, in
/// manifest order, when `ids` is empty). An entry missing a required
/// modality raises a data error naming it.
LoadedData load_dataset(const ingest::DatasetManifest& manifest, const std::vector<InputRequirement>& inputs,
                        const DatasetOptions& options, const std::vector<std::string>& ids = {});

/// Per-sample tensor values for one representation.
std::vector<double> represent(const dsp::FeatureMatrix& matrix, Representation rep, const DatasetOptions& options);

}  // namespace beesense::pipeline
