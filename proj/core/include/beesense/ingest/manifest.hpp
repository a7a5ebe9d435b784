#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beesense::ingest {

enum class HealthLabel : int {
    Healthy = 0,
    AntInfestation = 1,
    MissingQueen = 2,
    PesticideExposure = 3,
};

inline constexpr std::size_t kHealthClassCount = 4;

std::string_view to_string(HealthLabel label);

/// Which label vocabulary a manifest uses.
enum class LabelSet {
    Health,     // healthy, ant_infestation, missing_queen, pesticide_exposure
    Detection,  // no_bee, bee
};

std::vector<std::string> class_names(LabelSet set);
std::size_t class_count(LabelSet set);

struct ManifestEntry {
    std::string id;
    std::optional<std::filesystem::path> image;
    std::optional<std::filesystem::path> audio;
    int label = 0;
};

/// Manifest file format, one entry per line:
///
///     # comment
///     id  image_path  audio_path  label
///
/// Fields are whitespace separated, `-` marks a missing modality, paths are
/// relative to the manifest's directory, and the label is one of the token
/// names of a single LabelSet. An optional header line reading exactly
/// `id image audio label` is skipped.
struct DatasetManifest {
    LabelSet label_set = LabelSet::Health;
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;

    std::vector<std::size_t> class_counts() const;
    std::vector<std::string> ids() const;
    const ManifestEntry& find(std::string_view id) const;

    std::filesystem::path resolve(const std::filesystem::path& relative) const {
        return relative.is_absolute() ? relative : root / relative;
    }
};

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& root = {});
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);

}  // namespace beesense::ingest
