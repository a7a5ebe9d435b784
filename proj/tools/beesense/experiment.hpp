#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "beesense/dsp/feature_matrix.hpp"
#include "beesense/ingest/manifest.hpp"
#include "beesense/nn/loss.hpp"
#include "beesense/nn/optimizer.hpp"
#include "beesense/pipeline/model_config.hpp"

namespace beesense::cli {

/// Settings for one command. Loaded from a JSON config file, then overridden
/// by command-line flags.
///
/// Config keys (all optional unless a command needs them):
///
///     dataset          manifest file, or a directory holding `manifest`
///     output           output directory
///     model            model file (evaluate, predict)
///     recipe           audio-detector-1d | visual-cnn | audio-cnn2d |
///                      audio-lstm | transfer-head | amnn
///     feature          mel | mfcc | stft | chroma
///     features         list of feature kinds (extract)
///     epochs, batch_size, patience, seed, folds, workers
///     lr, momentum, lambda_image, lambda_sound, val_fraction,
///     target_accuracy
///     optimizer        adam | sgd
///     stratified       bool (crossval)
///     image_size, grid_size, sequence_length
///     backbone_filters (list), backbone_kernel, backbone_pool,
///     backbone_features, freeze_backbone (bool)
///     modality         image | audio (transfer-head)
///     attention_width, broadcast (segment | full),
///     branch_feature (flatten | dense16)
///     labels, predictions, image_width, image_height, name (detect-eval)
///     split            test | all (evaluate, predict)
///     per_class        fixture samples per class (make-fixture)
///
/// Relative paths in a config file are resolved against the file's
/// directory. Unknown keys are rejected.
struct ExperimentConfig {
    std::filesystem::path dataset;
    std::filesystem::path output;
    std::filesystem::path model;

    pipeline::ModelConfig model_config;
    std::vector<dsp::FeatureKind> extract_features;

    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::size_t patience = 5;
    std::string optimizer = "adam";
    double lr = 1e-3;
    double momentum = 0.0;
    double lambda_image = 0.5;
    double lambda_sound = 0.5;
    std::optional<std::uint64_t> seed;
    std::optional<double> target_accuracy;
    std::size_t folds = 5;
    bool stratified = true;
    double val_fraction = 0.1;
    std::size_t workers = 1;
    std::string split;  // empty: the command default

    std::filesystem::path labels_dir;
    std::filesystem::path predictions_dir;
    double image_width = 1.0;
    double image_height = 1.0;
    std::string name;

    std::size_t per_class = 6;

    nn::OptimizerConfig optimizer_config() const;
    nn::LossSpec loss() const;
};

/// Reads a JSON config file into `config`, keeping defaults for absent keys.
void load_config_file(const std::filesystem::path& path, ExperimentConfig& config);

/// Applies one config key. Throws a validation error for unknown keys or
/// values of the wrong type or range.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value,
                   const std::filesystem::path& base = {});

/// `dataset` itself when it names a file, otherwise `dataset/manifest`.
std::filesystem::path manifest_path(const std::filesystem::path& dataset);

/// Output directory: the configured one, else `$BEESENSE_OUTPUT_ROOT/<command>`,
/// else `beesense-out/<command>`.
std::filesystem::path output_dir(const ExperimentConfig& config, const std::string& command);

}  // namespace beesense::cli
