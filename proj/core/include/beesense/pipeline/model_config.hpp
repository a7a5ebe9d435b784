#pragma once

#include <map>
#include <string>
#include <vector>

#include "beesense/models/recipes.hpp"
#include "beesense/pipeline/dataset.hpp"

namespace beesense::pipeline {

/// Everything needed to rebuild a recipe for a dataset. Stored in model
/// metadata so a saved model can be re-evaluated on the same inputs.
struct ModelConfig {
    std::string recipe = "visual-cnn";
    DatasetOptions data;
    models::BackboneConfig backbone;
    bool freeze_backbone = false;
    std::string modality = "image";  // transfer-head only: image | audio
    std::size_t attention_width = 4;
    models::AttentionBroadcast broadcast = models::AttentionBroadcast::Segment;
    models::BranchFeature branch_feature = models::BranchFeature::Flatten;
    std::size_t n_classes = 4;

    /// Unknown recipe names, impossible sizes and inconsistent options raise
    /// a validation error.
    void validate() const;
};

bool is_known_recipe(const std::string& name);

/// Graph inputs of the recipe and how each is built from a manifest entry.
std::vector<InputRequirement> inputs_for(const ModelConfig& config);

/// Builds the recipe against the per-sample input shapes of a dataset.
nn::NetworkGraph build_model(const ModelConfig& config, const nn::Dataset& data);

void store_config(const ModelConfig& config, std::map<std::string, std::string>& metadata);
ModelConfig config_from_metadata(const std::map<std::string, std::string>& metadata);

/// The loss matching the recipe's outputs.
nn::LossSpec loss_for(const ModelConfig& config, double lambda_image = 0.5, double lambda_sound = 0.5);

}  // namespace beesense::pipeline
