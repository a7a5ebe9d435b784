#include "beesense/pipeline/model_config.hpp"

#include <charconv>
#include <sstream>

#include "beesense/error.hpp"

namespace beesense::pipeline {
namespace {

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        fail(ErrorKind::Parse, "metadata '" + key + "' is not an integer: '" + v + "'");
    }
    return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::istringstream in(v);
    for (std::string part; std::getline(in, part, ',');) {
        out.push_back(to_size(key, part));
    }
    return out;
}

nn::Shape sample_shape_of(const nn::Dataset& data, const std::string& name) {
    const auto it = data.inputs.find(name);
    if (it == data.inputs.end()) {
        fail(ErrorKind::Validation, "dataset has no '" + name + "' input for this recipe");
    }
    return it->second.sample_shape();
}

}  // namespace

bool is_known_recipe(const std::string& name) {
    for (const auto& r : models::recipe_names()) {
        if (r == name) {
            return true;
        }
    }
    return false;
}

void ModelConfig::validate() const {
    if (!is_known_recipe(recipe)) {
        fail(ErrorKind::Validation, "unknown recipe '" + recipe + "'");
    }
    if (modality != "image" && modality != "audio") {
        fail(ErrorKind::Validation, "modality must be image or audio, got '" + modality + "'");
    }
    if (data.image_size == 0 || data.grid_size == 0 || data.sequence_length == 0) {
        fail(ErrorKind::Validation, "representation sizes must be positive");
    }
    if (recipe != "audio-detector-1d" && n_classes != models::kHealthClasses) {
        fail(ErrorKind::Validation, "recipe '" + recipe + "' predicts the 4 health classes; dataset has " +
                                        std::to_string(n_classes));
    }
    try {
        backbone.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Validation, e.what());
    }
    const std::size_t stride = backbone.stride();
    const bool uses_image_backbone = recipe == "amnn" || (recipe == "transfer-head" && modality == "image");
    const bool uses_audio_backbone = recipe == "amnn" || (recipe == "transfer-head" && modality == "audio");
    if (uses_image_backbone && data.image_size % stride != 0) {
        fail(ErrorKind::Validation, "image size " + std::to_string(data.image_size) + " must be a multiple of " +
                                        std::to_string(stride) + " for the backbone");
    }
    if (uses_audio_backbone && data.grid_size % stride != 0) {
        fail(ErrorKind::Validation, "grid size " + std::to_string(data.grid_size) + " must be a multiple of " +
                                        std::to_string(stride) + " for the backbone");
    }
    if (recipe == "visual-cnn" && data.image_size % 4 != 0) {
        fail(ErrorKind::Validation, "visual-cnn needs an image size divisible by 4");
    }
    if (recipe == "audio-cnn2d" && data.grid_size % 16 != 0) {
        fail(ErrorKind::Validation, "audio-cnn2d needs a grid size divisible by 16");
    }
}

std::vector<InputRequirement> inputs_for(const ModelConfig& c) {
    if (c.recipe == "audio-detector-1d") {
        return {{"audio", Representation::Vector}};
    }
    if (c.recipe == "visual-cnn") {
        return {{"image", Representation::Image}};
    }
    if (c.recipe == "audio-cnn2d") {
        return {{"audio", Representation::Matrix}};
    }
    if (c.recipe == "audio-lstm") {
        return {{"audio", Representation::Sequence}};
    }
    if (c.recipe == "transfer-head") {
        return {{c.modality, c.modality == "image" ? Representation::Image : Representation::Matrix}};
    }
    if (c.recipe == "amnn") {
        return {{"image", Representation::Image}, {"audio", Representation::Matrix}};
    }
    fail(ErrorKind::Validation, "unknown recipe '" + c.recipe + "'");
}

nn::NetworkGraph build_model(const ModelConfig& c, const nn::Dataset& data) {
    c.validate();
    nn::NetworkGraph g;
    if (c.recipe == "audio-detector-1d") {
        const auto s = sample_shape_of(data, "audio");
        g = models::build_audio_detector_1d(s.at(0), c.n_classes, s.at(1));
    } else if (c.recipe == "visual-cnn") {
        const auto s = sample_shape_of(data, "image");
        g = models::build_visual_health_cnn(s.at(0), s.at(1), s.at(2));
    } else if (c.recipe == "audio-cnn2d") {
        const auto s = sample_shape_of(data, "audio");
        g = models::build_audio_health_cnn2d(s.at(0), s.at(1), s.at(2));
    } else if (c.recipe == "audio-lstm") {
        const auto s = sample_shape_of(data, "audio");
        g = models::build_audio_health_lstm(s.at(0), s.at(1));
    } else if (c.recipe == "transfer-head") {
        g = models::build_transfer_head(sample_shape_of(data, c.modality), c.backbone, c.freeze_backbone, c.modality);
    } else {
        models::AmnnConfig a;
        a.image_shape = sample_shape_of(data, "image");
        a.audio_shape = sample_shape_of(data, "audio");
        a.image_backbone = c.backbone;
        a.audio_backbone = c.backbone;
        a.attention_width = c.attention_width;
        a.broadcast = c.broadcast;
        a.branch_feature = c.branch_feature;
        a.n_classes = c.n_classes;
        g = models::build_amnn(a);
    }
    store_config(c, g.metadata());
    return g;
}

void store_config(const ModelConfig& c, std::map<std::string, std::string>& m) {
    m["recipe"] = c.recipe;
    m["feature"] = std::string(dsp::to_string(c.data.feature));
    m["image_size"] = std::to_string(c.data.image_size);
    m["grid_size"] = std::to_string(c.data.grid_size);
    m["sequence_length"] = std::to_string(c.data.sequence_length);
    m["backbone_filters"] = join(c.backbone.filters);
    m["backbone_kernel"] = std::to_string(c.backbone.kernel);
    m["backbone_pool"] = std::to_string(c.backbone.pool);
    m["backbone_features"] = std::to_string(c.backbone.feature_dim);
    m["freeze_backbone"] = c.freeze_backbone ? "1" : "0";
    m["modality"] = c.modality;
    m["attention_width"] = std::to_string(c.attention_width);
    m["broadcast"] = c.broadcast == models::AttentionBroadcast::Full ? "full" : "segment";
    m["branch_feature"] = c.branch_feature == models::BranchFeature::Dense16 ? "dense16" : "flatten";
    m["n_classes"] = std::to_string(c.n_classes);
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& m) {
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = m.find(key);
        if (it == m.end()) {
            fail(ErrorKind::Format, "model metadata lacks '" + key + "'");
        }
        return it->second;
    };
    ModelConfig c;
    c.recipe = get("recipe");
    const auto kind = dsp::parse_feature_kind(get("feature"));
    if (!kind) {
        fail(ErrorKind::Format, "model metadata has unknown feature '" + get("feature") + "'");
    }
    c.data.feature = *kind;
    c.data.image_size = to_size("image_size", get("image_size"));
    c.data.grid_size = to_size("grid_size", get("grid_size"));
    c.data.sequence_length = to_size("sequence_length", get("sequence_length"));
    c.backbone.filters = to_sizes("backbone_filters", get("backbone_filters"));
    c.backbone.kernel = to_size("backbone_kernel", get("backbone_kernel"));
    c.backbone.pool = to_size("backbone_pool", get("backbone_pool"));
    c.backbone.feature_dim = to_size("backbone_features", get("backbone_features"));
    c.freeze_backbone = get("freeze_backbone") == "1";
    c.modality = get("modality");
    c.attention_width = to_size("attention_width", get("attention_width"));
    c.broadcast = get("broadcast") == "full" ? models::AttentionBroadcast::Full : models::AttentionBroadcast::Segment;
    c.branch_feature = get("branch_feature") == "dense16" ? models::BranchFeature::Dense16 : models::BranchFeature::Flatten;
    c.n_classes = to_size("n_classes", get("n_classes"));
    return c;
}

nn::LossSpec loss_for(const ModelConfig& c, double lambda_image, double lambda_sound) {
    nn::LossSpec spec;
    if (c.recipe == "amnn") {
        spec.kind = nn::LossKind::MultimodalWeighted;
        spec.lambda_image = lambda_image;
        spec.lambda_sound = lambda_sound;
    }
    return spec;
}

}  // namespace beesense::pipeline
