#include "experiment.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "beesense/error.hpp"

namespace beesense::cli {
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    fail(ErrorKind::Validation, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::size_t to_count(const std::string& key, const std::string& value, std::size_t min = 0) {
    std::size_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end || out < min) {
        bad_value(key, value, "an integer >= " + std::to_string(min));
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        bad_value(key, value, "a nonnegative integer");
    }
    return out;
}

double to_real(const std::string& key, const std::string& value, double lo, double hi) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !(out >= lo && out <= hi)) {
        bad_value(key, value, "a number in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    bad_value(key, value, "true or false");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

dsp::FeatureKind to_feature(const std::string& key, const std::string& value) {
    const auto kind = dsp::parse_feature_kind(value);
    if (!kind) {
        bad_value(key, value, "mel, mfcc, stft or chroma");
    }
    return *kind;
}

std::filesystem::path to_path(const std::string& value, const std::filesystem::path& base) {
    std::filesystem::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

// JSON scalars and arrays flattened to the same strings flags use.
std::string flatten(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return v.dump();
    }
    if (v.is_number_float()) {
        std::ostringstream out;
        out.precision(17);
        out << v.get<double>();
        return out.str();
    }
    if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
            if (item.is_array() || item.is_object()) {
                fail(ErrorKind::Validation, "config key '" + key + "': nested lists are not allowed");
            }
            out += (out.empty() ? "" : ",") + flatten(key, item);
        }
        return out;
    }
    fail(ErrorKind::Validation, "config key '" + key + "' has an unsupported value type");
}

}  // namespace

nn::OptimizerConfig ExperimentConfig::optimizer_config() const {
    return optimizer == "sgd" ? nn::OptimizerConfig::sgd(lr, momentum) : nn::OptimizerConfig::adam(lr);
}

nn::LossSpec ExperimentConfig::loss() const { return pipeline::loss_for(model_config, lambda_image, lambda_sound); }

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value,
                   const std::filesystem::path& base) {
    auto& m = c.model_config;
    if (key == "dataset") {
        c.dataset = to_path(value, base);
    } else if (key == "output") {
        c.output = to_path(value, base);
    } else if (key == "model") {
        c.model = to_path(value, base);
    } else if (key == "labels") {
        c.labels_dir = to_path(value, base);
    } else if (key == "predictions") {
        c.predictions_dir = to_path(value, base);
    } else if (key == "recipe") {
        if (!pipeline::is_known_recipe(value)) {
            bad_value(key, value, "a known recipe");
        }
        m.recipe = value;
    } else if (key == "feature") {
        m.data.feature = to_feature(key, value);
    } else if (key == "features") {
        c.extract_features.clear();
        for (const auto& item : split_list(value)) {
            c.extract_features.push_back(to_feature(key, item));
        }
    } else if (key == "epochs") {
        c.epochs = to_count(key, value, 1);
    } else if (key == "batch_size") {
        c.batch_size = to_count(key, value, 1);
    } else if (key == "patience") {
        c.patience = to_count(key, value);
    } else if (key == "seed") {
        c.seed = to_u64(key, value);
    } else if (key == "folds") {
        c.folds = to_count(key, value, 2);
    } else if (key == "workers") {
        c.workers = to_count(key, value, 1);
    } else if (key == "per_class") {
        c.per_class = to_count(key, value, 1);
    } else if (key == "optimizer") {
        if (value != "adam" && value != "sgd") {
            bad_value(key, value, "adam or sgd");
        }
        c.optimizer = value;
    } else if (key == "lr") {
        c.lr = to_real(key, value, 1e-12, 10.0);
    } else if (key == "momentum") {
        c.momentum = to_real(key, value, 0.0, 0.999999);
    } else if (key == "lambda_image") {
        c.lambda_image = to_real(key, value, 0.0, 1e6);
    } else if (key == "lambda_sound") {
        c.lambda_sound = to_real(key, value, 0.0, 1e6);
    } else if (key == "val_fraction") {
        c.val_fraction = to_real(key, value, 0.0, 0.9);
    } else if (key == "target_accuracy") {
        c.target_accuracy = to_real(key, value, 0.0, 1.0);
    } else if (key == "stratified") {
        c.stratified = to_bool(key, value);
    } else if (key == "split") {
        if (value != "test" && value != "all") {
            bad_value(key, value, "test or all");
        }
        c.split = value;
    } else if (key == "image_size") {
        m.data.image_size = to_count(key, value, 1);
    } else if (key == "grid_size") {
        m.data.grid_size = to_count(key, value, 1);
    } else if (key == "sequence_length") {
        m.data.sequence_length = to_count(key, value, 1);
    } else if (key == "backbone_filters") {
        m.backbone.filters.clear();
        for (const auto& item : split_list(value)) {
            m.backbone.filters.push_back(to_count(key, item, 1));
        }
    } else if (key == "backbone_kernel") {
        m.backbone.kernel = to_count(key, value, 1);
    } else if (key == "backbone_pool") {
        m.backbone.pool = to_count(key, value, 1);
    } else if (key == "backbone_features") {
        m.backbone.feature_dim = to_count(key, value, 1);
    } else if (key == "freeze_backbone") {
        m.freeze_backbone = to_bool(key, value);
    } else if (key == "modality") {
        m.modality = value;
    } else if (key == "attention_width") {
        m.attention_width = to_count(key, value, 1);
    } else if (key == "broadcast") {
        if (value != "segment" && value != "full") {
            bad_value(key, value, "segment or full");
        }
        m.broadcast = value == "full" ? models::AttentionBroadcast::Full : models::AttentionBroadcast::Segment;
    } else if (key == "branch_feature") {
        if (value != "flatten" && value != "dense16") {
            bad_value(key, value, "flatten or dense16");
        }
        m.branch_feature = value == "dense16" ? models::BranchFeature::Dense16 : models::BranchFeature::Flatten;
    } else if (key == "image_width") {
        c.image_width = to_real(key, value, 1e-9, 1e9);
    } else if (key == "image_height") {
        c.image_height = to_real(key, value, 1e-9, 1e9);
    } else if (key == "name") {
        c.name = value;
    } else {
        fail(ErrorKind::Validation, "unknown config key '" + key + "'");
    }
}

void load_config_file(const std::filesystem::path& path, ExperimentConfig& config) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Validation, "cannot read config file " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Validation, "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) {
        fail(ErrorKind::Validation, "config file " + path.string() + " must hold a JSON object");
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    for (const auto& [key, value] : doc.items()) {
        apply_setting(config, key, flatten(key, value), base);
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
    return std::filesystem::is_directory(dataset) ? dataset / "manifest" : dataset;
}

std::filesystem::path output_dir(const ExperimentConfig& config, const std::string& command) {
    if (!config.output.empty()) {
        return config.output;
    }
    if (const char* root = std::getenv("BEESENSE_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
        return std::filesystem::path(root) / command;
    }
    return std::filesystem::path("beesense-out") / command;
}

}  // namespace beesense::cli
