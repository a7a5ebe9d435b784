#pragma once

#include <string>
#include <vector>

#include "beesense/nn/graph.hpp"

namespace beesense::models {

inline constexpr std::size_t kHealthClasses = 4;
inline constexpr std::size_t kDetectorClasses = 2;

/// Small stand-in for a pretrained feature extractor: `filters.size()` blocks
/// of (conv kernel x kernel, relu, maxpool pool), then flatten. A dense relu
/// projection to `feature_dim` is added only when the flattened size differs.
struct BackboneConfig {
    std::vector<std::size_t> filters{16, 32, 64, 64};
    std::size_t kernel = 3;
    std::size_t pool = 2;
    std::size_t feature_dim = 4096;

    void validate() const;
    /// Spatial divisor the input height and width must be a multiple of.
    std::size_t stride() const;
};

/// Appends a backbone reading `input`; node names get `prefix`. Returns the
/// name of the feature node. Shapes the pooling cannot divide exactly are
/// rejected with a shape error.
std::string add_backbone(nn::NetworkGraph& graph, const std::string& prefix, const std::string& input,
                         const BackboneConfig& config);

/// Input "audio" of shape (input_len, channels).
nn::NetworkGraph build_audio_detector_1d(std::size_t input_len, std::size_t n_classes = kDetectorClasses,
                                         std::size_t channels = 1);

/// Input "image" of shape (side, side, 3); side must be a multiple of 4.
nn::NetworkGraph build_visual_health_cnn(std::size_t height, std::size_t width, std::size_t channels = 3);

/// Input "audio" of shape (side, side, 1); side must be a multiple of 16.
nn::NetworkGraph build_audio_health_cnn2d(std::size_t height, std::size_t width, std::size_t channels = 1);

/// Input "audio" of shape (seq_len, feat_dim); the final hidden state feeds
/// the dense head.
nn::NetworkGraph build_audio_health_lstm(std::size_t seq_len, std::size_t feat_dim);

/// Backbone followed by dense 256 relu, dropout .2, dense 4 softmax.
nn::NetworkGraph build_transfer_head(const nn::Shape& input_shape, const BackboneConfig& backbone,
                                     bool freeze_backbone = false, const std::string& input_name = "image");

enum class AttentionBroadcast { Segment, Full };
enum class BranchFeature { Flatten, Dense16 };

struct AmnnConfig {
    nn::Shape image_shape{128, 128, 3};
    nn::Shape audio_shape{128, 128, 1};
    BackboneConfig image_backbone;
    BackboneConfig audio_backbone;
    std::size_t attention_width = 4;
    AttentionBroadcast broadcast = AttentionBroadcast::Segment;
    BranchFeature branch_feature = BranchFeature::Flatten;
    std::size_t n_classes = kHealthClasses;
};

/// Outputs, in order: fused prediction, image auxiliary head, audio auxiliary
/// head. In full broadcast mode attention_width is ignored and one weight is
/// learned per concatenated feature.
nn::NetworkGraph build_amnn(const AmnnConfig& config);

/// Node names the AMNN recipe uses for its attention weights and fused input.
inline constexpr const char* kAttentionNode = "attention";
inline constexpr const char* kConcatNode = "fusion_concat";

std::vector<std::string> recipe_names();

/// Layer kinds of every non-input node, in graph order.
std::vector<nn::LayerKind> layer_sequence(const nn::NetworkGraph& graph);

}  // namespace beesense::models
