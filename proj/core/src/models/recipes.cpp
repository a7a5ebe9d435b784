#include "beesense/models/recipes.hpp"

#include "beesense/error.hpp"

namespace beesense::models {

using nn::Init;
using nn::LayerSpec;
using nn::NetworkGraph;
using nn::Shape;

namespace {

/// Chains nodes one after another, naming each `prefix + name`.
class Chain {
public:
    Chain(NetworkGraph& g, std::string prefix, std::string from) : g_(g), prefix_(std::move(prefix)), last_(std::move(from)) {}

    Chain& add(const std::string& name, const LayerSpec& spec) {
        const std::string full = prefix_ + name;
        g_.add(full, spec, {last_});
        last_ = full;
        return *this;
    }

    const std::string& last() const { return last_; }

private:
    NetworkGraph& g_;
    std::string prefix_;
    std::string last_;
};

void require_multiple(std::size_t value, std::size_t divisor, const std::string& what) {
    if (value == 0 || value % divisor != 0) {
        fail(ErrorKind::Shape, what + " of " + std::to_string(value) + " is not a positive multiple of " +
                                   std::to_string(divisor) + " required by the pooling stages");
    }
}

}  // namespace

void BackboneConfig::validate() const {
    if (filters.empty()) {
        fail(ErrorKind::Parameter, "backbone needs at least one conv block");
    }
    for (auto f : filters) {
        require(f > 0, ErrorKind::Parameter, "backbone filter counts must be positive");
    }
    require(kernel > 0, ErrorKind::Parameter, "backbone kernel must be positive");
    require(pool > 0, ErrorKind::Parameter, "backbone pool must be positive");
    require(feature_dim > 0, ErrorKind::Parameter, "backbone feature dimension must be positive");
}

std::size_t BackboneConfig::stride() const {
    std::size_t s = 1;
    for (std::size_t i = 0; i < filters.size(); ++i) {
        s *= pool;
    }
    return s;
}

std::string add_backbone(NetworkGraph& graph, const std::string& prefix, const std::string& input,
                         const BackboneConfig& config) {
    config.validate();
    const Shape& in = graph.node_shape(input);
    if (in.size() != 3) {
        fail(ErrorKind::Shape, "backbone expects (height, width, channels), got " + nn::shape_string(in));
    }
    require_multiple(in[0], config.stride(), "backbone input height");
    require_multiple(in[1], config.stride(), "backbone input width");
    Chain c(graph, prefix, input);
    for (std::size_t b = 0; b < config.filters.size(); ++b) {
        const std::string n = std::to_string(b + 1);
        c.add("conv" + n, LayerSpec::conv2d(config.filters[b], config.kernel))
            .add("relu" + n, LayerSpec::relu())
            .add("pool" + n, LayerSpec::maxpool2d(config.pool));
    }
    c.add("flatten", LayerSpec::flatten());
    if (graph.node_shape(c.last())[0] != config.feature_dim) {
        c.add("project", LayerSpec::dense(config.feature_dim, Init::HeUniform)).add("project_relu", LayerSpec::relu());
    }
    return c.last();
}

NetworkGraph build_audio_detector_1d(std::size_t input_len, std::size_t n_classes, std::size_t channels) {
    if (input_len < 8) {
        fail(ErrorKind::Shape, "audio detector input length " + std::to_string(input_len) +
                                   " is too short for three pooling stages (need >= 8)");
    }
    require(n_classes >= 2, ErrorKind::Parameter, "need at least two classes");
    require(channels > 0, ErrorKind::Parameter, "need at least one channel");
    NetworkGraph g;
    g.add_input("audio", {input_len, channels});
    Chain c(g, "", "audio");
    const std::size_t filters[] = {64, 128, 256};
    for (std::size_t b = 0; b < 3; ++b) {
        const std::string n = std::to_string(b + 1);
        auto conv = LayerSpec::conv1d(filters[b], 8);
        c.add("block" + n + "_conv1", conv)
            .add("block" + n + "_relu1", LayerSpec::relu())
            .add("block" + n + "_conv2", conv)
            .add("block" + n + "_relu2", LayerSpec::relu())
            .add("block" + n + "_bn", LayerSpec::batchnorm())
            .add("block" + n + "_pool", LayerSpec::maxpool1d(2))
            .add("block" + n + "_drop", LayerSpec::dropout(0.25));
    }
    c.add("flatten", LayerSpec::flatten());
    const std::size_t widths[] = {32, 64, 128};
    for (std::size_t d = 0; d < 3; ++d) {
        const std::string n = std::to_string(d + 1);
        c.add("dense" + n, LayerSpec::dense(widths[d], Init::HeUniform))
            .add("dense" + n + "_relu", LayerSpec::relu())
            .add("dense" + n + "_drop", LayerSpec::dropout(0.25));
    }
    c.add("logits", LayerSpec::dense(n_classes)).add("probs", LayerSpec::softmax());
    g.set_outputs({c.last()});
    g.metadata()["recipe"] = "audio-detector-1d";
    return g;
}

NetworkGraph build_visual_health_cnn(std::size_t height, std::size_t width, std::size_t channels) {
    if (channels != 3) {
        fail(ErrorKind::Shape, "visual CNN expects RGB input, got " + std::to_string(channels) + " channel(s)");
    }
    if (height != width) {
        fail(ErrorKind::Shape, "visual CNN expects a square image");
    }
    require_multiple(height, 4, "visual CNN input side");
    NetworkGraph g;
    g.add_input("image", {height, width, channels});
    Chain c(g, "", "image");
    c.add("conv1", LayerSpec::conv2d(64, 3))
        .add("relu1", LayerSpec::relu())
        .add("conv2", LayerSpec::conv2d(128, 3))
        .add("relu2", LayerSpec::relu())
        .add("pool1", LayerSpec::maxpool2d(2))
        .add("drop1", LayerSpec::dropout(0.25))
        .add("conv3", LayerSpec::conv2d(256, 3))
        .add("relu3", LayerSpec::relu())
        .add("conv4", LayerSpec::conv2d(1024, 3))
        .add("relu4", LayerSpec::relu())
        .add("pool2", LayerSpec::maxpool2d(2))
        .add("drop2", LayerSpec::dropout(0.25))
        .add("flatten", LayerSpec::flatten())
        .add("logits", LayerSpec::dense(kHealthClasses))
        .add("probs", LayerSpec::softmax());
    g.set_outputs({c.last()});
    g.metadata()["recipe"] = "visual-cnn";
    return g;
}

NetworkGraph build_audio_health_cnn2d(std::size_t height, std::size_t width, std::size_t channels) {
    if (channels != 1) {
        fail(ErrorKind::Shape, "audio CNN expects a single-channel spectrogram, got " + std::to_string(channels));
    }
    require_multiple(height, 16, "audio CNN input height");
    require_multiple(width, 16, "audio CNN input width");
    NetworkGraph g;
    g.add_input("audio", {height, width, channels});
    Chain c(g, "", "audio");
    const std::size_t filters[] = {16, 32, 64, 128};
    for (std::size_t b = 0; b < 4; ++b) {
        const std::string n = std::to_string(b + 1);
        c.add("conv" + n, LayerSpec::conv2d(filters[b], 3))
            .add("relu" + n, LayerSpec::relu())
            .add("pool" + n, LayerSpec::maxpool2d(2))
            .add("drop" + n, LayerSpec::dropout(0.25));
    }
    c.add("flatten", LayerSpec::flatten())
        .add("dense1", LayerSpec::dense(32, Init::HeUniform))
        .add("dense1_relu", LayerSpec::relu())
        .add("dense1_drop", LayerSpec::dropout(0.25))
        .add("dense2", LayerSpec::dense(16, Init::HeUniform))
        .add("dense2_relu", LayerSpec::relu())
        .add("dense2_drop", LayerSpec::dropout(0.25))
        .add("logits", LayerSpec::dense(kHealthClasses))
        .add("probs", LayerSpec::softmax());
    g.set_outputs({c.last()});
    g.metadata()["recipe"] = "audio-cnn2d";
    return g;
}

NetworkGraph build_audio_health_lstm(std::size_t seq_len, std::size_t feat_dim) {
    if (seq_len == 0) {
        fail(ErrorKind::Shape, "LSTM sequence length must be at least 1");
    }
    if (feat_dim == 0) {
        fail(ErrorKind::Parameter, "LSTM feature dimension must be positive");
    }
    NetworkGraph g;
    g.add_input("audio", {seq_len, feat_dim});
    Chain c(g, "", "audio");
    c.add("lstm", LayerSpec::lstm(128))
        .add("dense1", LayerSpec::dense(64, Init::HeUniform))
        .add("dense1_relu", LayerSpec::relu())
        .add("dense1_drop", LayerSpec::dropout(0.4))
        .add("dense2", LayerSpec::dense(32, Init::HeUniform))
        .add("dense2_relu", LayerSpec::relu())
        .add("dense2_drop", LayerSpec::dropout(0.4))
        .add("logits", LayerSpec::dense(kHealthClasses))
        .add("probs", LayerSpec::softmax());
    g.set_outputs({c.last()});
    g.metadata()["recipe"] = "audio-lstm";
    return g;
}

NetworkGraph build_transfer_head(const Shape& input_shape, const BackboneConfig& backbone, bool freeze_backbone,
                                 const std::string& input_name) {
    NetworkGraph g;
    g.add_input(input_name, input_shape);
    const std::string feature = add_backbone(g, "backbone_", input_name, backbone);
    if (freeze_backbone) {
        for (const auto& name : g.node_names()) {
            if (name.rfind("backbone_", 0) == 0) {
                g.set_trainable(name, false);
            }
        }
    }
    Chain c(g, "head_", feature);
    c.add("flatten", LayerSpec::flatten())
        .add("dense", LayerSpec::dense(256, Init::HeUniform))
        .add("relu", LayerSpec::relu())
        .add("drop", LayerSpec::dropout(0.2))
        .add("logits", LayerSpec::dense(kHealthClasses))
        .add("probs", LayerSpec::softmax());
    g.set_outputs({c.last()});
    g.metadata()["recipe"] = "transfer-head";
    return g;
}

NetworkGraph build_amnn(const AmnnConfig& config) {
    require(config.n_classes >= 2, ErrorKind::Parameter, "need at least two classes");
    NetworkGraph g;
    g.add_input("image", config.image_shape);
    g.add_input("audio", config.audio_shape);

    std::vector<std::string> branch_features;
    std::vector<std::string> heads;
    const struct {
        const char* prefix;
        const char* input;
        const BackboneConfig* backbone;
    } branches[] = {{"img_", "image", &config.image_backbone}, {"aud_", "audio", &config.audio_backbone}};
    for (const auto& b : branches) {
        const std::string feature = add_backbone(g, std::string(b.prefix) + "backbone_", b.input, *b.backbone);
        Chain c(g, b.prefix, feature);
        c.add("dense16", LayerSpec::dense(16, Init::HeUniform)).add("dense16_relu", LayerSpec::relu());
        const std::string dense16 = c.last();
        c.add("head_logits", LayerSpec::dense(config.n_classes)).add("head_probs", LayerSpec::softmax());
        heads.push_back(c.last());
        branch_features.push_back(config.branch_feature == BranchFeature::Flatten ? feature : dense16);
    }

    g.add(kConcatNode, LayerSpec::concat(), branch_features);
    const std::size_t fused_width = g.node_shape(kConcatNode)[0];
    const bool full = config.broadcast == AttentionBroadcast::Full;
    const std::size_t k = full ? fused_width : config.attention_width;
    require(k > 0, ErrorKind::Parameter, "attention width must be positive");
    if (!full && fused_width % k != 0) {
        fail(ErrorKind::Parameter, std::to_string(k) + " attention segments do not divide the " +
                                       std::to_string(fused_width) + " fused features");
    }
    g.add("attention_logits", LayerSpec::dense(k), {kConcatNode});
    g.add(kAttentionNode, LayerSpec::softmax(), {"attention_logits"});
    g.add("attended", LayerSpec::attention_multiply(full ? 0 : k), {kConcatNode, kAttentionNode});

    Chain c(g, "fused_", "attended");
    c.add("dense1", LayerSpec::dense(32, Init::HeUniform))
        .add("dense1_relu", LayerSpec::relu())
        .add("dense1_drop", LayerSpec::dropout(0.5))
        .add("dense2", LayerSpec::dense(16, Init::HeUniform))
        .add("dense2_relu", LayerSpec::relu())
        .add("dense2_drop", LayerSpec::dropout(0.5))
        .add("logits", LayerSpec::dense(config.n_classes))
        .add("probs", LayerSpec::softmax());
    g.set_outputs({c.last(), heads[0], heads[1]});
    g.metadata()["recipe"] = "amnn";
    return g;
}

std::vector<std::string> recipe_names() {
    return {"audio-detector-1d", "visual-cnn", "audio-cnn2d", "audio-lstm", "transfer-head", "amnn"};
}

std::vector<nn::LayerKind> layer_sequence(const NetworkGraph& graph) {
    std::vector<nn::LayerKind> out;
    for (const auto& name : graph.node_names()) {
        const auto kind = graph.node_spec(name).kind;
        if (kind != nn::LayerKind::Input) {
            out.push_back(kind);
        }
    }
    return out;
}

}  // namespace beesense::models
