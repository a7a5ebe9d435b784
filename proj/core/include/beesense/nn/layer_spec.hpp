#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "beesense/nn/tensor.hpp"

namespace beesense::nn {

enum class LayerKind {
    Input,
    Conv1D,
    Conv2D,
    Dense,
    BatchNorm,
    MaxPool1D,
    MaxPool2D,
    Dropout,
    Flatten,
    Relu,
    Softmax,
    Lstm,
    Concat,
    AttentionMultiply,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

enum class Init { HeUniform, GlorotUniform };

/// Kind plus the hyperparameters that kind reads. Unused fields stay zero.
struct LayerSpec {
    LayerKind kind = LayerKind::Input;
    std::size_t units = 0;     // dense units, conv filters, lstm hidden size
    std::size_t kernel = 0;    // conv kernel length (square for 2D)
    std::size_t pool = 0;      // pooling window and stride
    double rate = 0.0;         // dropout rate
    std::size_t segments = 0;  // attention weights; 0 means one per feature
    Init init = Init::HeUniform;
    Shape shape;               // per-sample shape of an Input node

    static LayerSpec input(Shape sample_shape);
    static LayerSpec conv1d(std::size_t filters, std::size_t kernel);
    static LayerSpec conv2d(std::size_t filters, std::size_t kernel);
    static LayerSpec dense(std::size_t units, Init init = Init::GlorotUniform);
    static LayerSpec batchnorm();
    static LayerSpec maxpool1d(std::size_t pool = 2);
    static LayerSpec maxpool2d(std::size_t pool = 2);
    static LayerSpec dropout(double rate);
    static LayerSpec flatten();
    static LayerSpec relu();
    static LayerSpec softmax();
    static LayerSpec lstm(std::size_t units);
    static LayerSpec concat();
    static LayerSpec attention_multiply(std::size_t segments);

    void validate() const;

    /// "kind key=value ..." with only the fields this kind uses.
    std::string describe() const;
    static LayerSpec parse(std::string_view text);

    bool operator==(const LayerSpec&) const = default;
};

}  // namespace beesense::nn
