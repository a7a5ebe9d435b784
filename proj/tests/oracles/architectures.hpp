#pragma once

// Expected layer lists and closed-form parameter counts for each recipe,
// written out from the published layer descriptions. Activations live in
// their own nodes, so every conv or hidden dense is followed by a relu.

#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "beesense/nn/layer_spec.hpp"

namespace oracle {

using beesense::nn::LayerKind;

struct Count {
    std::size_t total = 0;      // includes batchnorm running statistics
    std::size_t trainable = 0;
};

inline std::size_t conv_params(std::size_t patch, std::size_t in, std::size_t filters) {
    return patch * in * filters + filters;
}
inline std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

inline std::vector<LayerKind> detector_1d_layers() {
    std::vector<LayerKind> k;
    for (int b = 0; b < 3; ++b) {
        k.insert(k.end(), {LayerKind::Conv1D, LayerKind::Relu, LayerKind::Conv1D, LayerKind::Relu, LayerKind::BatchNorm,
                           LayerKind::MaxPool1D, LayerKind::Dropout});
    }
    k.push_back(LayerKind::Flatten);
    for (int d = 0; d < 3; ++d) {
        k.insert(k.end(), {LayerKind::Dense, LayerKind::Relu, LayerKind::Dropout});
    }
    k.insert(k.end(), {LayerKind::Dense, LayerKind::Softmax});
    return k;
}

inline Count detector_1d_count(std::size_t length, std::size_t channels = 1, std::size_t classes = 2) {
    Count c;
    std::size_t in = channels;
    std::size_t len = length;
    std::size_t bn_state = 0;
    for (std::size_t f : {64u, 128u, 256u}) {
        c.total += conv_params(8, in, f) + conv_params(8, f, f) + 4 * f;
        bn_state += 2 * f;
        in = f;
        len /= 2;
    }
    std::size_t width = len * 256;
    for (std::size_t d : {32u, 64u, 128u}) {
        c.total += dense_params(width, d);
        width = d;
    }
    c.total += dense_params(width, classes);
    c.trainable = c.total - bn_state;
    return c;
}

inline std::vector<LayerKind> visual_cnn_layers() {
    return {LayerKind::Conv2D,  LayerKind::Relu,      LayerKind::Conv2D,  LayerKind::Relu,    LayerKind::MaxPool2D,
            LayerKind::Dropout, LayerKind::Conv2D,    LayerKind::Relu,    LayerKind::Conv2D,  LayerKind::Relu,
            LayerKind::MaxPool2D, LayerKind::Dropout, LayerKind::Flatten, LayerKind::Dense,   LayerKind::Softmax};
}

inline Count visual_cnn_count(std::size_t side) {
    Count c;
    c.total = conv_params(9, 3, 64) + conv_params(9, 64, 128) + conv_params(9, 128, 256) + conv_params(9, 256, 1024) +
              dense_params((side / 4) * (side / 4) * 1024, 4);
    c.trainable = c.total;
    return c;
}

inline std::vector<LayerKind> audio_cnn2d_layers() {
    std::vector<LayerKind> k;
    for (int b = 0; b < 4; ++b) {
        k.insert(k.end(), {LayerKind::Conv2D, LayerKind::Relu, LayerKind::MaxPool2D, LayerKind::Dropout});
    }
    k.push_back(LayerKind::Flatten);
    for (int d = 0; d < 2; ++d) {
        k.insert(k.end(), {LayerKind::Dense, LayerKind::Relu, LayerKind::Dropout});
    }
    k.insert(k.end(), {LayerKind::Dense, LayerKind::Softmax});
    return k;
}

inline Count audio_cnn2d_count(std::size_t side) {
    Count c;
    c.total = conv_params(9, 1, 16) + conv_params(9, 16, 32) + conv_params(9, 32, 64) + conv_params(9, 64, 128) +
              dense_params((side / 16) * (side / 16) * 128, 32) + dense_params(32, 16) + dense_params(16, 4);
    c.trainable = c.total;
    return c;
}

inline std::vector<LayerKind> audio_lstm_layers() {
    return {LayerKind::Lstm,  LayerKind::Dense, LayerKind::Relu,    LayerKind::Dropout, LayerKind::Dense,
            LayerKind::Relu,  LayerKind::Dropout, LayerKind::Dense, LayerKind::Softmax};
}

inline Count audio_lstm_count(std::size_t features) {
    Count c;
    // Four gates, each with input weights, recurrent weights and a bias.
    c.total = 4 * (features * 128 + 128 * 128 + 128) + dense_params(128, 64) + dense_params(64, 32) +
              dense_params(32, 4);
    c.trainable = c.total;
    return c;
}

/// Small-CNN backbone: blocks of conv k x k, relu, pool; flatten; a dense
/// relu projection only when the flattened width differs from `dim`.
struct Backbone {
    std::vector<std::size_t> filters;
    std::size_t kernel = 3;
    std::size_t pool = 2;
    std::size_t dim = 4096;
};

inline std::vector<LayerKind> backbone_layers(const Backbone& b, std::size_t side) {
    std::vector<LayerKind> k;
    for (std::size_t i = 0; i < b.filters.size(); ++i) {
        k.insert(k.end(), {LayerKind::Conv2D, LayerKind::Relu, LayerKind::MaxPool2D});
        side /= b.pool;
    }
    k.push_back(LayerKind::Flatten);
    if (side * side * b.filters.back() != b.dim) {
        k.insert(k.end(), {LayerKind::Dense, LayerKind::Relu});
    }
    return k;
}

inline std::size_t backbone_count(const Backbone& b, std::size_t side, std::size_t channels) {
    std::size_t n = 0;
    std::size_t in = channels;
    for (std::size_t f : b.filters) {
        n += conv_params(b.kernel * b.kernel, in, f);
        in = f;
        side /= b.pool;
    }
    const std::size_t flat = side * side * in;
    if (flat != b.dim) {
        n += dense_params(flat, b.dim);
    }
    return n;
}

inline std::vector<LayerKind> transfer_head_layers(const Backbone& b, std::size_t side) {
    auto k = backbone_layers(b, side);
    k.insert(k.end(), {LayerKind::Flatten, LayerKind::Dense, LayerKind::Relu, LayerKind::Dropout, LayerKind::Dense,
                       LayerKind::Softmax});
    return k;
}

inline Count transfer_head_count(const Backbone& b, std::size_t side, std::size_t channels, bool frozen) {
    const std::size_t head = dense_params(b.dim, 256) + dense_params(256, 4);
    const std::size_t body = backbone_count(b, side, channels);
    return {head + body, frozen ? head : head + body};
}

/// Two branches (image then audio), each backbone, dense 16 relu, and an
/// auxiliary dense softmax head; fusion is concat, dense k softmax attention,
/// the elementwise multiply, then dense 32 relu dropout, dense 16 relu
/// dropout, dense softmax.
inline std::vector<LayerKind> amnn_layers(const Backbone& img, std::size_t img_side, const Backbone& aud,
                                          std::size_t aud_side) {
    std::vector<LayerKind> k;
    for (const auto& [b, side] : {std::pair{img, img_side}, std::pair{aud, aud_side}}) {
        auto bb = backbone_layers(b, side);
        k.insert(k.end(), bb.begin(), bb.end());
        k.insert(k.end(), {LayerKind::Dense, LayerKind::Relu, LayerKind::Dense, LayerKind::Softmax});
    }
    k.insert(k.end(), {LayerKind::Concat, LayerKind::Dense, LayerKind::Softmax, LayerKind::AttentionMultiply});
    k.insert(k.end(), {LayerKind::Dense, LayerKind::Relu, LayerKind::Dropout, LayerKind::Dense, LayerKind::Relu,
                       LayerKind::Dropout, LayerKind::Dense, LayerKind::Softmax});
    return k;
}

/// `fused_width` is 2D for flattened branch features or 32 for the dense-16
/// ones; `k` is the attention width (fused_width in full mode).
inline Count amnn_count(const Backbone& img, std::size_t img_side, std::size_t img_ch, const Backbone& aud,
                        std::size_t aud_side, std::size_t aud_ch, std::size_t fused_width, std::size_t k,
                        std::size_t classes = 4) {
    std::size_t n = backbone_count(img, img_side, img_ch) + backbone_count(aud, aud_side, aud_ch);
    n += dense_params(img.dim, 16) + dense_params(16, classes);
    n += dense_params(aud.dim, 16) + dense_params(16, classes);
    n += dense_params(fused_width, k);
    n += dense_params(fused_width, 32) + dense_params(32, 16) + dense_params(16, classes);
    return {n, n};
}

}  // namespace oracle
