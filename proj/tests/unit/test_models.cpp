#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "beesense/models/recipes.hpp"
#include "beesense/nn/loss.hpp"
#include "beesense/nn/optimizer.hpp"
#include "beesense/nn/train.hpp"
#include "oracles/architectures.hpp"
#include "oracles/gradcheck.hpp"
#include "support/expect_error.hpp"

namespace {

using namespace beesense;
using namespace beesense::models;
using namespace beesense::nn;
using support::kind_of;

oracle::Backbone mirror(const BackboneConfig& b) { return {b.filters, b.kernel, b.pool, b.feature_dim}; }

void expect_distributions(const Tensor& p, std::size_t classes) {
    ASSERT_EQ(p.shape().back(), classes);
    const std::size_t rows = p.size() / classes;
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            EXPECT_GE(p[i * classes + j], 0.0);
            s += p[i * classes + j];
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

Tensor random_batch(std::size_t n, const Shape& sample, std::uint64_t seed) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    Rng rng(seed);
    return oracle::random_tensor(s, rng, 0.0, 1.0);
}

TEST(AudioDetector, LayersAndCounts) {
    for (std::size_t len : {8u, 12u, 513u}) {
        auto g = build_audio_detector_1d(len);
        EXPECT_EQ(layer_sequence(g), oracle::detector_1d_layers());
        const auto want = oracle::detector_1d_count(len);
        EXPECT_EQ(g.parameter_count(), want.total) << len;
        EXPECT_EQ(g.trainable_parameter_count(), want.trainable) << len;
    }
}

TEST(AudioDetector, OutputsTwoProbabilities) {
    auto g = build_audio_detector_1d(12);
    g.initialize(1);
    const auto p = g.predict({{"audio", random_batch(5, {12, 1}, 2)}}).at("probs");
    EXPECT_EQ(p.shape(), (Shape{5, 2}));
    expect_distributions(p, 2);
}

TEST(AudioDetector, TooShortIsRejected) {
    EXPECT_EQ(kind_of([] { build_audio_detector_1d(7); }), ErrorKind::Shape);
    EXPECT_NO_THROW(build_audio_detector_1d(8));
}

TEST(VisualCnn, LayersAndCounts) {
    for (std::size_t side : {8u, 32u, 128u}) {
        auto g = build_visual_health_cnn(side, side);
        EXPECT_EQ(layer_sequence(g), oracle::visual_cnn_layers());
        EXPECT_EQ(g.parameter_count(), oracle::visual_cnn_count(side).total) << side;
    }
}

TEST(VisualCnn, ZeroImageGivesDistribution) {
    auto g = build_visual_health_cnn(8, 8);
    g.initialize(3);
    const auto p = g.predict({{"image", Tensor({2, 8, 8, 3})}}).at("probs");
    EXPECT_EQ(p.shape(), (Shape{2, 4}));
    expect_distributions(p, 4);
}

TEST(VisualCnn, OffByOneAndChannelChecks) {
    EXPECT_EQ(kind_of([] { build_visual_health_cnn(127, 127); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_visual_health_cnn(129, 129); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_visual_health_cnn(128, 128, 1); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_visual_health_cnn(128, 124); }), ErrorKind::Shape);
}

TEST(AudioCnn2d, LayersAndCounts) {
    for (std::size_t side : {16u, 64u, 128u}) {
        auto g = build_audio_health_cnn2d(side, side);
        EXPECT_EQ(layer_sequence(g), oracle::audio_cnn2d_layers());
        EXPECT_EQ(g.parameter_count(), oracle::audio_cnn2d_count(side).total) << side;
    }
    auto g = build_audio_health_cnn2d(128, 128);
    std::vector<std::size_t> filters;
    for (const auto& name : g.node_names()) {
        if (g.node_spec(name).kind == LayerKind::Conv2D) {
            filters.push_back(g.node_spec(name).units);
        }
    }
    EXPECT_EQ(filters, (std::vector<std::size_t>{16, 32, 64, 128}));
}

TEST(AudioCnn2d, OffByOneIsRejected) {
    EXPECT_EQ(kind_of([] { build_audio_health_cnn2d(129, 129); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_audio_health_cnn2d(127, 128); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_audio_health_cnn2d(128, 128, 3); }), ErrorKind::Shape);
    auto g = build_audio_health_cnn2d(16, 16);
    g.initialize(4);
    expect_distributions(g.predict({{"audio", random_batch(3, {16, 16, 1}, 5)}}).at("probs"), 4);
}

TEST(AudioLstm, LayersCountsAndHiddenSize) {
    for (std::size_t feat : {1u, 12u, 128u}) {
        auto g = build_audio_health_lstm(10, feat);
        EXPECT_EQ(layer_sequence(g), oracle::audio_lstm_layers());
        EXPECT_EQ(g.parameter_count(), oracle::audio_lstm_count(feat).total) << feat;
    }
    auto g = build_audio_health_lstm(10, 12);
    for (const auto& p : g.parameters()) {
        if (p.name.rfind("lstm/", 0) == 0) {
            EXPECT_EQ(p.parameter->value.shape().back(), 4u * 128u) << p.name;
        }
    }
    EXPECT_EQ(g.node_shape("lstm"), (Shape{128}));
    EXPECT_EQ(kind_of([] { build_audio_health_lstm(0, 12); }), ErrorKind::Shape);
    EXPECT_EQ(kind_of([] { build_audio_health_lstm(10, 0); }), ErrorKind::Parameter);
}

TEST(AudioLstm, OnlyTheFinalHiddenStateReachesTheHead) {
    // Probe: zero the recurrent kernel and saturate the forget gate shut, so
    // the final hidden state is a function of the last timestep alone. If the
    // head read any other step (or a pooled sequence), earlier inputs would
    // still move the output.
    auto g = build_audio_health_lstm(6, 3);
    g.initialize(6);
    for (auto& p : g.parameters()) {
        if (p.name == "lstm/recurrent_kernel") {
            p.parameter->value.fill(0.0);
        } else if (p.name == "lstm/kernel") {
            for (std::size_t r = 0; r < 3; ++r) {
                for (std::size_t j = 128; j < 256; ++j) {
                    p.parameter->value.at(r, j) = 0.0;
                }
            }
        } else if (p.name == "lstm/bias") {
            for (std::size_t j = 128; j < 256; ++j) {
                p.parameter->value[j] = -1000.0;
            }
        }
    }
    const Tensor x = random_batch(2, {6, 3}, 7);
    const auto base = g.predict({{"audio", x}}).at("probs");
    Tensor early = x;
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t t = 0; t < 5; ++t) {
            for (std::size_t f = 0; f < 3; ++f) {
                early[(b * 6 + t) * 3 + f] += 0.7;
            }
        }
    }
    EXPECT_EQ(g.predict({{"audio", early}}).at("probs").storage(), base.storage());
    Tensor last = x;
    last[5 * 3] += 0.7;
    EXPECT_NE(g.predict({{"audio", last}}).at("probs").storage(), base.storage());
}

TEST(Backbone, EmitsFeatureDim) {
    for (const auto& [side, filters, dim] :
         {std::tuple{8u, std::vector<std::size_t>{4}, 64u}, std::tuple{16u, std::vector<std::size_t>{8, 16}, 256u},
          std::tuple{32u, std::vector<std::size_t>{8, 8, 8}, 128u}}) {
        BackboneConfig b;
        b.filters = filters;
        b.feature_dim = dim;
        NetworkGraph g;
        g.add_input("x", {side, side, 3});
        const auto out = add_backbone(g, "bb_", "x", b);
        EXPECT_EQ(g.node_shape(out), (Shape{dim}));
    }
    // Defaults on 128 x 128 flatten to exactly 4096, so no projection.
    NetworkGraph g;
    g.add_input("x", {128, 128, 3});
    EXPECT_EQ(add_backbone(g, "bb_", "x", BackboneConfig{}), "bb_flatten");
    EXPECT_EQ(g.node_shape("bb_flatten"), (Shape{4096}));
}

TEST(TransferHead, LayersAndCounts) {
    BackboneConfig b;
    b.filters = {8, 16};
    b.feature_dim = 64;
    for (bool frozen : {false, true}) {
        auto g = build_transfer_head({16, 16, 3}, b, frozen);
        EXPECT_EQ(layer_sequence(g), oracle::transfer_head_layers(mirror(b), 16));
        const auto want = oracle::transfer_head_count(mirror(b), 16, 3, frozen);
        EXPECT_EQ(g.parameter_count(), want.total);
        EXPECT_EQ(g.trainable_parameter_count(), want.trainable);
    }
    auto full = build_transfer_head({128, 128, 3}, BackboneConfig{}, true);
    EXPECT_EQ(full.trainable_parameter_count(), 4096u * 256u + 256u + 256u * 4u + 4u);
    EXPECT_EQ(kind_of([] { build_transfer_head({129, 129, 3}, BackboneConfig{}); }), ErrorKind::Shape);
}

TEST(TransferHead, FrozenBackboneIsUntouchedByTraining) {
    BackboneConfig b;
    b.filters = {4};
    b.feature_dim = 32;
    auto g = build_transfer_head({8, 8, 3}, b, true);
    g.initialize(8);
    std::map<std::string, std::vector<double>> before;
    for (const auto& p : g.parameters()) {
        before[p.name] = p.parameter->value.to_vector();
    }
    const Tensor x = random_batch(4, {8, 8, 3}, 9);
    const Tensor y = one_hot({0, 1, 2, 3}, 4);
    Rng rng(1);
    g.zero_grad();
    const auto tape = g.forward({{"image", x}}, Mode::Train, &rng);
    const auto loss = cross_entropy(tape.output(0), y, true);
    g.backward(tape, {loss.grad});
    Optimizer opt(OptimizerConfig::adam(0.01));
    opt.step(g);
    for (const auto& p : g.parameters()) {
        if (p.name.rfind("backbone_", 0) == 0) {
            EXPECT_EQ(p.parameter->value.to_vector(), before[p.name]) << p.name;
        } else if (p.name.rfind("head_dense/", 0) == 0 || p.name.rfind("head_logits/", 0) == 0) {
            EXPECT_NE(p.parameter->value.to_vector(), before[p.name]) << p.name;
        }
    }
}

AmnnConfig small_amnn() {
    AmnnConfig c;
    c.image_shape = {8, 8, 3};
    c.audio_shape = {8, 8, 1};
    c.image_backbone.filters = {4, 8};
    c.image_backbone.feature_dim = 32;
    c.audio_backbone.filters = {4};
    c.audio_backbone.feature_dim = 64;
    return c;
}

TEST(Amnn, LayersAndCounts) {
    auto c = small_amnn();
    auto g = build_amnn(c);
    const auto ib = mirror(c.image_backbone);
    const auto ab = mirror(c.audio_backbone);
    EXPECT_EQ(layer_sequence(g), oracle::amnn_layers(ib, 8, ab, 8));
    EXPECT_EQ(g.parameter_count(), oracle::amnn_count(ib, 8, 3, ab, 8, 1, 96, 4).total);

    c.branch_feature = BranchFeature::Dense16;
    auto d = build_amnn(c);
    EXPECT_EQ(d.parameter_count(), oracle::amnn_count(ib, 8, 3, ab, 8, 1, 32, 4).total);

    c.broadcast = AttentionBroadcast::Full;
    auto f = build_amnn(c);
    EXPECT_EQ(f.parameter_count(), oracle::amnn_count(ib, 8, 3, ab, 8, 1, 32, 32).total);
    EXPECT_EQ(f.node_shape(kAttentionNode), (Shape{32}));

    const auto dflt = build_amnn(AmnnConfig{});
    const oracle::Backbone standard{{16, 32, 64, 64}, 3, 2, 4096};
    EXPECT_EQ(dflt.parameter_count(), oracle::amnn_count(standard, 128, 3, standard, 128, 1, 8192, 4).total);
    EXPECT_EQ(dflt.node_shape(kConcatNode), (Shape{8192}));
}

TEST(Amnn, OutputsAndAttentionAreDistributions) {
    auto g = build_amnn(small_amnn());
    g.initialize(10);
    ASSERT_EQ(g.outputs().size(), 3u);
    const Feed feed{{"image", random_batch(16, {8, 8, 3}, 11)}, {"audio", random_batch(16, {8, 8, 1}, 12)}};
    const auto out = g.predict(feed, {g.outputs()[0], g.outputs()[1], g.outputs()[2], kAttentionNode});
    for (const auto& name : g.outputs()) {
        expect_distributions(out.at(name), 4);
    }
    expect_distributions(out.at(kAttentionNode), 4);
}

TEST(Amnn, SegmentsMustDivideFusedWidth) {
    auto c = small_amnn();
    c.attention_width = 5;
    EXPECT_EQ(kind_of([&] { build_amnn(c); }), ErrorKind::Parameter);
    c.attention_width = 4;
    c.audio_shape = {9, 9, 1};
    EXPECT_EQ(kind_of([&] { build_amnn(c); }), ErrorKind::Shape);
}

TEST(Amnn, FullBroadcastIsElementwiseGating) {
    auto c = small_amnn();
    c.broadcast = AttentionBroadcast::Full;
    auto g = build_amnn(c);
    g.initialize(13);
    const Feed feed{{"image", random_batch(3, {8, 8, 3}, 14)}, {"audio", random_batch(3, {8, 8, 1}, 15)}};
    const auto out = g.predict(feed, {kConcatNode, kAttentionNode, "attended"});
    const auto& f = out.at(kConcatNode);
    const auto& w = out.at(kAttentionNode);
    const auto& a = out.at("attended");
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_EQ(a[i], f[i] * w[i]);
    }
}

TEST(Amnn, UniformAttentionReducesToScaledConcat) {
    const auto c = small_amnn();
    auto amnn = build_amnn(c);
    amnn.initialize(16);
    for (auto& p : amnn.parameters()) {
        if (p.name == "attention_logits/kernel") {
            p.parameter->value.fill(0.0);
        } else if (p.name == "attention_logits/bias") {
            p.parameter->value.fill(0.37);
        }
    }

    // The same network without attention: concat feeds the fused head
    // directly, with the first fused kernel scaled by 1/k.
    NetworkGraph plain;
    plain.add_input("image", c.image_shape);
    plain.add_input("audio", c.audio_shape);
    const auto fi = add_backbone(plain, "img_backbone_", "image", c.image_backbone);
    const auto fa = add_backbone(plain, "aud_backbone_", "audio", c.audio_backbone);
    plain.add("fusion_concat", LayerSpec::concat(), {fi, fa});
    plain.add("fused_dense1", LayerSpec::dense(32), {"fusion_concat"});
    plain.add("fused_dense1_relu", LayerSpec::relu(), {"fused_dense1"});
    plain.add("fused_dense2", LayerSpec::dense(16), {"fused_dense1_relu"});
    plain.add("fused_dense2_relu", LayerSpec::relu(), {"fused_dense2"});
    plain.add("fused_logits", LayerSpec::dense(4), {"fused_dense2_relu"});
    plain.add("fused_probs", LayerSpec::softmax(), {"fused_logits"});
    plain.set_outputs({"fused_probs"});

    std::map<std::string, const Tensor*> source;
    for (const auto& p : amnn.parameters()) {
        source[p.name] = &p.parameter->value;
    }
    for (auto& p : plain.parameters()) {
        ASSERT_TRUE(source.count(p.name)) << p.name;
        p.parameter->value = *source[p.name];
        if (p.name == "fused_dense1/kernel") {
            for (auto& v : p.parameter->value.values()) {
                v /= 4.0;
            }
        }
    }

    const Feed feed{{"image", random_batch(6, {8, 8, 3}, 17)}, {"audio", random_batch(6, {8, 8, 1}, 18)}};
    const auto got = amnn.predict(feed, {"fused_probs", kAttentionNode});
    for (double w : got.at(kAttentionNode).values()) {
        EXPECT_DOUBLE_EQ(w, 0.25);
    }
    const auto want = plain.predict(feed).at("fused_probs");
    const auto& have = got.at("fused_probs");
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(have[i], want[i], 1e-12);
    }
}

// Images carry a bright quadrant per class, audio is uniform noise.
Dataset image_signal_only(std::size_t per_class, Rng& rng) {
    constexpr std::size_t side = 8;
    Dataset d;
    d.n_classes = 4;
    const std::size_t n = per_class * 4;
    Tensor img({n, side, side, 3});
    Tensor aud({n, side, side, 1});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 4;
        d.labels.push_back(c);
        for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
                const std::size_t q = (y >= side / 2) * 2 + (x >= side / 2);
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    img[((i * side + y) * side + x) * 3 + ch] =
                        std::clamp((q == c ? 0.7 : 0.3) + 0.15 * rng.normal(), 0.0, 1.0);
                }
                aud[(i * side + y) * side + x] = rng.uniform();
            }
        }
    }
    d.inputs["image"] = img;
    d.inputs["audio"] = aud;
    return d;
}

TEST(Amnn, SilencedAudioMovesAttentionToImageSegments) {
    BackboneConfig b;
    b.filters = {8, 16};
    b.feature_dim = 64;
    double mass = 0.0;
    std::size_t argmax_image = 0, total = 0;
    const std::uint64_t seeds = 3;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        Rng rng(seed);
        const auto train_set = image_signal_only(40, rng);
        const auto test_set = image_signal_only(25, rng);
        AmnnConfig c;
        c.image_shape = {8, 8, 3};
        c.audio_shape = {8, 8, 1};
        c.image_backbone = b;
        c.audio_backbone = b;
        auto g = build_amnn(c);
        g.initialize(seed);
        Optimizer opt(OptimizerConfig::adam(1e-3));
        TrainOptions o;
        o.epochs = 60;
        o.batch_size = 16;
        o.patience = 1000;
        o.seed = seed;
        LossSpec loss;
        loss.kind = LossKind::MultimodalWeighted;
        train(g, train_set, nullptr, loss, opt, o);
        EXPECT_GE(evaluate(g, test_set, loss).accuracy, 0.95);

        const Feed feed{{"image", test_set.inputs.at("image")},
                        {"audio", Tensor(test_set.inputs.at("audio").shape())}};
        const auto a = g.predict(feed, {kAttentionNode}).at(kAttentionNode);
        const std::size_t k = a.shape().back();
        for (std::size_t i = 0; i < test_set.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j) {
                if (a[i * k + j] > a[i * k + best]) {
                    best = j;
                }
            }
            argmax_image += best < k / 2;
            for (std::size_t j = 0; j < k / 2; ++j) {
                mass += a[i * k + j];
            }
            ++total;
        }
    }
    // Attention may still park one class on a silent segment, so only the
    // average shift is asserted; the argmax share is reported.
    const double mean_mass = mass / static_cast<double>(total);
    RecordProperty("image_argmax_share", std::to_string(static_cast<double>(argmax_image) / total));
    std::printf("image-segment mass %.3f, argmax share %.3f\n", mean_mass,
                static_cast<double>(argmax_image) / static_cast<double>(total));
    EXPECT_GT(mean_mass, 0.5);
}

TEST(Recipes, NamesAndMetadata) {
    EXPECT_EQ(recipe_names(), (std::vector<std::string>{"audio-detector-1d", "visual-cnn", "audio-cnn2d", "audio-lstm",
                                                        "transfer-head", "amnn"}));
    EXPECT_EQ(build_visual_health_cnn(8, 8).metadata().at("recipe"), "visual-cnn");
    EXPECT_EQ(build_amnn(small_amnn()).metadata().at("recipe"), "amnn");
}

}  // namespace
