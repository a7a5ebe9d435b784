#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "beesense/eval/classification.hpp"
#include "beesense/eval/crossval.hpp"
#include "beesense/eval/detection.hpp"
#include "beesense/eval/report.hpp"
#include "beesense/eval/timing.hpp"
#include "beesense/rng.hpp"
#include "oracles/detection_oracle.hpp"
#include "support/expect_error.hpp"

namespace {

using namespace beesense;
using namespace beesense::eval;
using support::kind_of;

PixelBox to_pixel(const oracle::IntBox& b) { return {double(b.x1), double(b.y1), double(b.x2), double(b.y2)}; }

oracle::IntBox random_box(Rng& rng, int extent = 20) {
    const int x1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(extent)));
    const int y1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(extent)));
    const int w = 1 + static_cast<int>(rng.below(10));
    const int h = 1 + static_cast<int>(rng.below(10));
    return {x1, y1, x1 + w, y1 + h};
}

// ---- IoU ----

TEST(Iou, Examples) {
    const PixelBox a{0, 0, 2, 2}, b{1, 1, 3, 3}, far{5, 5, 6, 6};
    EXPECT_EQ(iou(a, a), 1.0);
    EXPECT_EQ(iou(a, far), 0.0);
    EXPECT_NEAR(iou(a, b), 1.0 / 7.0, 1e-15);
    EXPECT_EQ(kind_of([&] { iou(a, PixelBox{1, 1, 1, 4}); }), ErrorKind::Domain);
}

TEST(Iou, MatchesPixelGridOracle) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_box(rng), b = random_box(rng);
        const double v = iou(to_pixel(a), to_pixel(b));
        EXPECT_EQ(v, oracle::pixel_iou(a, b));
        EXPECT_EQ(v, iou(to_pixel(b), to_pixel(a)));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

// ---- AP ----

TEST(AveragePrecision, PerfectAndEmpty) {
    const std::vector<PixelBox> truths{{0, 0, 4, 4}, {10, 10, 14, 12}};
    const std::vector<Detection> perfect{{truths[0], 0.3, 0}, {truths[1], 0.9, 0}};
    EXPECT_EQ(average_precision(perfect, truths, 0.5), 1.0);
    EXPECT_EQ(average_precision({}, truths, 0.5), 0.0);
    EXPECT_EQ(average_precision(perfect, {}, 0.5), 0.0);
}

TEST(AveragePrecision, ThreePredictionsTwoTruths) {
    // Top prediction is a miss, the next two hit: precision 0, 1/2, 2/3 at
    // recall 0, 1/2, 1. Envelope gives 2/3 over the whole recall range.
    const std::vector<PixelBox> truths{{0, 0, 4, 4}, {10, 10, 14, 14}};
    const std::vector<Detection> preds{{{20, 20, 22, 22}, 0.9, 0}, {{0, 0, 4, 4}, 0.8, 0}, {{10, 10, 14, 14}, 0.7, 0}};
    EXPECT_NEAR(average_precision(preds, truths, 0.5), 2.0 / 3.0, 1e-15);
}

TEST(AveragePrecision, MatchesOracleOverAllInputOrders) {
    Rng rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n_truth = 1 + rng.below(4);
        const std::size_t n_pred = rng.below(7);
        std::vector<oracle::IntBox> truths;
        for (std::size_t j = 0; j < n_truth; ++j) {
            truths.push_back(random_box(rng, 12));
        }
        std::vector<oracle::ScoredBox> preds;
        for (std::size_t i = 0; i < n_pred; ++i) {
            // Half the predictions are jittered copies of a truth.
            oracle::IntBox b = random_box(rng, 12);
            if (rng.uniform() < 0.5) {
                b = truths[rng.below(n_truth)];
                b.x2 += static_cast<int>(rng.below(3));
                b.y1 -= static_cast<int>(rng.below(2));
            }
            preds.push_back({b, (static_cast<double>(i) + rng.uniform()) / 10.0});
        }
        for (double thr : {0.3, 0.5, 0.75}) {
            const double want = oracle::average_precision(preds, truths, thr);
            std::vector<std::size_t> t_order(n_truth);
            std::iota(t_order.begin(), t_order.end(), 0);
            do {
                std::vector<PixelBox> t;
                for (auto j : t_order) {
                    t.push_back(to_pixel(truths[j]));
                }
                std::vector<Detection> p;
                for (const auto& sp : preds) {
                    p.push_back({to_pixel(sp.box), sp.score, 0});
                }
                std::reverse(p.begin(), p.end());
                EXPECT_NEAR(average_precision(p, t, thr), want, 1e-12);
            } while (std::next_permutation(t_order.begin(), t_order.end()));
        }
    }
}

TEST(AveragePrecision, RankOnlyDependence) {
    Rng rng(3);
    std::vector<PixelBox> truths;
    std::vector<Detection> preds;
    for (int j = 0; j < 5; ++j) {
        const auto b = random_box(rng);
        truths.push_back(to_pixel(b));
        preds.push_back({to_pixel(b), rng.uniform(0.1, 0.9), 0});
        preds.push_back({to_pixel(random_box(rng)), rng.uniform(0.1, 0.9), 0});
    }
    const double base = average_precision(preds, truths, 0.5);
    for (double scale : {0.01, 0.5, 1.1}) {
        auto scaled = preds;
        for (auto& p : scaled) {
            p.score *= scale;
        }
        EXPECT_EQ(average_precision(scaled, truths, 0.5), base);
    }
}

// ---- mAP ----

std::vector<ImageDetections> iou_point_six_fixture() {
    // Each prediction covers 6 of 10 columns of its truth: IoU = 60/100.
    std::vector<ImageDetections> images;
    for (int i = 0; i < 4; ++i) {
        ImageDetections img;
        const double o = 20.0 * i;
        img.truths.push_back({{o, o, o + 10, o + 10}, 0});
        img.predictions.push_back({{o, o, o + 6, o + 10}, 0.5 + 0.1 * i, 0});
        images.push_back(img);
    }
    return images;
}

TEST(MeanAveragePrecision, IouPointSixFixture) {
    const auto images = iou_point_six_fixture();
    EXPECT_EQ(iou(images[0].truths[0].box, images[0].predictions[0].box), 0.6);
    const auto r = mean_average_precision(images);
    ASSERT_EQ(r.thresholds.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(r.map_at[i], i <= 2 ? 1.0 : 0.0) << r.thresholds[i];
    }
    EXPECT_EQ(r.map_range, 0.3);
    EXPECT_EQ(r.map50, 1.0);
}

TEST(MeanAveragePrecision, ThresholdsAndSingleClass) {
    const auto t = default_iou_thresholds();
    ASSERT_EQ(t.size(), 10u);
    EXPECT_EQ(t.front(), 0.5);
    EXPECT_EQ(t[2], 0.6);
    EXPECT_EQ(t.back(), 0.95);
    Rng rng(4);
    ImageDetections img;
    for (int j = 0; j < 4; ++j) {
        const auto b = random_box(rng);
        img.truths.push_back({to_pixel(b), 0});
        img.predictions.push_back({to_pixel(b), rng.uniform(), 0});
        img.predictions.push_back({to_pixel(random_box(rng)), rng.uniform(), 0});
    }
    const auto r = mean_average_precision({img}, {0.5, 0.7});
    EXPECT_EQ(r.map_at[0], average_precision(img.predictions, [&] {
                  std::vector<PixelBox> v;
                  for (const auto& g : img.truths) v.push_back(g.box);
                  return v;
              }(), 0.5));
    EXPECT_EQ(kind_of([&] { mean_average_precision({img}, {}); }), ErrorKind::Parameter);
}

TEST(MeanAveragePrecision, PerfectDetectionsGiveOne) {
    ImageDetections img;
    img.truths = {{{0, 0, 5, 5}, 0}, {{7, 7, 9, 9}, 0}};
    img.predictions = {{{0, 0, 5, 5}, 0.2, 0}, {{7, 7, 9, 9}, 0.4, 0}};
    const auto r = mean_average_precision({img});
    EXPECT_EQ(r.map_range, 1.0);
    EXPECT_EQ(r.precision50, 1.0);
    EXPECT_EQ(r.recall50, 1.0);
}

TEST(MeanAveragePrecision, MatchingStaysWithinImages) {
    ImageDetections a, b;
    a.truths = {{{0, 0, 4, 4}, 0}};
    b.predictions = {{{0, 0, 4, 4}, 0.9, 0}};
    EXPECT_EQ(mean_average_precision({a, b}).map50, 0.0);
}

TEST(MeanAveragePrecision, FromYolo) {
    const auto img = to_image_detections({{0, 0.5, 0.5, 0.2, 0.2}}, {{{0, 0.5, 0.5, 0.2, 0.2}, 0.9}}, 100, 50);
    ASSERT_EQ(img.truths.size(), 1u);
    EXPECT_NEAR(img.truths[0].box.x1, 40.0, 1e-12);
    EXPECT_NEAR(img.truths[0].box.y2, 30.0, 1e-12);
    EXPECT_EQ(mean_average_precision({img}).map_range, 1.0);
}

// ---- classification ----

TEST(Classification, DiagonalIsPerfect) {
    ConfusionMatrix cm(4);
    for (std::size_t i = 0; i < 4; ++i) {
        cm.add(i, i, 3 + i);
    }
    const auto r = classification_metrics(cm);
    EXPECT_EQ(r.accuracy, 1.0);
    for (const auto& c : r.per_class) {
        EXPECT_EQ(c.f1, 1.0);
    }
}

TEST(Classification, HandFixtureF1) {
    // Class 0: 4 hits, 1 false alarm, 4 misses: precision .8, recall .5.
    ConfusionMatrix cm(2);
    cm.add(0, 0, 4);
    cm.add(0, 1, 4);
    cm.add(1, 0, 1);
    cm.add(1, 1, 6);
    const auto r = classification_metrics(cm);
    EXPECT_NEAR(r.per_class[0].precision, 0.8, 1e-15);
    EXPECT_NEAR(r.per_class[0].recall, 0.5, 1e-15);
    EXPECT_NEAR(r.per_class[0].f1, 0.61538, 1e-5);
    EXPECT_NEAR(r.per_class[0].f1, 2.0 * 0.4 / 1.3, 1e-15);
}

TEST(Classification, BinaryAccuracy) {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 50);
    cm.add(0, 1, 10);
    cm.add(1, 0, 5);
    cm.add(1, 1, 35);
    EXPECT_EQ(classification_metrics(cm).accuracy, 0.85);
}

TEST(Classification, ZeroDivisionAndEmpty) {
    ConfusionMatrix cm(3);
    cm.add(0, 0, 2);
    cm.add(1, 0, 1);
    const auto r = classification_metrics(cm);
    EXPECT_EQ(r.per_class[1].precision, 0.0);
    EXPECT_TRUE(r.per_class[1].zero_division);
    EXPECT_TRUE(r.per_class[2].zero_division);
    EXPECT_EQ(r.per_class[2].f1, 0.0);
    EXPECT_EQ(kind_of([] { classification_metrics(ConfusionMatrix(4)); }), ErrorKind::EmptyInput);
}

TEST(Classification, RandomMatrixProperties) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(4);
        ConfusionMatrix cm(n);
        std::size_t total = 0, trace = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t c = rng.below(30);
                cm.add(i, j, c);
                total += c;
                trace += i == j ? c : 0;
            }
        }
        if (total == 0) {
            continue;
        }
        const auto r = classification_metrics(cm);
        EXPECT_EQ(r.accuracy, static_cast<double>(trace) / static_cast<double>(total));
        EXPECT_EQ(r.total, total);
        double lo = 1.0, hi = 0.0, wsum = 0.0;
        std::size_t support = 0;
        for (const auto& c : r.per_class) {
            for (double v : {c.precision, c.recall, c.f1}) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
            if (c.support > 0) {
                lo = std::min(lo, c.f1);
                hi = std::max(hi, c.f1);
            }
            wsum += c.f1 * static_cast<double>(c.support);
            support += c.support;
        }
        EXPECT_EQ(support, total);
        EXPECT_GE(r.weighted_f1, lo - 1e-12);
        EXPECT_LE(r.weighted_f1, hi + 1e-12);
        EXPECT_NEAR(r.weighted_f1, wsum / static_cast<double>(total), 1e-12);
    }
}

TEST(Classification, FromPredictionsAndComplementarity) {
    const std::vector<std::size_t> truth{0, 1, 2, 3, 0, 1};
    const std::vector<std::size_t> a{0, 1, 0, 0, 0, 2};  // wrong on 2, 3, 5
    const std::vector<std::size_t> b{1, 1, 2, 3, 0, 0};  // right on 2 and 3 of those
    const auto cm = ConfusionMatrix::from_predictions(truth, a, 4);
    EXPECT_EQ(cm.total(), 6u);
    EXPECT_EQ(cm.trace(), 3u);
    EXPECT_NEAR(complementarity(truth, a, b), 2.0 / 3.0, 1e-15);
}

// ---- cross-validation ----

struct Blobs {
    nn::Dataset data;
    std::vector<std::string> ids;
};

Blobs blobs(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    Blobs b;
    b.data.n_classes = 3;
    nn::Tensor x({3 * per_class, 2});
    for (std::size_t i = 0; i < 3 * per_class; ++i) {
        const std::size_t c = i % 3;
        x.at(i, 0) = (c == 1 ? 3.0 : 0.0) + 0.4 * rng.normal();
        x.at(i, 1) = (c == 2 ? 3.0 : 0.0) + 0.4 * rng.normal();
        b.data.labels.push_back(c);
        b.ids.push_back("s" + std::to_string(1000 + i));
    }
    b.data.inputs["x"] = x;
    return b;
}

nn::NetworkGraph tiny_model() {
    nn::NetworkGraph g;
    g.add_input("x", {2});
    g.add("h", nn::LayerSpec::dense(8, nn::Init::HeUniform), {"x"});
    g.add("r", nn::LayerSpec::relu(), {"h"});
    g.add("o", nn::LayerSpec::dense(3), {"r"});
    g.add("p", nn::LayerSpec::softmax(), {"o"});
    g.set_outputs({"p"});
    return g;
}

CrossValOptions cv_options() {
    CrossValOptions o;
    o.k = 5;
    o.seed = 11;
    o.train.epochs = 15;
    o.train.batch_size = 8;
    o.optimizer = nn::OptimizerConfig::adam(0.05);
    return o;
}

TEST(CrossValidation, EverySampleTestedOnce) {
    const auto b = blobs(10, 1);
    const auto r = run_cross_validation(tiny_model, b.data, b.ids, cv_options());
    ASSERT_EQ(r.folds.size(), 5u);
    std::multiset<std::string> seen;
    for (const auto& f : r.folds) {
        seen.insert(f.test_ids.begin(), f.test_ids.end());
        EXPECT_EQ(f.n_train + f.n_val + f.n_test, 30u);
        EXPECT_EQ(f.truth.size(), f.n_test);
    }
    EXPECT_EQ(seen, std::multiset<std::string>(b.ids.begin(), b.ids.end()));
    EXPECT_GT(r.accuracy.mean, 0.8);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(CrossValidation, RowOrderDoesNotMatter) {
    const auto b = blobs(8, 2);
    const auto first = run_cross_validation(tiny_model, b.data, b.ids, cv_options());

    std::vector<std::size_t> perm(b.ids.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(99);
    rng.shuffle(std::span<std::size_t>(perm));
    Blobs s;
    s.data.n_classes = 3;
    s.data.inputs["x"] = b.data.inputs.at("x").gather(perm);
    for (auto i : perm) {
        s.data.labels.push_back(b.data.labels[i]);
        s.ids.push_back(b.ids[i]);
    }
    const auto second = run_cross_validation(tiny_model, s.data, s.ids, cv_options());
    ASSERT_EQ(first.folds.size(), second.folds.size());
    for (std::size_t f = 0; f < first.folds.size(); ++f) {
        EXPECT_EQ(first.folds[f].test_ids, second.folds[f].test_ids);
        EXPECT_EQ(first.folds[f].predicted, second.folds[f].predicted);
        EXPECT_EQ(first.folds[f].test_loss, second.folds[f].test_loss);
    }
    EXPECT_EQ(first.accuracy.mean, second.accuracy.mean);
}

TEST(CrossValidation, MissingClassWarns) {
    auto b = blobs(4, 3);
    // Class 2 keeps a single sample, so four of five folds never test it.
    std::vector<std::size_t> keep;
    bool kept_one = false;
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
        if (b.data.labels[i] != 2 || !kept_one) {
            kept_one = kept_one || b.data.labels[i] == 2;
            keep.push_back(i);
        }
    }
    nn::Dataset d;
    d.n_classes = 3;
    d.inputs["x"] = b.data.inputs.at("x").gather(keep);
    std::vector<std::string> ids;
    for (auto i : keep) {
        d.labels.push_back(b.data.labels[i]);
        ids.push_back(b.ids[i]);
    }
    auto o = cv_options();
    o.train.epochs = 2;
    const auto r = run_cross_validation(tiny_model, d, ids, o);
    EXPECT_EQ(r.folds.size(), 5u);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(MeanStd, IdenticalValues) {
    const auto m = mean_std({0.7, 0.7, 0.7});
    EXPECT_EQ(m.mean, 0.7);
    EXPECT_EQ(m.std, 0.0);
    const auto s = mean_std({1.0, 3.0});
    EXPECT_EQ(s.mean, 2.0);
    EXPECT_NEAR(s.std, std::sqrt(2.0), 1e-15);
}

// ---- timing ----

TEST(Timing, NonnegativeAndStable) {
    auto a = tiny_model();
    a.initialize(1);
    nn::NetworkGraph big;
    big.add_input("x", {2});
    big.add("h", nn::LayerSpec::dense(512), {"x"});
    big.add("h2", nn::LayerSpec::dense(512), {"h"});
    big.add("p", nn::LayerSpec::softmax(), {"h2"});
    big.set_outputs({"p"});
    big.initialize(2);
    Rng rng(3);
    nn::Tensor x({64, 2});
    for (auto& v : x.values()) {
        v = rng.normal();
    }
    std::vector<double> means;
    for (int run = 0; run < 5; ++run) {
        const auto r = measure_times({{"tiny", &a, {{"x", x}}, 1.5}, {"big", &big, {{"x", x}}, 0.0}}, 100);
        ASSERT_EQ(r.entries.size(), 2u);
        for (const auto& e : r.entries) {
            EXPECT_GE(e.inference_seconds, 0.0);
            EXPECT_GE(e.inference_stddev, 0.0);
            EXPECT_EQ(e.repetitions, 100u);
            EXPECT_EQ(e.batch_size, 64u);
        }
        EXPECT_EQ(r.entries[0].training_seconds, 1.5);
        EXPECT_FALSE(r.environment.empty());
        means.push_back(r.entries[1].inference_seconds);
    }
    const auto ms = mean_std(means);
    EXPECT_LT(ms.std / ms.mean, 0.25);
}

// ---- reports ----

TEST(Report, CsvSchemas) {
    ConfusionMatrix cm(2, {"no_bee", "bee"});
    cm.add(0, 0, 5);
    cm.add(1, 1, 4);
    cm.add(1, 0, 1);
    const auto m = classification_metrics(cm);
    const auto csv = classification_csv({{"cnn1d", "chroma", m}});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,feature,accuracy,precision,recall,f1,support");
    EXPECT_NE(csv.find("cnn1d,chroma,0.900000,"), std::string::npos);

    const auto pc = per_class_csv("cnn1d", m, cm.class_names());
    EXPECT_EQ(std::count(pc.begin(), pc.end(), '\n'), 3);

    const auto det = detection_csv({{"yolo", mean_average_precision(iou_point_six_fixture())}});
    EXPECT_EQ(det.substr(0, det.find('\n')), "model,precision,recall,map50,map50_95");
    EXPECT_NE(det.find(",0.300000"), std::string::npos);

    TimingReport t{{{"amnn", 2.0, 0.16, 0.01, 100, 8}}, "env"};
    EXPECT_NE(timing_csv(t).find("amnn,2.000000,0.160000"), std::string::npos);
    EXPECT_NE(timing_table(t).find("Inference Time (s)"), std::string::npos);

    const auto b = blobs(4, 5);
    auto o = cv_options();
    o.train.epochs = 1;
    const auto r = run_cross_validation(tiny_model, b.data, b.ids, o);
    const auto cv = crossval_csv("tiny", r);
    EXPECT_EQ(std::count(cv.begin(), cv.end(), '\n'), 1 + 5 + 2);
    EXPECT_NE(cv.find("tiny,mean,"), std::string::npos);
    EXPECT_NE(cv.find("tiny,std,"), std::string::npos);
    EXPECT_NE(crossval_table("tiny", r).find("+/-"), std::string::npos);
}

}  // namespace
