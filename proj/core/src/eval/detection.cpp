#include "beesense/eval/detection.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "beesense/error.hpp"

namespace beesense::eval {
namespace {

void check_box(const PixelBox& b) {
    if (!(b.x2 > b.x1) || !(b.y2 > b.y1)) {
        fail(ErrorKind::Domain, "degenerate box (" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                                    std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")");
    }
}

}  // namespace

double iou(const PixelBox& a, const PixelBox& b) {
    check_box(a);
    check_box(b);
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

PrCurve precision_recall(const std::vector<ImageDetections>& images, double iou_threshold, int class_id) {
    struct Ref {
        std::size_t image;
        std::size_t index;
        double score;
    };
    std::vector<Ref> order;
    std::vector<std::vector<std::size_t>> truths(images.size());
    PrCurve curve;
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (std::size_t j = 0; j < images[i].predictions.size(); ++j) {
            const auto& p = images[i].predictions[j];
            if (p.class_id == class_id) {
                order.push_back({i, j, p.score});
            }
        }
        for (std::size_t j = 0; j < images[i].truths.size(); ++j) {
            if (images[i].truths[j].class_id == class_id) {
                truths[i].push_back(j);
                ++curve.n_truths;
            }
        }
    }
    std::stable_sort(order.begin(), order.end(), [](const Ref& a, const Ref& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> matched(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        matched[i].assign(images[i].truths.size(), false);
    }
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& ref = order[k];
        const PixelBox& box = images[ref.image].predictions[ref.index].box;
        double best = -1.0;
        std::size_t best_j = 0;
        for (auto j : truths[ref.image]) {
            if (matched[ref.image][j]) {
                continue;
            }
            const double o = iou(box, images[ref.image].truths[j].box);
            if (o >= iou_threshold && o > best) {
                best = o;
                best_j = j;
            }
        }
        const bool hit = best >= 0.0;
        if (hit) {
            matched[ref.image][best_j] = true;
            ++tp;
        }
        curve.true_positive.push_back(hit);
        curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        curve.recall.push_back(curve.n_truths ? static_cast<double>(tp) / static_cast<double>(curve.n_truths) : 0.0);
    }
    return curve;
}

double average_precision(const PrCurve& curve) {
    if (curve.n_truths == 0 || curve.precision.empty()) {
        return 0.0;
    }
    // Precision envelope: running maximum from the right.
    std::vector<double> envelope(curve.precision);
    for (std::size_t i = envelope.size() - 1; i-- > 0;) {
        envelope[i] = std::max(envelope[i], envelope[i + 1]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < envelope.size(); ++i) {
        ap += (curve.recall[i] - prev_recall) * envelope[i];
        prev_recall = curve.recall[i];
    }
    return ap;
}

double average_precision(const std::vector<ImageDetections>& images, double iou_threshold, int class_id) {
    return average_precision(precision_recall(images, iou_threshold, class_id));
}

double average_precision(const std::vector<Detection>& predictions, const std::vector<PixelBox>& truths,
                         double iou_threshold) {
    ImageDetections image;
    image.predictions = predictions;
    for (auto& p : image.predictions) {
        p.class_id = 0;
    }
    for (const auto& t : truths) {
        image.truths.push_back({t, 0});
    }
    return average_precision({image}, iou_threshold, 0);
}

std::vector<double> default_iou_thresholds() {
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) {
        out.push_back(static_cast<double>(50 + 5 * i) / 100.0);
    }
    return out;
}

MapResult mean_average_precision(const std::vector<ImageDetections>& images, const std::vector<double>& thresholds) {
    if (thresholds.empty()) {
        fail(ErrorKind::Parameter, "mAP needs at least one IoU threshold");
    }
    for (double t : thresholds) {
        if (!(t > 0.0 && t <= 1.0)) {
            fail(ErrorKind::Parameter, "IoU thresholds must lie in (0, 1]");
        }
    }
    std::set<int> classes;
    for (const auto& img : images) {
        for (const auto& t : img.truths) {
            classes.insert(t.class_id);
        }
        for (const auto& p : img.predictions) {
            classes.insert(p.class_id);
        }
    }
    MapResult out;
    out.thresholds = thresholds;
    out.classes.assign(classes.begin(), classes.end());
    auto mean_ap = [&](double thr) {
        if (classes.empty()) {
            return 0.0;
        }
        double total = 0.0;
        for (int c : classes) {
            total += average_precision(images, thr, c);
        }
        return total / static_cast<double>(classes.size());
    };
    for (double t : thresholds) {
        out.map_at.push_back(mean_ap(t));
    }
    out.map_range = std::accumulate(out.map_at.begin(), out.map_at.end(), 0.0) / static_cast<double>(thresholds.size());
    out.map50 = mean_ap(0.5);

    std::size_t tp = 0;
    std::size_t n_pred = 0;
    std::size_t n_truth = 0;
    for (int c : classes) {
        const auto curve = precision_recall(images, 0.5, c);
        tp += static_cast<std::size_t>(std::count(curve.true_positive.begin(), curve.true_positive.end(), true));
        n_pred += curve.true_positive.size();
        n_truth += curve.n_truths;
    }
    out.precision50 = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
    out.recall50 = n_truth ? static_cast<double>(tp) / static_cast<double>(n_truth) : 0.0;
    return out;
}

ImageDetections to_image_detections(const std::vector<ingest::BBoxAnnotation>& truths,
                                    const std::vector<ingest::ScoredAnnotation>& predictions, double width,
                                    double height) {
    ImageDetections out;
    for (const auto& t : truths) {
        out.truths.push_back({ingest::to_pixel_box(t, width, height), t.class_id});
    }
    for (const auto& p : predictions) {
        out.predictions.push_back({ingest::to_pixel_box(p.box, width, height), p.score, p.box.class_id});
    }
    return out;
}

}  // namespace beesense::eval
