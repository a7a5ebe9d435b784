#pragma once

#include <vector>

#include "beesense/ingest/yolo.hpp"

namespace beesense::eval {

using ingest::PixelBox;

/// Intersection over union. Boxes with zero or negative area raise a domain
/// error.
double iou(const PixelBox& a, const PixelBox& b);

struct Detection {
    PixelBox box;
    double score = 0.0;
    int class_id = 0;
};

struct GroundTruth {
    PixelBox box;
    int class_id = 0;
};

/// Truths and predictions of one image; matching never crosses images.
struct ImageDetections {
    std::vector<GroundTruth> truths;
    std::vector<Detection> predictions;
};

/// Precision/recall after each prediction in descending-score order.
struct PrCurve {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<bool> true_positive;
    std::size_t n_truths = 0;
};

/// Predictions of `class_id` are taken by descending score (ties keep input
/// order) and each is matched to the highest-IoU unmatched truth of the same
/// image and class with IoU >= threshold.
PrCurve precision_recall(const std::vector<ImageDetections>& images, double iou_threshold, int class_id);

/// Area under the all-points interpolated precision envelope. No truths: 0.
double average_precision(const PrCurve& curve);
double average_precision(const std::vector<ImageDetections>& images, double iou_threshold, int class_id = 0);
/// Single image, single class.
double average_precision(const std::vector<Detection>& predictions, const std::vector<PixelBox>& truths,
                         double iou_threshold);

/// 0.50, 0.55, ..., 0.95.
std::vector<double> default_iou_thresholds();

struct MapResult {
    std::vector<double> thresholds;
    std::vector<double> map_at;  // mean AP over classes at each threshold
    double map50 = 0.0;          // at IoU 0.5, whether or not listed
    double map_range = 0.0;      // mean of map_at
    double precision50 = 0.0;    // over all predictions at IoU 0.5
    double recall50 = 0.0;
    std::vector<int> classes;
};

/// Classes are the union of truth and prediction class ids. An empty
/// threshold list raises a parameter error.
MapResult mean_average_precision(const std::vector<ImageDetections>& images,
                                 const std::vector<double>& thresholds = default_iou_thresholds());

/// Converts YOLO labels/predictions of one image to pixel-space records.
ImageDetections to_image_detections(const std::vector<ingest::BBoxAnnotation>& truths,
                                    const std::vector<ingest::ScoredAnnotation>& predictions, double width,
                                    double height);

}  // namespace beesense::eval
