#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace beesense::ingest {

/// One YOLO label line: class id and centre/size normalised to the image.
struct BBoxAnnotation {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const BBoxAnnotation&) const = default;
};

/// A YOLO line with a trailing confidence, as written by detectors.
struct ScoredAnnotation {
    BBoxAnnotation box;
    double score = 0.0;
};

/// Absolute corners, x1 < x2 and y1 < y2.
struct PixelBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double area() const { return (x2 - x1) * (y2 - y1); }
};

std::vector<BBoxAnnotation> parse_yolo_labels(std::string_view text);
std::vector<ScoredAnnotation> parse_yolo_predictions(std::string_view text);

std::vector<BBoxAnnotation> read_yolo_labels(const std::filesystem::path& path);
std::vector<ScoredAnnotation> read_yolo_predictions(const std::filesystem::path& path);

/// "class cx cy w h" with six decimals.
std::string format_yolo_line(const BBoxAnnotation& box);

/// Converts to pixel corners, clipped to [0, width] x [0, height].
PixelBox to_pixel_box(const BBoxAnnotation& box, double image_width, double image_height);

}  // namespace beesense::ingest
