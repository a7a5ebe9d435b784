#include "beesense/ingest/yolo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "beesense/error.hpp"

namespace beesense::ingest {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

double parse_number(std::string_view token, std::size_t line_no) {
    double value = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": non-numeric token '" +
                                   std::string(token) + "'");
    }
    return value;
}

BBoxAnnotation parse_box(const std::vector<std::string_view>& fields, std::size_t line_no) {
    const double id = parse_number(fields[0], line_no);
    if (id < 0.0 || id != std::floor(id)) {
        fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": class id must be a nonnegative integer");
    }
    BBoxAnnotation box;
    box.class_id = static_cast<int>(id);
    box.cx = parse_number(fields[1], line_no);
    box.cy = parse_number(fields[2], line_no);
    box.w = parse_number(fields[3], line_no);
    box.h = parse_number(fields[4], line_no);
    for (double v : {box.cx, box.cy, box.w, box.h}) {
        if (v < 0.0 || v > 1.0) {
            fail(ErrorKind::Range, "line " + std::to_string(line_no) + ": coordinate outside [0,1]");
        }
    }
    if (box.w <= 0.0 || box.h <= 0.0) {
        fail(ErrorKind::Range, "line " + std::to_string(line_no) + ": box width and height must be positive");
    }
    return box;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        auto fields = split_ws(line);
        if (!fields.empty()) {
            fn(fields, line_no);
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    std::stringstream ss;
    ss << file.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<BBoxAnnotation> parse_yolo_labels(std::string_view text) {
    std::vector<BBoxAnnotation> out;
    for_each_line(text, [&](const std::vector<std::string_view>& fields, std::size_t line_no) {
        if (fields.size() != 5) {
            fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                                       std::to_string(fields.size()));
        }
        out.push_back(parse_box(fields, line_no));
    });
    return out;
}

std::vector<ScoredAnnotation> parse_yolo_predictions(std::string_view text) {
    std::vector<ScoredAnnotation> out;
    for_each_line(text, [&](const std::vector<std::string_view>& fields, std::size_t line_no) {
        if (fields.size() != 6) {
            fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 6 fields, got " +
                                       std::to_string(fields.size()));
        }
        ScoredAnnotation pred;
        pred.box = parse_box(fields, line_no);
        pred.score = parse_number(fields[5], line_no);
        if (pred.score < 0.0 || pred.score > 1.0) {
            fail(ErrorKind::Range, "line " + std::to_string(line_no) + ": score outside [0,1]");
        }
        out.push_back(pred);
    });
    return out;
}

std::vector<BBoxAnnotation> read_yolo_labels(const std::filesystem::path& path) {
    return parse_yolo_labels(slurp(path));
}

std::vector<ScoredAnnotation> read_yolo_predictions(const std::filesystem::path& path) {
    return parse_yolo_predictions(slurp(path));
}

std::string format_yolo_line(const BBoxAnnotation& box) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", box.class_id, box.cx, box.cy, box.w, box.h);
    return buf;
}

PixelBox to_pixel_box(const BBoxAnnotation& box, double image_width, double image_height) {
    require(image_width > 0.0 && image_height > 0.0, ErrorKind::Parameter, "image size must be positive");
    PixelBox out;
    out.x1 = std::clamp((box.cx - box.w / 2.0) * image_width, 0.0, image_width);
    out.x2 = std::clamp((box.cx + box.w / 2.0) * image_width, 0.0, image_width);
    out.y1 = std::clamp((box.cy - box.h / 2.0) * image_height, 0.0, image_height);
    out.y2 = std::clamp((box.cy + box.h / 2.0) * image_height, 0.0, image_height);
    return out;
}

}  // namespace beesense::ingest
