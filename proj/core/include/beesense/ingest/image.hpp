#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace beesense::ingest {

inline constexpr std::size_t kHealthImageSize = 128;

/// Row-major H x W x 3 intensities in [0, 1].
struct ImageSample {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;
    std::string source_path;

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
};

/// PNG or JPEG, chosen by signature bytes. Gray and alpha inputs are
/// expanded/dropped to RGB.
ImageSample load_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const ImageSample& image);

/// Half-pixel-centre bilinear resampling of an interleaved grid.
std::vector<double> resize_bilinear(const std::vector<double>& grid, std::size_t height,
                                    std::size_t width, std::size_t channels,
                                    std::size_t out_height, std::size_t out_width);

ImageSample resize_bilinear(const ImageSample& image, std::size_t out_height,
                            std::size_t out_width);

}  // namespace beesense::ingest
