#include "beesense/ingest/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "beesense/error.hpp"

namespace beesense::ingest {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageSample decode_png(const std::vector<unsigned char>& bytes, const std::string& source) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        fail(ErrorKind::Format, "PNG " + source + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorKind::Format, "PNG " + source + ": " + msg);
    }
    ImageSample out;
    out.height = image.height;
    out.width = image.width;
    out.source_path = source;
    out.pixels.resize(buffer.size());
    std::transform(buffer.begin(), buffer.end(), out.pixels.begin(),
                   [](png_byte b) { return static_cast<double>(b) / 255.0; });
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

ImageSample decode_jpeg(std::vector<unsigned char>& bytes, const std::string& source) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;

    std::vector<unsigned char> buffer;
    std::size_t height = 0;
    std::size_t width = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorKind::Format, "JPEG " + source + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    height = cinfo.output_height;
    width = cinfo.output_width;
    buffer.resize(height * width * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    ImageSample out;
    out.height = height;
    out.width = width;
    out.source_path = source;
    out.pixels.resize(buffer.size());
    std::transform(buffer.begin(), buffer.end(), out.pixels.begin(),
                   [](unsigned char b) { return static_cast<double>(b) / 255.0; });
    return out;
}

}  // namespace

ImageSample load_image(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                     std::istreambuf_iterator<char>());
    if (bytes.empty()) {
        fail(ErrorKind::EmptyInput, "empty image file " + path.string());
    }
    static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    ImageSample image;
    if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) {
        image = decode_png(bytes, path.string());
    } else if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        image = decode_jpeg(bytes, path.string());
    } else {
        fail(ErrorKind::Unsupported, "not a PNG or JPEG file: " + path.string());
    }
    if (image.height == 0 || image.width == 0) {
        fail(ErrorKind::EmptyInput, "image has zero extent: " + path.string());
    }
    return image;
}

void write_png(const std::filesystem::path& path, const ImageSample& image) {
    require(image.height > 0 && image.width > 0, ErrorKind::Shape, "cannot write an empty image");
    require(image.pixels.size() == image.height * image.width * 3, ErrorKind::Shape,
            "pixel buffer does not match H x W x 3");
    std::vector<png_byte> buffer(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), buffer.begin(), [](double v) {
        return static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    });
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(image.width);
    out.height = static_cast<png_uint_32>(image.height);
    out.format = PNG_FORMAT_RGB;
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    if (!png_image_write_to_stdio(&out, file.get(), 0, buffer.data(), 0, nullptr)) {
        fail(ErrorKind::Io, std::string("PNG encode failed: ") + out.message);
    }
}

std::vector<double> resize_bilinear(const std::vector<double>& grid, std::size_t height,
                                    std::size_t width, std::size_t channels,
                                    std::size_t out_height, std::size_t out_width) {
    require(height > 0 && width > 0 && channels > 0, ErrorKind::Shape, "resize of an empty grid");
    require(out_height > 0 && out_width > 0, ErrorKind::Parameter, "resize target must be nonzero");
    require(grid.size() == height * width * channels, ErrorKind::Shape,
            "grid size does not match its dimensions");
    if (height == out_height && width == out_width) {
        return grid;
    }
    const double sy = static_cast<double>(height) / static_cast<double>(out_height);
    const double sx = static_cast<double>(width) / static_cast<double>(out_width);

    auto source_coord = [](std::size_t i, double scale, std::size_t extent, std::size_t& lo,
                           std::size_t& hi, double& frac) {
        double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
        lo = static_cast<std::size_t>(pos);
        hi = std::min(lo + 1, extent - 1);
        frac = pos - static_cast<double>(lo);
    };

    std::vector<double> out(out_height * out_width * channels);
    for (std::size_t y = 0; y < out_height; ++y) {
        std::size_t y0 = 0, y1 = 0;
        double fy = 0.0;
        source_coord(y, sy, height, y0, y1, fy);
        for (std::size_t x = 0; x < out_width; ++x) {
            std::size_t x0 = 0, x1 = 0;
            double fx = 0.0;
            source_coord(x, sx, width, x0, x1, fx);
            for (std::size_t c = 0; c < channels; ++c) {
                const double a = grid[(y0 * width + x0) * channels + c];
                const double b = grid[(y0 * width + x1) * channels + c];
                const double d = grid[(y1 * width + x0) * channels + c];
                const double e = grid[(y1 * width + x1) * channels + c];
                const double top = a + (b - a) * fx;
                const double bottom = d + (e - d) * fx;
                out[(y * out_width + x) * channels + c] = top + (bottom - top) * fy;
            }
        }
    }
    return out;
}

ImageSample resize_bilinear(const ImageSample& image, std::size_t out_height,
                            std::size_t out_width) {
    ImageSample out;
    out.height = out_height;
    out.width = out_width;
    out.source_path = image.source_path;
    out.pixels = resize_bilinear(image.pixels, image.height, image.width, 3, out_height, out_width);
    return out;
}

}  // namespace beesense::ingest
