#include "beesense/dsp/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iterator>

#include "beesense/dsp/chroma.hpp"
#include "beesense/dsp/mel.hpp"
#include "beesense/error.hpp"
#include "beesense/ingest/image.hpp"

namespace beesense::dsp {
namespace {

constexpr char kMagic[8] = {'B', 'S', 'F', 'E', 'A', 'T', '0', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t& pos, std::size_t width) {
    if (pos + width > bytes.size()) {
        fail(ErrorKind::Format, "truncated feature record");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    }
    pos += width;
    return v;
}

void min_max_scale(std::vector<double>& values) {
    if (values.empty()) {
        return;
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) {
        std::fill(values.begin(), values.end(), 0.0);
        return;
    }
    for (double& v : values) {
        v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    }
}

}  // namespace

double power_to_db(double value, double ref) {
    return 10.0 * std::log10(std::max(value, kLogFloor) / std::max(ref, kLogFloor));
}

FeatureVector condense(const FeatureMatrix& matrix, FeatureKind kind) {
    if (matrix.empty() || matrix.values.size() != matrix.n_bins * matrix.n_frames) {
        fail(ErrorKind::Shape, "cannot condense an empty feature matrix");
    }
    std::vector<double> means(matrix.n_bins, 0.0);
    for (std::size_t b = 0; b < matrix.n_bins; ++b) {
        double acc = 0.0;
        for (std::size_t t = 0; t < matrix.n_frames; ++t) {
            acc += matrix.at(b, t);
        }
        means[b] = acc / static_cast<double>(matrix.n_frames);
        if (!std::isfinite(means[b])) {
            fail(ErrorKind::NonFinite, "feature row " + std::to_string(b) + " is not finite");
        }
    }
    const double ref = *std::max_element(means.begin(), means.end());
    for (double& m : means) {
        m = power_to_db(m, ref);
    }
    min_max_scale(means);
    return FeatureVector{std::move(means), kind};
}

FeatureMatrix extract_feature(const ingest::AudioClip& clip, FeatureKind kind, const SpectralConfig& cfg) {
    switch (kind) {
    case FeatureKind::Mel:
        return mel_spectrogram(clip, cfg, make_mel_filter_bank(kMelBandCount, cfg));
    case FeatureKind::Mfcc:
        return mfcc(clip, cfg, make_mel_filter_bank(kMfccFilterCount, cfg), kMfccCoefficients);
    case FeatureKind::Stft:
        return magnitude(stft(clip, cfg));
    case FeatureKind::Chroma:
        return chromagram(clip, cfg);
    }
    fail(ErrorKind::Parameter, "unknown feature kind");
}

std::vector<FeatureMatrix> extract_batch(std::span<const ingest::AudioClip> clips, FeatureKind kind,
                                         const SpectralConfig& cfg, std::size_t workers) {
    std::vector<FeatureMatrix> out(clips.size());
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(clips.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < clips.size(); ++i) {
            out[i] = extract_feature(clips[i], kind, cfg);
        }
        return out;
    }
    // Strided assignment; each slot is written by exactly one worker.
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < clips.size(); i += workers) {
                out[i] = extract_feature(clips[i], kind, cfg);
            }
        }));
    }
    for (auto& j : jobs) {
        j.get();
    }
    return out;
}

std::vector<double> to_unit_grid(const FeatureMatrix& matrix, FeatureKind kind, std::size_t rows,
                                 std::size_t cols) {
    if (matrix.empty()) {
        fail(ErrorKind::Shape, "empty feature matrix");
    }
    std::vector<double> grid = matrix.values;
    if (kind != FeatureKind::Mfcc) {
        const double ref = *std::max_element(grid.begin(), grid.end());
        for (double& v : grid) {
            v = power_to_db(v, ref);
        }
    }
    min_max_scale(grid);
    return ingest::resize_bilinear(grid, matrix.n_bins, matrix.n_frames, 1, rows, cols);
}

std::vector<std::uint8_t> encode_feature_record(const FeatureRecord& record) {
    const auto& m = record.matrix;
    require(m.values.size() == m.n_bins * m.n_frames, ErrorKind::Shape, "feature matrix size mismatch");
    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    out.reserve(40 + 8 * m.values.size());
    put_u32(out, static_cast<std::uint32_t>(record.kind));
    put_u32(out, static_cast<std::uint32_t>(m.axis));
    put_u64(out, m.n_bins);
    put_u64(out, m.n_frames);
    put_f64(out, m.frame_step_seconds);
    for (double v : m.values) {
        put_f64(out, v);
    }
    return out;
}

FeatureRecord decode_feature_record(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || !std::equal(kMagic, kMagic + 8, bytes.begin())) {
        fail(ErrorKind::Format, "not a feature record (bad magic)");
    }
    std::size_t pos = 8;
    FeatureRecord rec;
    const auto kind = get_u64(bytes, pos, 4);
    const auto axis = get_u64(bytes, pos, 4);
    if (kind > 3 || axis > 3) {
        fail(ErrorKind::Format, "feature record has an unknown kind or axis code");
    }
    rec.kind = static_cast<FeatureKind>(kind);
    rec.matrix.axis = static_cast<BinAxis>(axis);
    rec.matrix.n_bins = get_u64(bytes, pos, 8);
    rec.matrix.n_frames = get_u64(bytes, pos, 8);
    rec.matrix.frame_step_seconds = std::bit_cast<double>(get_u64(bytes, pos, 8));
    const std::size_t count = rec.matrix.n_bins * rec.matrix.n_frames;
    if (bytes.size() - pos != count * 8) {
        fail(ErrorKind::Format, "feature record payload size does not match its shape");
    }
    rec.matrix.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        rec.matrix.values[i] = std::bit_cast<double>(get_u64(bytes, pos, 8));
    }
    return rec;
}

void write_feature_record(const std::filesystem::path& path, const FeatureRecord& record) {
    const auto bytes = encode_feature_record(record);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureRecord read_feature_record(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return decode_feature_record(bytes);
}

}  // namespace beesense::dsp
