#include "beesense/ingest/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "beesense/error.hpp"

namespace beesense::ingest {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t pos) { pos_ = pos; }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        }
        pos_ += 4;
        return v;
    }

    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::string tag() {
        need(4);
        std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
        pos_ += 4;
        return t;
    }

private:
    void need(std::size_t n) const {
        if (!has(n)) {
            fail(ErrorKind::Format, "truncated RIFF structure");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

struct FormatChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
    if (fmt.format == kFormatFloat) {
        std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
        float f = 0.0f;
        std::memcpy(&f, &raw, sizeof f);
        return static_cast<double>(f);
    }
    switch (fmt.bits) {
    case 8:
        return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16: {
        const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        return static_cast<double>(v) / 32768.0;
    }
    case 24: {
        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
        if (v & 0x800000) {
            v -= 0x1000000;
        }
        return static_cast<double>(v) / 8388608.0;
    }
    default:
        fail(ErrorKind::Unsupported, "unsupported PCM bit depth " + std::to_string(fmt.bits));
    }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    if (!in.has(12)) {
        fail(ErrorKind::Format, "file too short for a RIFF header");
    }
    if (in.tag() != "RIFF") {
        fail(ErrorKind::Format, "missing RIFF signature");
    }
    in.u32();  // riff size; not trusted
    if (in.tag() != "WAVE") {
        fail(ErrorKind::Format, "missing WAVE form type");
    }

    FormatChunk fmt;
    bool have_fmt = false;
    std::span<const std::uint8_t> payload;
    bool have_data = false;

    while (in.has(8)) {
        const std::string id = in.tag();
        const std::uint32_t size = in.u32();
        const std::size_t body = in.pos();
        if (id == "fmt ") {
            if (size < 16 || !in.has(16)) {
                fail(ErrorKind::Format, "fmt chunk too small");
            }
            fmt.format = in.u16();
            fmt.channels = in.u16();
            fmt.sample_rate = in.u32();
            in.u32();  // byte rate
            fmt.block_align = in.u16();
            fmt.bits = in.u16();
            if (fmt.format == kFormatExtensible) {
                if (size < 40 || !in.has(24)) {
                    fail(ErrorKind::Format, "extensible fmt chunk too small");
                }
                in.u16();  // cb size
                in.u16();  // valid bits
                in.u32();  // channel mask
                fmt.format = in.u16();  // first two bytes of the subformat GUID
            }
            have_fmt = true;
        } else if (id == "data") {
            const std::size_t n = std::min<std::size_t>(size, in.remaining());
            payload = bytes.subspan(body, n);
            have_data = true;
        }
        const std::size_t next = body + size + (size & 1u);
        if (next > bytes.size()) {
            break;
        }
        in.seek(next);
    }

    if (!have_fmt) {
        fail(ErrorKind::Format, "missing fmt chunk");
    }
    if (!have_data) {
        fail(ErrorKind::Format, "missing data chunk");
    }
    if (fmt.channels == 0 || fmt.sample_rate == 0) {
        fail(ErrorKind::Format, "zero channels or sample rate");
    }
    if (fmt.channels > 2) {
        fail(ErrorKind::Unsupported, std::to_string(fmt.channels) + " channels");
    }
    const bool is_int = fmt.format == kFormatPcm && (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24);
    const bool is_float = fmt.format == kFormatFloat && fmt.bits == 32;
    if (!is_int && !is_float) {
        fail(ErrorKind::Unsupported, "codec " + std::to_string(fmt.format) + " with " +
                                         std::to_string(fmt.bits) + " bits");
    }

    const std::size_t bytes_per_sample = fmt.bits / 8u;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t frames = payload.size() / frame_bytes;
    if (frames == 0) {
        fail(ErrorKind::EmptyInput, "WAV data chunk holds no samples");
    }

    AudioClip clip;
    clip.sample_rate = static_cast<double>(fmt.sample_rate);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const std::uint8_t* frame = payload.data() + i * frame_bytes;
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            acc += decode_sample(frame + c * bytes_per_sample, fmt);
        }
        double v = acc / static_cast<double>(fmt.channels);
        if (!std::isfinite(v)) {
            fail(ErrorKind::NonFinite, "non-finite sample at frame " + std::to_string(i));
        }
        clip.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return clip;
}

std::vector<double> resample_linear(std::span<const double> samples, double from_rate,
                                    double to_rate) {
    require(from_rate > 0.0 && to_rate > 0.0, ErrorKind::Parameter, "sample rates must be positive");
    if (samples.empty()) {
        return {};
    }
    if (from_rate == to_rate) {
        return {samples.begin(), samples.end()};
    }
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(samples.size()) * to_rate / from_rate));
    std::vector<double> out(n_out);
    const std::size_t last = samples.size() - 1;
    const double step = from_rate / to_rate;
    for (std::size_t j = 0; j < n_out; ++j) {
        const double pos = static_cast<double>(j) * step;
        const auto i = std::min(static_cast<std::size_t>(pos), last);
        const double frac = pos - static_cast<double>(i);
        const double a = samples[i];
        const double b = samples[std::min(i + 1, last)];
        out[j] = a + (b - a) * frac;
    }
    return out;
}

AudioClip normalize_clip(const AudioClip& clip) {
    if (clip.samples.empty()) {
        fail(ErrorKind::EmptyInput, "clip has no samples");
    }
    std::vector<double> resampled = resample_linear(clip.samples, clip.sample_rate, kTargetSampleRate);

    AudioClip out;
    out.sample_rate = kTargetSampleRate;
    if (resampled.size() >= kTargetSamples) {
        const std::size_t start = (resampled.size() - kTargetSamples) / 2;
        out.samples.assign(resampled.begin() + static_cast<std::ptrdiff_t>(start),
                           resampled.begin() + static_cast<std::ptrdiff_t>(start + kTargetSamples));
    } else {
        out.samples = std::move(resampled);
        out.samples.resize(kTargetSamples, 0.0);
    }
    return out;
}

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    return normalize_clip(decode_wav(bytes));
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding,
                                     std::uint16_t channels) {
    require(channels == 1 || channels == 2, ErrorKind::Parameter, "channels must be 1 or 2");
    std::uint16_t bits = 16;
    std::uint16_t format = kFormatPcm;
    switch (encoding) {
    case WavEncoding::Pcm8: bits = 8; break;
    case WavEncoding::Pcm16: bits = 16; break;
    case WavEncoding::Pcm24: bits = 24; break;
    case WavEncoding::Float32: bits = 32; format = kFormatFloat; break;
    }
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
    const std::uint16_t block = static_cast<std::uint16_t>(bits / 8 * channels);
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * block);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, format);
    put_u16(out, channels);
    put_u32(out, rate);
    put_u32(out, rate * block);
    put_u16(out, block);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, data_bytes);

    for (double s : clip.samples) {
        const double x = std::clamp(s, -1.0, 1.0);
        for (std::uint16_t c = 0; c < channels; ++c) {
            switch (encoding) {
            case WavEncoding::Pcm8:
                out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(x * 128.0) + 128L, 0L, 255L)));
                break;
            case WavEncoding::Pcm16: {
                const long v = std::clamp(std::lround(x * 32768.0), -32768L, 32767L);
                put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
                break;
            }
            case WavEncoding::Pcm24: {
                const long v = std::clamp(std::lround(x * 8388608.0), -8388608L, 8388607L);
                const auto u = static_cast<std::uint32_t>(v) & 0xFFFFFFu;
                out.push_back(static_cast<std::uint8_t>(u & 0xFF));
                out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xFF));
                out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xFF));
                break;
            }
            case WavEncoding::Float32: {
                const float f = static_cast<float>(x);
                std::uint32_t raw = 0;
                std::memcpy(&raw, &f, sizeof raw);
                put_u32(out, raw);
                break;
            }
            }
        }
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
    const auto bytes = encode_wav(clip, encoding);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace beesense::ingest
