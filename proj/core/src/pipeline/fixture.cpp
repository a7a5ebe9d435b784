#include "beesense/pipeline/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "beesense/error.hpp"
#include "beesense/ingest/audio.hpp"
#include "beesense/ingest/image.hpp"
#include "beesense/ingest/yolo.hpp"
#include "beesense/rng.hpp"

namespace beesense::pipeline {
namespace {

constexpr std::array<double, 4> kTones{220.0, 277.18, 329.63, 392.0};
constexpr std::array<std::array<double, 3>, 4> kColours{{
    {0.90, 0.20, 0.20},
    {0.20, 0.80, 0.20},
    {0.20, 0.30, 0.90},
    {0.90, 0.90, 0.20},
}};

void write_lines(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out << text;
}

}  // namespace

double fixture_tone_hz(std::size_t label) { return kTones.at(label); }

ingest::DatasetManifest write_fixture(const std::filesystem::path& dir, const FixtureOptions& o) {
    require(o.per_class > 0, ErrorKind::Parameter, "fixture needs at least one sample per class");
    require(o.image_side >= 16, ErrorKind::Parameter, "fixture images need a side of at least 16");
    require(o.sample_rate >= 2000.0 && o.seconds > 0.0, ErrorKind::Parameter, "bad fixture audio settings");
    for (const char* sub : {"images", "audio", "labels", "predictions"}) {
        std::filesystem::create_directories(dir / sub);
    }

    ingest::DatasetManifest manifest;
    manifest.label_set = ingest::LabelSet::Health;
    manifest.root = dir;
    Rng rng(o.seed);
    const std::size_t n = o.per_class * kTones.size();
    const double side = static_cast<double>(o.image_side);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % kTones.size();
        char id[32];
        std::snprintf(id, sizeof id, "s%02zu", i);
        Rng r = rng.fork(i);

        ingest::AudioClip clip;
        clip.sample_rate = o.sample_rate;
        const auto n_samples = static_cast<std::size_t>(std::llround(o.sample_rate * o.seconds));
        const double f = kTones[label] * (1.0 + r.uniform(-0.005, 0.005));
        const double amp = r.uniform(0.3, 0.6);
        const double phase = r.uniform(0.0, 2.0 * std::numbers::pi);
        clip.samples.resize(n_samples);
        for (std::size_t k = 0; k < n_samples; ++k) {
            const double t = static_cast<double>(k) / o.sample_rate;
            const double w = 2.0 * std::numbers::pi * f * t + phase;
            clip.samples[k] = amp * (std::sin(w) + 0.3 * std::sin(2.0 * w)) + 0.02 * r.normal();
        }
        ingest::write_wav(dir / "audio" / (std::string(id) + ".wav"), clip);

        ingest::ImageSample img;
        img.height = o.image_side;
        img.width = o.image_side;
        img.pixels.resize(o.image_side * o.image_side * 3);
        const double radius = side / 5.0;
        const double cx = (label % 2 == 0 ? 0.3 : 0.7) * side + r.uniform(-1.5, 1.5);
        const double cy = (label / 2 == 0 ? 0.3 : 0.7) * side + r.uniform(-1.5, 1.5);
        for (std::size_t y = 0; y < o.image_side; ++y) {
            for (std::size_t x = 0; x < o.image_side; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx;
                const double dy = static_cast<double>(y) + 0.5 - cy;
                const bool inside = dx * dx + dy * dy <= radius * radius;
                for (std::size_t c = 0; c < 3; ++c) {
                    const double base = inside ? kColours[label][c] : 0.4;
                    img.at(y, x, c) = std::clamp(base + 0.05 * r.normal(), 0.0, 1.0);
                }
            }
        }
        ingest::write_png(dir / "images" / (std::string(id) + ".png"), img);

        const ingest::BBoxAnnotation truth{0, cx / side, cy / side, 2.0 * radius / side, 2.0 * radius / side};
        write_lines(dir / "labels" / (std::string(id) + ".txt"), ingest::format_yolo_line(truth) + "\n");
        ingest::BBoxAnnotation guess = truth;
        guess.cx += r.uniform(-0.03, 0.03);
        guess.cy += r.uniform(-0.03, 0.03);
        std::string pred = ingest::format_yolo_line(guess);
        char score[32];
        std::snprintf(score, sizeof score, " %.4f\n", r.uniform(0.6, 0.99));
        pred += score;
        if (i % 3 == 0) {
            const ingest::BBoxAnnotation spurious{0, 0.5, 0.5, 0.1, 0.1};
            std::snprintf(score, sizeof score, " %.4f\n", r.uniform(0.1, 0.7));
            pred += ingest::format_yolo_line(spurious) + score;
        }
        write_lines(dir / "predictions" / (std::string(id) + ".txt"), pred);

        manifest.entries.push_back({id, std::filesystem::path("images") / (std::string(id) + ".png"),
                                    std::filesystem::path("audio") / (std::string(id) + ".wav"),
                                    static_cast<int>(label)});
    }
    write_lines(dir / "manifest", ingest::format_manifest(manifest));
    return manifest;
}

}  // namespace beesense::pipeline
