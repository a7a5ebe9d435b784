#include "beesense/pipeline/dataset.hpp"

#include <algorithm>
#include <future>

#include "beesense/dsp/features.hpp"
#include "beesense/error.hpp"
#include "beesense/ingest/audio.hpp"
#include "beesense/ingest/image.hpp"

namespace beesense::pipeline {

std::string_view to_string(Representation r) {
    switch (r) {
    case Representation::Vector: return "vector";
    case Representation::Matrix: return "matrix";
    case Representation::Sequence: return "sequence";
    case Representation::Image: return "image";
    }
    return "unknown";
}

std::filesystem::path feature_record_path(const std::filesystem::path& dir, const std::string& id,
                                          dsp::FeatureKind kind) {
    return dir / (id + "." + std::string(dsp::to_string(kind)) + ".feat");
}

dsp::FeatureMatrix clip_features(const ingest::DatasetManifest& manifest, const ingest::ManifestEntry& entry,
                                 const DatasetOptions& options) {
    if (!entry.audio) {
        fail(ErrorKind::Data, "entry '" + entry.id + "' has no audio");
    }
    if (!options.features_dir.empty()) {
        const auto path = feature_record_path(options.features_dir, entry.id, options.feature);
        if (std::filesystem::exists(path)) {
            auto rec = dsp::read_feature_record(path);
            if (rec.kind != options.feature) {
                fail(ErrorKind::Data, path.string() + " holds a different feature kind");
            }
            return std::move(rec.matrix);
        }
    }
    const auto clip = ingest::load_wav(manifest.resolve(*entry.audio));
    auto matrix = dsp::extract_feature(clip, options.feature);
    if (!options.features_dir.empty()) {
        const auto path = feature_record_path(options.features_dir, entry.id, options.feature);
        auto tmp = path;
        tmp += ".tmp";
        std::filesystem::create_directories(options.features_dir);
        dsp::write_feature_record(tmp, {options.feature, matrix});
        std::filesystem::rename(tmp, path);
    }
    return matrix;
}

std::vector<double> represent(const dsp::FeatureMatrix& m, Representation rep, const DatasetOptions& options) {
    switch (rep) {
    case Representation::Vector:
        return dsp::condense(m, options.feature).values;
    case Representation::Matrix:
        return dsp::to_unit_grid(m, options.feature, options.grid_size, options.grid_size);
    case Representation::Sequence: {
        // Bins stay as features; only the time axis is resampled.
        const auto grid = dsp::to_unit_grid(m, options.feature, m.n_bins, options.sequence_length);
        std::vector<double> out(grid.size());
        for (std::size_t b = 0; b < m.n_bins; ++b) {
            for (std::size_t t = 0; t < options.sequence_length; ++t) {
                out[t * m.n_bins + b] = grid[b * options.sequence_length + t];
            }
        }
        return out;
    }
    case Representation::Image:
        break;
    }
    fail(ErrorKind::Parameter, "audio features cannot feed an image input");
}

namespace {

nn::Shape sample_shape(Representation rep, std::size_t bins, const DatasetOptions& o) {
    switch (rep) {
    case Representation::Vector: return {bins, 1};
    case Representation::Matrix: return {o.grid_size, o.grid_size, 1};
    case Representation::Sequence: return {o.sequence_length, bins};
    case Representation::Image: return {o.image_size, o.image_size, 3};
    }
    return {};
}

}  // namespace

LoadedData load_dataset(const ingest::DatasetManifest& manifest, const std::vector<InputRequirement>& inputs,
                        const DatasetOptions& options, const std::vector<std::string>& ids) {
    require(!inputs.empty(), ErrorKind::Parameter, "no model inputs requested");
    require(options.image_size > 0 && options.grid_size > 0 && options.sequence_length > 0, ErrorKind::Parameter,
            "representation sizes must be positive");
    std::vector<const ingest::ManifestEntry*> entries;
    if (ids.empty()) {
        for (const auto& e : manifest.entries) {
            entries.push_back(&e);
        }
    } else {
        for (const auto& id : ids) {
            entries.push_back(&manifest.find(id));
        }
    }
    if (entries.empty()) {
        fail(ErrorKind::Data, "manifest has no entries");
    }
    for (const auto* e : entries) {
        for (const auto& in : inputs) {
            const bool is_image = in.representation == Representation::Image;
            if (is_image && !e->image) {
                fail(ErrorKind::Data, "entry '" + e->id + "' has no image but input '" + in.input_name + "' needs one");
            }
            if (!is_image && !e->audio) {
                fail(ErrorKind::Data, "entry '" + e->id + "' has no audio but input '" + in.input_name + "' needs it");
            }
        }
    }

    LoadedData out;
    out.class_names = ingest::class_names(manifest.label_set);
    out.data.n_classes = ingest::class_count(manifest.label_set);
    for (const auto* e : entries) {
        out.ids.push_back(e->id);
        out.data.labels.push_back(static_cast<std::size_t>(e->label));
    }

    const bool needs_audio = std::any_of(inputs.begin(), inputs.end(), [](const InputRequirement& r) {
        return r.representation != Representation::Image;
    });
    std::vector<dsp::FeatureMatrix> features;
    if (needs_audio) {
        features.resize(entries.size());
        const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, entries.size());
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, [&, w] {
                for (std::size_t i = w; i < entries.size(); i += workers) {
                    features[i] = clip_features(manifest, *entries[i], options);
                }
            }));
        }
        for (auto& j : jobs) {
            j.get();
        }
    }

    for (const auto& in : inputs) {
        std::vector<double> values;
        nn::Shape shape;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            std::vector<double> sample;
            if (in.representation == Representation::Image) {
                const auto img = ingest::load_image(manifest.resolve(*entries[i]->image));
                sample = ingest::resize_bilinear(img, options.image_size, options.image_size).pixels;
                shape = sample_shape(in.representation, 0, options);
            } else {
                sample = represent(features[i], in.representation, options);
                const auto s = sample_shape(in.representation, features[i].n_bins, options);
                if (!shape.empty() && s != shape) {
                    fail(ErrorKind::Data, "entry '" + entries[i]->id + "' yields features of a different size");
                }
                shape = s;
            }
            values.insert(values.end(), sample.begin(), sample.end());
        }
        nn::Shape full{entries.size()};
        full.insert(full.end(), shape.begin(), shape.end());
        out.data.inputs[in.input_name] = nn::Tensor(full, std::move(values));
    }
    return out;
}

}  // namespace beesense::pipeline
