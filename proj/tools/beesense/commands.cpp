#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "beesense/dsp/features.hpp"
#include "beesense/eval/classification.hpp"
#include "beesense/eval/crossval.hpp"
#include "beesense/eval/detection.hpp"
#include "beesense/eval/report.hpp"
#include "beesense/ingest/audio.hpp"
#include "beesense/ingest/split.hpp"
#include "beesense/ingest/yolo.hpp"
#include "beesense/nn/serialize.hpp"
#include "beesense/nn/train.hpp"
#include "beesense/pipeline/dataset.hpp"
#include "beesense/pipeline/fixture.hpp"

namespace beesense::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kLockName = ".beesense.lock";
constexpr const char* kModelFile = "model.bsm";

/// Exclusive claim on an output directory for the lifetime of a command.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / kLockName) {
        fs::create_directories(dir);
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            fail(ErrorKind::State, "output directory " + dir.string() + " is in use by another command (remove " +
                                       path_.string() + " if it is stale)");
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ingest::DatasetManifest read_dataset(const ExperimentConfig& c) {
    if (c.dataset.empty()) {
        fail(ErrorKind::Validation, "no dataset given (set 'dataset' or pass --dataset)");
    }
    const auto path = manifest_path(c.dataset);
    if (!fs::is_regular_file(path)) {
        fail(ErrorKind::Validation, "manifest not found: " + path.string());
    }
    try {
        auto manifest = ingest::read_manifest(path);
        if (manifest.entries.empty()) {
            fail(ErrorKind::Validation, "manifest " + path.string() + " lists no samples");
        }
        return manifest;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Validation) {
            throw;
        }
        fail(ErrorKind::Validation, "cannot use manifest " + path.string() + ": " + e.what());
    }
}

std::uint64_t required_seed(const ExperimentConfig& c, const std::string& command) {
    if (!c.seed) {
        fail(ErrorKind::Validation, command + " needs a seed (set 'seed' or pass --seed)");
    }
    return *c.seed;
}

/// Every listed sample must carry the files the recipe reads.
void check_inputs(const ingest::DatasetManifest& manifest, const pipeline::ModelConfig& cfg,
                  const std::vector<std::string>& ids) {
    const auto inputs = pipeline::inputs_for(cfg);
    for (const auto& id : ids) {
        const auto& entry = manifest.find(id);
        for (const auto& in : inputs) {
            const auto& file = in.input_name == "image" ? entry.image : entry.audio;
            if (!file) {
                fail(ErrorKind::Validation, "recipe '" + cfg.recipe + "' reads " + in.input_name + " but sample '" +
                                                id + "' has none");
            }
            if (!fs::is_regular_file(manifest.resolve(*file))) {
                fail(ErrorKind::Validation, "missing file for sample '" + id + "': " + manifest.resolve(*file).string());
            }
        }
    }
}

pipeline::ModelConfig model_config_for(const ExperimentConfig& c, const ingest::DatasetManifest& manifest) {
    pipeline::ModelConfig cfg = c.model_config;
    cfg.n_classes = ingest::class_count(manifest.label_set);
    cfg.data.workers = c.workers;
    cfg.validate();
    return cfg;
}

std::string model_name(const ExperimentConfig& c, const pipeline::ModelConfig& cfg) {
    return c.name.empty() ? cfg.recipe : c.name;
}

struct Scored {
    eval::ConfusionMatrix matrix;
    eval::ClassificationReport report;
};

Scored score(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted, std::size_t n_classes,
             const std::vector<std::string>& class_names) {
    auto cm = eval::ConfusionMatrix::from_predictions(truth, predicted, n_classes, class_names);
    auto report = eval::classification_metrics(cm);
    return {std::move(cm), std::move(report)};
}

void write_reports(const fs::path& out, const std::string& name, const std::string& feature, const Scored& s,
                   const std::vector<std::string>& class_names) {
    const std::vector<eval::ClassificationRow> rows{{name, feature, s.report}};
    eval::write_text(out / "report.csv", eval::classification_csv(rows));
    eval::write_text(out / "per_class.csv", eval::per_class_csv(name, s.report, class_names));
    eval::write_text(out / "report.txt", eval::classification_table(rows) + "\n" + eval::confusion_table(s.matrix));
}

std::string history_csv(const nn::TrainHistory& h) {
    std::ostringstream out;
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << real(e.train_loss) << ',' << real(e.train_accuracy) << ','
            << (e.val_loss ? real(*e.val_loss) : "") << ',' << (e.val_accuracy ? real(*e.val_accuracy) : "") << '\n';
    }
    return out.str();
}

// ---- extract ----

int run_extract(const ExperimentConfig& c, std::ostream& log) {
    const auto manifest = read_dataset(c);
    auto kinds = c.extract_features;
    if (kinds.empty()) {
        kinds.push_back(c.model_config.data.feature);
    }
    std::vector<const ingest::ManifestEntry*> clips;
    for (const auto& e : manifest.entries) {
        if (e.audio) {
            clips.push_back(&e);
        }
    }
    if (clips.empty()) {
        fail(ErrorKind::Validation, "no sample in the manifest has audio");
    }
    const fs::path out = output_dir(c, "extract");
    OutputLock lock(out);
    const fs::path dir = out / "features";
    fs::create_directories(dir);

    std::size_t failed = 0, written = 0;
    for (const auto* entry : clips) {
        ingest::AudioClip clip;
        try {
            clip = ingest::load_wav(manifest.resolve(*entry->audio));
        } catch (const Error& e) {
            log << "skipping " << entry->id << ": " << e.what() << '\n';
            ++failed;
            continue;
        }
        for (const auto kind : kinds) {
            dsp::FeatureRecord record{kind, dsp::extract_feature(clip, kind)};
            dsp::write_feature_record(pipeline::feature_record_path(dir, entry->id, kind), record);
            ++written;
        }
    }
    log << "wrote " << written << " feature records to " << dir.string() << " (" << failed << " clips skipped)\n";
    return failed == clips.size() ? kExitRuntime : kExitOk;
}

// ---- train ----

int run_train(const ExperimentConfig& c, std::ostream& log) {
    const auto manifest = read_dataset(c);
    const std::uint64_t seed = required_seed(c, "train");
    auto cfg = model_config_for(c, manifest);
    check_inputs(manifest, cfg, manifest.ids());
    const auto plan = ingest::make_split(manifest, seed);
    if (plan.train_ids.empty() || plan.test_ids.empty()) {
        fail(ErrorKind::Validation, "dataset is too small for a train/val/test split");
    }
    c.optimizer_config().validate();

    const fs::path out = output_dir(c, "train");
    OutputLock lock(out);
    cfg.data.features_dir = out / "features";
    const auto train_set = pipeline::load_dataset(manifest, pipeline::inputs_for(cfg), cfg.data, plan.train_ids);
    const auto val_set = pipeline::load_dataset(manifest, pipeline::inputs_for(cfg), cfg.data, plan.val_ids);
    const auto test_set = pipeline::load_dataset(manifest, pipeline::inputs_for(cfg), cfg.data, plan.test_ids);
    log << "train/val/test: " << train_set.ids.size() << '/' << val_set.ids.size() << '/' << test_set.ids.size()
        << '\n';

    auto graph = pipeline::build_model(cfg, train_set.data);
    graph.initialize(seed);
    nn::Optimizer optimizer(c.optimizer_config());
    nn::TrainOptions options;
    options.epochs = c.epochs;
    options.batch_size = c.batch_size;
    options.patience = c.patience;
    options.seed = seed;
    options.target_train_accuracy = c.target_accuracy;
    options.on_epoch = [&log](std::size_t epoch, double train_loss, double val_loss) {
        log << "epoch " << epoch << " train_loss " << train_loss << " val_loss " << val_loss << '\n';
    };
    const auto loss = c.loss();
    const auto history = nn::train(graph, train_set.data, val_set.data.empty() ? nullptr : &val_set.data, loss,
                                   optimizer, options);
    const auto result = nn::evaluate(graph, test_set.data, loss, c.batch_size);
    const auto scored = score(test_set.data.labels, result.predictions, cfg.n_classes, train_set.class_names);

    auto& meta = graph.metadata();
    pipeline::store_config(cfg, meta);
    meta["split_seed"] = std::to_string(seed);
    meta["lambda_image"] = real(c.lambda_image);
    meta["lambda_sound"] = real(c.lambda_sound);
    meta["test_accuracy"] = real(scored.report.accuracy);
    meta["test_weighted_f1"] = real(scored.report.weighted_f1);
    nn::save_model(graph, out / kModelFile);

    eval::write_text(out / "history.csv", history_csv(history));
    std::string split = "id,set\n";
    for (const auto& [set, ids] : {std::pair{"train", &plan.train_ids}, std::pair{"val", &plan.val_ids},
                                   std::pair{"test", &plan.test_ids}}) {
        for (const auto& id : *ids) {
            split += id + "," + set + "\n";
        }
    }
    eval::write_text(out / "split.csv", split);
    write_reports(out, model_name(c, cfg), std::string(dsp::to_string(cfg.data.feature)), scored,
                  train_set.class_names);
    log << "test accuracy " << scored.report.accuracy << " after " << history.epochs.size() << " epochs; model at "
        << (out / kModelFile).string() << '\n';
    return kExitOk;
}

// ---- evaluate / predict ----

struct LoadedModel {
    nn::NetworkGraph graph;
    pipeline::ModelConfig cfg;
    double lambda_image = 0.5;
    double lambda_sound = 0.5;
    std::optional<std::uint64_t> split_seed;
};

LoadedModel load_trained(const ExperimentConfig& c) {
    if (c.model.empty()) {
        fail(ErrorKind::Validation, "no model given (set 'model' or pass --model)");
    }
    if (!fs::is_regular_file(c.model)) {
        fail(ErrorKind::Validation, "model file not found: " + c.model.string());
    }
    LoadedModel m{nn::load_model(c.model), {}, 0.5, 0.5, std::nullopt};
    const auto& meta = m.graph.metadata();
    try {
        m.cfg = pipeline::config_from_metadata(meta);
    } catch (const Error& e) {
        fail(ErrorKind::Validation, "model " + c.model.string() + " lacks a usable recipe config: " + e.what());
    }
    auto number = [&](const char* key, double fallback) {
        const auto it = meta.find(key);
        return it == meta.end() ? fallback : std::stod(it->second);
    };
    m.lambda_image = number("lambda_image", 0.5);
    m.lambda_sound = number("lambda_sound", 0.5);
    if (const auto it = meta.find("split_seed"); it != meta.end()) {
        m.split_seed = std::stoull(it->second);
    }
    return m;
}

std::vector<std::string> selected_ids(const ExperimentConfig& c, const ingest::DatasetManifest& manifest,
                                      const LoadedModel& m, const std::string& default_split) {
    const std::string split = c.split.empty() ? default_split : c.split;
    if (split == "all") {
        return manifest.ids();
    }
    const auto seed = c.seed ? c.seed : m.split_seed;
    if (!seed) {
        fail(ErrorKind::Validation, "model carries no split seed; pass --seed or --split all");
    }
    auto ids = ingest::make_split(manifest, *seed).test_ids;
    if (ids.empty()) {
        fail(ErrorKind::Validation, "the test split is empty");
    }
    return ids;
}

struct Prepared {
    LoadedModel model;
    ingest::DatasetManifest manifest;
    std::vector<std::string> ids;
};

Prepared prepare_inference(const ExperimentConfig& c, const std::string& default_split) {
    Prepared p{load_trained(c), read_dataset(c), {}};
    if (ingest::class_count(p.manifest.label_set) != p.model.cfg.n_classes) {
        fail(ErrorKind::Validation, "model predicts " + std::to_string(p.model.cfg.n_classes) +
                                        " classes but the dataset has " +
                                        std::to_string(ingest::class_count(p.manifest.label_set)));
    }
    p.ids = selected_ids(c, p.manifest, p.model, default_split);
    check_inputs(p.manifest, p.model.cfg, p.ids);
    return p;
}

pipeline::LoadedData load_for_model(Prepared& p, const fs::path& out, std::size_t workers) {
    p.model.cfg.data.features_dir = out / "features";
    p.model.cfg.data.workers = workers;
    auto loaded = pipeline::load_dataset(p.manifest, pipeline::inputs_for(p.model.cfg), p.model.cfg.data, p.ids);
    for (const auto& input : p.model.graph.input_names()) {
        const auto it = loaded.data.inputs.find(input);
        if (it == loaded.data.inputs.end() || it->second.sample_shape() != p.model.graph.node_shape(input)) {
            fail(ErrorKind::Shape, "dataset input '" + input + "' does not match the model's input shape " +
                                       nn::shape_string(p.model.graph.node_shape(input)));
        }
    }
    return loaded;
}

int run_evaluate(const ExperimentConfig& c, std::ostream& log) {
    auto p = prepare_inference(c, "test");
    const fs::path out = output_dir(c, "evaluate");
    OutputLock lock(out);
    const auto loaded = load_for_model(p, out, c.workers);
    const auto loss = pipeline::loss_for(p.model.cfg, p.model.lambda_image, p.model.lambda_sound);
    const auto result = nn::evaluate(p.model.graph, loaded.data, loss, c.batch_size);
    const auto scored = score(loaded.data.labels, result.predictions, p.model.cfg.n_classes, loaded.class_names);
    write_reports(out, model_name(c, p.model.cfg), std::string(dsp::to_string(p.model.cfg.data.feature)), scored,
                  loaded.class_names);
    log << "accuracy " << scored.report.accuracy << " on " << loaded.ids.size() << " samples\n";
    return kExitOk;
}

int run_predict(const ExperimentConfig& c, std::ostream& log) {
    auto p = prepare_inference(c, "all");
    const fs::path out = output_dir(c, "predict");
    OutputLock lock(out);
    const auto loaded = load_for_model(p, out, c.workers);
    const auto loss = pipeline::loss_for(p.model.cfg, p.model.lambda_image, p.model.lambda_sound);
    const auto result = nn::evaluate(p.model.graph, loaded.data, loss, c.batch_size);
    const std::size_t k = p.model.cfg.n_classes;
    std::ostringstream csv;
    csv << "id,label,predicted";
    for (const auto& name : loaded.class_names) {
        csv << ",p_" << name;
    }
    csv << '\n';
    for (std::size_t i = 0; i < loaded.ids.size(); ++i) {
        csv << loaded.ids[i] << ',' << loaded.class_names.at(loaded.data.labels[i]) << ','
            << loaded.class_names.at(result.predictions[i]);
        for (std::size_t j = 0; j < k; ++j) {
            csv << ',' << real(result.probabilities.at(i, j));
        }
        csv << '\n';
    }
    eval::write_text(out / "predictions.csv", csv.str());
    log << "wrote " << loaded.ids.size() << " predictions\n";
    return kExitOk;
}

// ---- crossval ----

int run_crossval(const ExperimentConfig& c, std::ostream& log) {
    const auto manifest = read_dataset(c);
    const std::uint64_t seed = required_seed(c, "crossval");
    auto cfg = model_config_for(c, manifest);
    check_inputs(manifest, cfg, manifest.ids());
    if (manifest.entries.size() < c.folds) {
        fail(ErrorKind::Validation, std::to_string(c.folds) + " folds need at least as many samples");
    }
    c.optimizer_config().validate();

    const fs::path out = output_dir(c, "crossval");
    OutputLock lock(out);
    cfg.data.features_dir = out / "features";
    const auto loaded = pipeline::load_dataset(manifest, pipeline::inputs_for(cfg), cfg.data);

    eval::CrossValOptions options;
    options.k = c.folds;
    options.seed = seed;
    options.stratified = c.stratified;
    options.val_fraction = c.val_fraction;
    options.train.epochs = c.epochs;
    options.train.batch_size = c.batch_size;
    options.train.patience = c.patience;
    options.train.target_train_accuracy = c.target_accuracy;
    options.optimizer = c.optimizer_config();
    options.loss = c.loss();
    const auto report = eval::run_cross_validation(
        [&] { return pipeline::build_model(cfg, loaded.data); }, loaded.data, loaded.ids, options);
    for (const auto& w : report.warnings) {
        log << "warning: " << w << '\n';
    }
    const auto name = model_name(c, cfg);
    eval::write_text(out / "crossval.csv", eval::crossval_csv(name, report));
    eval::write_text(out / "crossval.txt", eval::crossval_table(name, report));
    log << "mean accuracy " << report.accuracy.mean << " +/- " << report.accuracy.std << " over " << c.folds
        << " folds\n";
    return kExitOk;
}

// ---- detect-eval ----

int run_detect_eval(const ExperimentConfig& c, std::ostream& log) {
    if (c.labels_dir.empty() || !fs::is_directory(c.labels_dir)) {
        fail(ErrorKind::Validation, "labels directory not found: '" + c.labels_dir.string() + "'");
    }
    if (c.predictions_dir.empty() || !fs::is_directory(c.predictions_dir)) {
        fail(ErrorKind::Validation, "predictions directory not found: '" + c.predictions_dir.string() + "'");
    }
    std::vector<fs::path> label_files;
    for (const auto& e : fs::directory_iterator(c.labels_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") {
            label_files.push_back(e.path());
        }
    }
    if (label_files.empty()) {
        fail(ErrorKind::Validation, "no .txt label files in " + c.labels_dir.string());
    }
    std::sort(label_files.begin(), label_files.end());

    std::vector<eval::ImageDetections> images;
    std::size_t unmatched = 0;
    for (const auto& file : label_files) {
        const auto truths = ingest::read_yolo_labels(file);
        const auto pred_file = c.predictions_dir / file.filename();
        std::vector<ingest::ScoredAnnotation> preds;
        if (fs::is_regular_file(pred_file)) {
            preds = ingest::read_yolo_predictions(pred_file);
        } else {
            ++unmatched;
        }
        images.push_back(eval::to_image_detections(truths, preds, c.image_width, c.image_height));
    }
    const fs::path out = output_dir(c, "detect-eval");
    OutputLock lock(out);
    const auto result = eval::mean_average_precision(images);
    const std::vector<eval::DetectionRow> rows{{c.name.empty() ? "detector" : c.name, result}};
    eval::write_text(out / "detection.csv", eval::detection_csv(rows));
    eval::write_text(out / "detection.txt", eval::detection_table(rows));
    log << images.size() << " images (" << unmatched << " without predictions): mAP@50 " << result.map50
        << ", mAP@[.5:.95] " << result.map_range << '\n';
    return kExitOk;
}

// ---- make-fixture ----

int run_make_fixture(const ExperimentConfig& c, std::ostream& log) {
    pipeline::FixtureOptions options;
    options.per_class = c.per_class;
    if (c.seed) {
        options.seed = *c.seed;
    }
    const fs::path out = output_dir(c, "fixture");
    OutputLock lock(out);
    const auto manifest = pipeline::write_fixture(out, options);
    log << "wrote " << manifest.entries.size() << " samples to " << out.string() << '\n';
    return kExitOk;
}

const std::map<std::string, std::function<int(const ExperimentConfig&, std::ostream&)>>& commands() {
    static const std::map<std::string, std::function<int(const ExperimentConfig&, std::ostream&)>> table{
        {"extract", run_extract},     {"train", run_train},     {"evaluate", run_evaluate},
        {"crossval", run_crossval},   {"detect-eval", run_detect_eval}, {"predict", run_predict},
        {"make-fixture", run_make_fixture},
    };
    return table;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parameter:
    case ErrorKind::Version:
        return kExitValidation;
    default:
        return kExitRuntime;
    }
}

std::vector<std::string> command_names() {
    std::vector<std::string> out;
    for (const auto& [name, _] : commands()) {
        out.push_back(name);
    }
    return out;
}

int run_command(const std::string& command, const ExperimentConfig& config, std::ostream& log) {
    const auto it = commands().find(command);
    if (it == commands().end()) {
        fail(ErrorKind::Validation, "unknown command '" + command + "'");
    }
    return it->second(config, log);
}

}  // namespace beesense::cli
