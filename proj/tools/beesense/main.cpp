#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using beesense::cli::ExperimentConfig;

struct CommandLine {
    std::string config_file;
    std::vector<std::string> settings;    // --set key=value, in order
    std::map<std::string, std::string> flags;  // dedicated flags by config key
};

// Dedicated flags per subcommand, each an alias for a config key.
const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& flag_table() {
    using Flags = std::vector<std::pair<std::string, std::string>>;
    static const Flags common{{"--dataset", "dataset"}, {"--output", "output"}, {"--workers", "workers"}};
    static const Flags training{{"--recipe", "recipe"},   {"--feature", "feature"},       {"--epochs", "epochs"},
                                {"--batch-size", "batch_size"}, {"--patience", "patience"}, {"--seed", "seed"},
                                {"--optimizer", "optimizer"},   {"--lr", "lr"},             {"--name", "name"}};
    auto join = [](std::initializer_list<const Flags*> parts, Flags extra = {}) {
        Flags out;
        for (const auto* p : parts) {
            out.insert(out.end(), p->begin(), p->end());
        }
        out.insert(out.end(), extra.begin(), extra.end());
        return out;
    };
    static const std::map<std::string, Flags> table{
        {"extract", join({&common}, {{"--features", "features"}})},
        {"train", join({&common, &training})},
        {"crossval", join({&common, &training}, {{"--folds", "folds"}})},
        {"evaluate", join({&common}, {{"--model", "model"}, {"--split", "split"}, {"--seed", "seed"}})},
        {"predict", join({&common}, {{"--model", "model"}, {"--split", "split"}, {"--seed", "seed"}})},
        {"detect-eval", Flags{{"--labels", "labels"},
                              {"--predictions", "predictions"},
                              {"--image-width", "image_width"},
                              {"--image-height", "image_height"},
                              {"--name", "name"},
                              {"--output", "output"}}},
        {"make-fixture", Flags{{"--output", "output"}, {"--per-class", "per_class"}, {"--seed", "seed"}}},
    };
    return table;
}

const char* describe(const std::string& command) {
    static const std::map<std::string, const char*> text{
        {"extract", "Compute audio feature records for every clip in a dataset"},
        {"train", "Train a recipe on the train/val split and report test metrics"},
        {"evaluate", "Score a saved model on the test split (or all samples)"},
        {"crossval", "k-fold cross-validation of a recipe"},
        {"detect-eval", "mAP of YOLO-format predictions against labels"},
        {"predict", "Write per-sample predictions of a saved model"},
        {"make-fixture", "Write a small synthetic dataset"},
    };
    return text.at(command);
}

ExperimentConfig resolve(const CommandLine& line) {
    ExperimentConfig config;
    if (!line.config_file.empty()) {
        beesense::cli::load_config_file(line.config_file, config);
    }
    for (const auto& setting : line.settings) {
        const auto eq = setting.find('=');
        if (eq == std::string::npos || eq == 0) {
            beesense::fail(beesense::ErrorKind::Validation, "--set expects key=value, got '" + setting + "'");
        }
        beesense::cli::apply_setting(config, setting.substr(0, eq), setting.substr(eq + 1));
    }
    for (const auto& [key, value] : line.flags) {
        beesense::cli::apply_setting(config, key, value);
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beehive health classification from images and audio"};
    app.require_subcommand(1);

    std::map<std::string, CommandLine> lines;
    for (const auto& name : beesense::cli::command_names()) {
        auto* sub = app.add_subcommand(name, describe(name));
        auto& line = lines[name];
        sub->add_option("-c,--config", line.config_file, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", line.settings, "Override a config key (key=value), repeatable");
        for (const auto& [flag, key] : flag_table().at(name)) {
            sub->add_option_function<std::string>(
                flag, [&line, key = key](const std::string& v) { line.flags[key] = v; }, "Config key '" + key + "'");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? beesense::cli::kExitOk : beesense::cli::kExitValidation;
    }

    const auto* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        const auto config = resolve(lines.at(command));
        return beesense::cli::run_command(command, config, std::cerr);
    } catch (const beesense::Error& e) {
        std::cerr << "beesense " << command << ": " << e.what() << '\n';
        return beesense::cli::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "beesense " << command << ": " << e.what() << '\n';
        return beesense::cli::kExitRuntime;
    }
}
