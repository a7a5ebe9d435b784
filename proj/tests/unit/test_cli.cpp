#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "experiment.hpp"

namespace fs = std::filesystem;
using beesense::ErrorKind;
using namespace beesense::cli;

namespace {

const fs::path kFixture = BEESENSE_FIXTURE_DIR;
const std::string kTool = BEESENSE_CLI_PATH;

// Small shapes so a train run finishes in seconds on the fixture.
const std::string kSmallVisual =
    " --recipe visual-cnn --set image_size=8 --set backbone_filters=8,16 --set backbone_features=64"
    " --epochs 6 --batch-size 8";

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("beesense-cli-") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) const {
        const std::string cmd = kTool + " " + args + " >" + (dir_ / "log.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path dir_;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
    }
    return n;
}

}  // namespace

TEST(ExperimentConfig, AppliesTypedKeys) {
    ExperimentConfig c;
    apply_setting(c, "epochs", "7");
    apply_setting(c, "lr", "0.01");
    apply_setting(c, "stratified", "no");
    apply_setting(c, "backbone_filters", "4,8,16");
    apply_setting(c, "features", "mel,mfcc");
    apply_setting(c, "recipe", "amnn");
    EXPECT_EQ(c.epochs, 7u);
    EXPECT_DOUBLE_EQ(c.lr, 0.01);
    EXPECT_FALSE(c.stratified);
    EXPECT_EQ(c.model_config.backbone.filters, (std::vector<std::size_t>{4, 8, 16}));
    EXPECT_EQ(c.extract_features.size(), 2u);
    EXPECT_EQ(c.model_config.recipe, "amnn");
}

TEST(ExperimentConfig, RejectsBadValuesAsValidationErrors) {
    ExperimentConfig c;
    for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
             {"epochs", "0"}, {"epochs", "two"}, {"lr", "-1"}, {"recipe", "resnet"}, {"feature", "zcr"},
             {"stratified", "maybe"}, {"no_such_key", "1"}, {"split", "train"}}) {
        try {
            apply_setting(c, key, value);
            ADD_FAILURE() << key << "=" << value << " was accepted";
        } catch (const beesense::Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Validation) << key;
            EXPECT_EQ(exit_code_for(e.kind()), kExitValidation);
        }
    }
}

TEST(ExperimentConfig, ConfigFilePathsResolveAgainstTheFile) {
    const auto dir = fs::temp_directory_path() / "beesense-cli-config";
    fs::create_directories(dir);
    std::ofstream(dir / "run.json") << R"({"dataset": "data", "epochs": 3, "lr": 0.5, "stratified": false,
                                          "backbone_filters": [2, 4]})";
    ExperimentConfig c;
    load_config_file(dir / "run.json", c);
    EXPECT_EQ(c.dataset, dir / "data");
    EXPECT_EQ(c.epochs, 3u);
    EXPECT_DOUBLE_EQ(c.lr, 0.5);
    EXPECT_FALSE(c.stratified);
    EXPECT_EQ(c.model_config.backbone.filters, (std::vector<std::size_t>{2, 4}));
    fs::remove_all(dir);
}

TEST(ExitCodes, RuntimeKindsMapToTwo) {
    EXPECT_EQ(exit_code_for(ErrorKind::Version), kExitValidation);
    EXPECT_EQ(exit_code_for(ErrorKind::Parameter), kExitValidation);
    EXPECT_EQ(exit_code_for(ErrorKind::Io), kExitRuntime);
    EXPECT_EQ(exit_code_for(ErrorKind::Format), kExitRuntime);
    EXPECT_EQ(exit_code_for(ErrorKind::State), kExitRuntime);
}

TEST_F(CliTest, InvalidConfigFailsBeforeCreatingOutput) {
    const auto out = dir_ / "out";
    EXPECT_EQ(run("train --dataset " + kFixture.string() + " --output " + out.string()), kExitValidation)
        << "seed is required";
    EXPECT_EQ(run("train --seed 1 --dataset " + (dir_ / "missing").string() + " --output " + out.string()),
              kExitValidation);
    EXPECT_EQ(run("train --seed 1 --dataset " + kFixture.string() + " --output " + out.string() + " --set lr=oops"),
              kExitValidation);
    EXPECT_EQ(run("evaluate --dataset " + kFixture.string() + " --model " + (dir_ / "none.bsm").string() +
                  " --output " + out.string()),
              kExitValidation);
    EXPECT_EQ(run("no-such-command"), kExitValidation);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, HeldLockIsARuntimeFailure) {
    const auto out = dir_ / "locked";
    fs::create_directories(out);
    std::ofstream(out / ".beesense.lock") << "1\n";
    EXPECT_EQ(run("make-fixture --per-class 1 --output " + out.string()), kExitRuntime);
    EXPECT_FALSE(fs::exists(out / "manifest"));
}

TEST_F(CliTest, TrainIsDeterministicAndEvaluateReproducesItsReport) {
    const std::string common = "train --dataset " + kFixture.string() + " --seed 5" + kSmallVisual;
    ASSERT_EQ(run(common + " --output " + (dir_ / "a").string()), kExitOk) << slurp(dir_ / "log.txt");
    ASSERT_EQ(run(common + " --output " + (dir_ / "b").string()), kExitOk);
    for (const char* file : {"model.bsm", "report.csv", "per_class.csv", "history.csv", "split.csv"}) {
        ASSERT_TRUE(fs::exists(dir_ / "a" / file)) << file;
        EXPECT_EQ(slurp(dir_ / "a" / file), slurp(dir_ / "b" / file)) << file;
    }
    EXPECT_FALSE(fs::exists(dir_ / "a" / ".beesense.lock"));

    ASSERT_EQ(run("evaluate --dataset " + kFixture.string() + " --model " + (dir_ / "a" / "model.bsm").string() +
                  " --output " + (dir_ / "eval").string()),
              kExitOk)
        << slurp(dir_ / "log.txt");
    EXPECT_EQ(slurp(dir_ / "a" / "report.csv"), slurp(dir_ / "eval" / "report.csv"));
    EXPECT_EQ(slurp(dir_ / "a" / "per_class.csv"), slurp(dir_ / "eval" / "per_class.csv"));

    ASSERT_EQ(run("predict --dataset " + kFixture.string() + " --model " + (dir_ / "a" / "model.bsm").string() +
                  " --output " + (dir_ / "pred").string()),
              kExitOk);
    EXPECT_EQ(line_count(dir_ / "pred" / "predictions.csv"), 1 + 24u);
}

TEST_F(CliTest, ModelFromAnotherLabelSetIsRejected) {
    ASSERT_EQ(run("train --dataset " + kFixture.string() + " --seed 2" + kSmallVisual + " --output " +
                  (dir_ / "m").string()),
              kExitOk);
    std::ofstream(dir_ / "manifest") << "id image audio label\n"
                                     << "x " << (kFixture / "images/s00.png").string() << " - bee\n";
    EXPECT_EQ(run("evaluate --split all --dataset " + (dir_ / "manifest").string() + " --model " +
                  (dir_ / "m" / "model.bsm").string() + " --output " + (dir_ / "e").string()),
              kExitValidation);
    EXPECT_FALSE(fs::exists(dir_ / "e"));
}

TEST_F(CliTest, ExtractWritesOneRecordPerClipAndKindAndIsIdempotent) {
    const auto out = dir_ / "x";
    const std::string args = "extract --dataset " + kFixture.string() + " --features mel,mfcc,chroma --output " +
                             out.string();
    ASSERT_EQ(run(args), kExitOk) << slurp(dir_ / "log.txt");
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(out / "features")) {
        first[e.path().filename().string()] = slurp(e.path());
    }
    EXPECT_EQ(first.size(), 24u * 3u);
    EXPECT_TRUE(first.count("s00.mfcc.feat"));

    ASSERT_EQ(run(args), kExitOk);
    std::size_t second = 0;
    for (const auto& e : fs::directory_iterator(out / "features")) {
        ++second;
        EXPECT_EQ(slurp(e.path()), first[e.path().filename().string()]) << e.path();
    }
    EXPECT_EQ(second, first.size());
}

TEST_F(CliTest, ExtractSkipsUnreadableClips) {
    fs::create_directories(dir_ / "d");
    fs::copy_file(kFixture / "audio/s00.wav", dir_ / "d/good.wav");
    std::ofstream(dir_ / "d/bad.wav") << "not a wave file";
    std::ofstream(dir_ / "d/manifest") << "good - good.wav healthy\nbad - bad.wav healthy\n";
    ASSERT_EQ(run("extract --dataset " + (dir_ / "d").string() + " --features mel --output " +
                  (dir_ / "x").string()),
              kExitOk);
    EXPECT_TRUE(fs::exists(dir_ / "x/features/good.mel.feat"));
    EXPECT_FALSE(fs::exists(dir_ / "x/features/bad.mel.feat"));
    EXPECT_NE(slurp(dir_ / "log.txt").find("skipping bad"), std::string::npos);

    std::ofstream(dir_ / "d/manifest") << "bad - bad.wav healthy\n";
    EXPECT_EQ(run("extract --dataset " + (dir_ / "d").string() + " --output " + (dir_ / "y").string()),
              kExitRuntime);
}

TEST_F(CliTest, CrossValidationDefaultsToFiveFolds) {
    ASSERT_EQ(run("crossval --dataset " + kFixture.string() + " --seed 1 --epochs 2" + " --recipe visual-cnn" +
                  " --set image_size=8 --set backbone_filters=4 --set backbone_features=8 --output " +
                  (dir_ / "cv").string()),
              kExitOk)
        << slurp(dir_ / "log.txt");
    // header, five folds, mean, std
    EXPECT_EQ(line_count(dir_ / "cv" / "crossval.csv"), 1u + 5u + 2u);
    EXPECT_TRUE(fs::exists(dir_ / "cv" / "crossval.txt"));
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
    std::ofstream(dir_ / "run.json") << R"({"per_class": 3, "seed": 11})";
    ASSERT_EQ(run("make-fixture --config " + (dir_ / "run.json").string() + " --per-class 1 --output " +
                  (dir_ / "fx").string()),
              kExitOk);
    // one sample per class plus the header
    EXPECT_EQ(line_count(dir_ / "fx" / "manifest"), 1u + 4u);
}

TEST_F(CliTest, DetectEvalScoresTheFixtureBoxes) {
    ASSERT_EQ(run("detect-eval --labels " + (kFixture / "labels").string() + " --predictions " +
                  (kFixture / "predictions").string() + " --image-width 32 --image-height 32 --output " +
                  (dir_ / "d").string()),
              kExitOk);
    const auto csv = slurp(dir_ / "d" / "detection.csv");
    EXPECT_EQ(csv.rfind("model,precision,recall,map50,map50_95\n", 0), 0u);
    EXPECT_EQ(line_count(dir_ / "d" / "detection.csv"), 2u);
}
