#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "beesense/eval/classification.hpp"
#include "beesense/eval/crossval.hpp"
#include "beesense/eval/detection.hpp"
#include "beesense/eval/timing.hpp"

namespace beesense::eval {

struct ClassificationRow {
    std::string model;
    std::string feature;
    ClassificationReport metrics;
};

struct DetectionRow {
    std::string model;
    MapResult result;
};

// CSV columns:
//   classification: model,feature,accuracy,precision,recall,f1,support
//   per-class:      model,class,precision,recall,f1,support
//   crossval:       model,fold,n_train,n_val,n_test,accuracy,precision,recall,f1
//                   (last two rows have fold "mean" and "std")
//   detection:      model,precision,recall,map50,map50_95
//   timing:         model,training_s,inference_s,inference_std_s,repetitions,batch_size
// Rates are fractions with six decimals; the text tables show percentages.

std::string classification_csv(const std::vector<ClassificationRow>& rows);
std::string per_class_csv(const std::string& model, const ClassificationReport& report,
                          const std::vector<std::string>& class_names);
std::string crossval_csv(const std::string& model, const CrossValReport& report);
std::string detection_csv(const std::vector<DetectionRow>& rows);
std::string timing_csv(const TimingReport& report);

std::string classification_table(const std::vector<ClassificationRow>& rows);
std::string confusion_table(const ConfusionMatrix& cm);
std::string crossval_table(const std::string& model, const CrossValReport& report);
std::string detection_table(const std::vector<DetectionRow>& rows);
std::string timing_table(const TimingReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace beesense::eval
