#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "beesense/eval/classification.hpp"
#include "beesense/nn/train.hpp"

namespace beesense::eval {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(const std::vector<double>& values);

struct CrossValOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    bool stratified = true;
    /// Share of each training fold held out for early stopping.
    double val_fraction = 0.1;
    nn::TrainOptions train;
    nn::OptimizerConfig optimizer;
    nn::LossSpec loss;
};

struct FoldResult {
    std::size_t fold = 0;  // 1-based
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    double test_loss = 0.0;
    ClassificationReport metrics;
    std::vector<std::string> test_ids;
    std::vector<std::size_t> truth;
    std::vector<std::size_t> predicted;
    std::size_t epochs_run = 0;
    double train_seconds = 0.0;
};

struct CrossValReport {
    std::vector<FoldResult> folds;
    MeanStd accuracy;
    MeanStd precision;
    MeanStd recall;
    MeanStd f1;
    std::vector<std::string> warnings;
};

/// Builds a fresh, uninitialized graph for a fold.
using ModelFactory = std::function<nn::NetworkGraph()>;

/// Row i of `data` belongs to ids[i]. Folds come from the id set and seed
/// only, so the report does not depend on row order. A fold whose test set
/// lacks a class adds a warning.
CrossValReport run_cross_validation(const ModelFactory& factory, const nn::Dataset& data,
                                    const std::vector<std::string>& ids, const CrossValOptions& options);

}  // namespace beesense::eval
