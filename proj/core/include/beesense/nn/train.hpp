#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "beesense/nn/graph.hpp"
#include "beesense/nn/loss.hpp"
#include "beesense/nn/optimizer.hpp"

namespace beesense::nn {

/// Samples keyed by graph input name, all sharing axis 0, plus class labels.
struct Dataset {
    Feed inputs;
    std::vector<std::size_t> labels;
    std::size_t n_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }
    Dataset subset(std::span<const std::size_t> rows) const;
    Tensor targets() const;
    void validate() const;
};

struct TrainOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    /// Stop as soon as inference-mode training accuracy reaches this value;
    /// the weights at that epoch are kept.
    std::optional<double> target_train_accuracy;
    std::function<void(std::size_t epoch, double train_loss, double val_loss)> on_epoch;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
    bool reached_target = false;
    double seconds = 0.0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::size_t> predictions;
    Tensor probabilities;  // first graph output
};

/// Inference-mode loss and accuracy. With a multimodal loss the graph
/// outputs are [fused, image head, sound head] and accuracy uses the first.
EvalResult evaluate(const NetworkGraph& graph, const Dataset& data, const LossSpec& loss,
                    std::size_t batch_size = 64);

/// Minibatch training with early stopping on validation loss (training loss
/// when `validation` is null). Best-epoch weights are restored on exit unless
/// the accuracy target ended training.
TrainHistory train(NetworkGraph& graph, const Dataset& training, const Dataset* validation, const LossSpec& loss,
                   Optimizer& optimizer, const TrainOptions& options);

/// The per-batch objective and output gradients used by train().
double objective(const Tape& tape, const Tensor& targets, const LossSpec& loss, std::vector<Tensor>* grads);

}  // namespace beesense::nn
