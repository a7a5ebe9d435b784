#pragma once

#include <string>
#include <vector>

#include "beesense/nn/graph.hpp"

namespace beesense::eval {

struct TimedModel {
    std::string name;
    const nn::NetworkGraph* graph = nullptr;
    nn::Feed batch;
    double training_seconds = 0.0;
};

struct TimingEntry {
    std::string model;
    double training_seconds = 0.0;
    double inference_seconds = 0.0;  // mean per batch
    double inference_stddev = 0.0;
    std::size_t repetitions = 0;
    std::size_t batch_size = 0;
};

struct TimingReport {
    std::vector<TimingEntry> entries;
    std::string environment;
};

/// Runs one untimed warm-up per model, then `repetitions` rounds that time a
/// single inference batch of every model in turn (interleaved so drift hits
/// all models alike). Uses the steady clock.
TimingReport measure_times(const std::vector<TimedModel>& models, std::size_t repetitions = 100);

/// Compiler, build type and hardware thread count.
std::string environment_note();

}  // namespace beesense::eval
