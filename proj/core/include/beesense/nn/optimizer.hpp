#pragma once

#include <map>
#include <span>
#include <string>

#include "beesense/nn/graph.hpp"

namespace beesense::nn {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double momentum = 0.0;  // sgd only
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerConfig sgd(double lr, double momentum = 0.0);
    static OptimizerConfig adam(double lr);

    void validate() const;
};

struct ParamSlot {
    std::string name;
    Tensor* value;
    const Tensor* grad;
};

/// SGD with momentum (v = m*v + g; p -= lr*v) or Adam with bias-corrected
/// moments. Accumulators are created on first sight of a parameter name.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    void step(std::span<const ParamSlot> slots);
    /// Steps every trainable, non-state parameter of the graph.
    void step(NetworkGraph& graph);

    const OptimizerConfig& config() const noexcept { return config_; }
    std::size_t steps_taken() const noexcept { return t_; }
    void reset();

private:
    struct Slot {
        Tensor m;
        Tensor v;
    };

    OptimizerConfig config_;
    std::size_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace beesense::nn
