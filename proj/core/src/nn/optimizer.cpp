#include "beesense/nn/optimizer.hpp"

#include <cmath>
#include <vector>

#include "beesense/error.hpp"

namespace beesense::nn {

OptimizerConfig OptimizerConfig::sgd(double lr, double momentum) {
    OptimizerConfig c;
    c.kind = OptimizerKind::SgdMomentum;
    c.lr = lr;
    c.momentum = momentum;
    return c;
}

OptimizerConfig OptimizerConfig::adam(double lr) {
    OptimizerConfig c;
    c.kind = OptimizerKind::Adam;
    c.lr = lr;
    return c;
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        fail(ErrorKind::Parameter, "learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        fail(ErrorKind::Parameter, "momentum must lie in [0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        fail(ErrorKind::Parameter, "Adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) {
        fail(ErrorKind::Parameter, "Adam epsilon must be positive");
    }
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

void Optimizer::reset() {
    t_ = 0;
    slots_.clear();
}

void Optimizer::step(std::span<const ParamSlot> slots) {
    for (const auto& s : slots) {
        if (s.value->shape() != s.grad->shape()) {
            fail(ErrorKind::Shape, "gradient for '" + s.name + "' has shape " + shape_string(s.grad->shape()) +
                                       ", parameter has " + shape_string(s.value->shape()));
        }
        const auto it = slots_.find(s.name);
        if (it != slots_.end() && it->second.m.shape() != s.value->shape()) {
            fail(ErrorKind::Shape, "accumulator for '" + s.name + "' no longer matches its parameter");
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (const auto& s : slots) {
        auto [it, fresh] = slots_.try_emplace(s.name);
        Slot& slot = it->second;
        if (fresh) {
            slot.m = Tensor(s.value->shape());
            if (config_.kind == OptimizerKind::Adam) {
                slot.v = Tensor(s.value->shape());
            }
        }
        Tensor& p = *s.value;
        const Tensor& g = *s.grad;
        if (config_.kind == OptimizerKind::SgdMomentum) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                slot.m[i] = config_.momentum * slot.m[i] + g[i];
                p[i] -= config_.lr * slot.m[i];
            }
        } else {
            for (std::size_t i = 0; i < p.size(); ++i) {
                slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g[i];
                slot.v[i] = config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
                const double m_hat = slot.m[i] / bc1;
                const double v_hat = slot.v[i] / bc2;
                p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
            }
        }
    }
}

void Optimizer::step(NetworkGraph& graph) {
    std::vector<ParamSlot> slots;
    for (auto& np : graph.parameters()) {
        if (np.parameter->trainable && !np.parameter->is_state) {
            slots.push_back({np.name, &np.parameter->value, &np.parameter->grad});
        }
    }
    step(slots);
}

}  // namespace beesense::nn
