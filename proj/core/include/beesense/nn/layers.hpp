#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "beesense/nn/layer_spec.hpp"
#include "beesense/nn/tensor.hpp"
#include "beesense/rng.hpp"

namespace beesense::nn {

enum class Mode { Train, Inference };

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    /// Running statistics are saved with the model but never optimized.
    bool is_state = false;
    bool trainable = true;
};

/// What a layer keeps from forward for its backward pass.
struct Cache {
    std::vector<Tensor> tensors;
    std::vector<std::size_t> indices;
};

/// One differentiable operation. forward() is const so a trained layer can
/// serve concurrent inference; training-only side effects (running
/// statistics) go through commit().
class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
    virtual ~Layer() = default;
    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    const LayerSpec& spec() const noexcept { return spec_; }

    /// Per-sample output shape; throws ErrorKind::Shape on bad inputs and
    /// allocates parameters for these input shapes.
    virtual Shape build(const std::vector<Shape>& inputs) = 0;

    virtual void initialize(Rng& /*rng*/) {}

    virtual Tensor forward(std::span<const Tensor* const> inputs, Mode mode, Rng* rng,
                           Cache* cache) const = 0;

    /// Accumulates parameter gradients and returns one gradient per input.
    virtual std::vector<Tensor> backward(const Tensor& grad_output, std::span<const Tensor* const> inputs,
                                         const Tensor& output, const Cache& cache) = 0;

    virtual void commit(const Cache& /*cache*/) {}

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }

protected:
    Parameter& add_parameter(std::string name, Shape shape, bool is_state = false);

    LayerSpec spec_;
    std::vector<Parameter> params_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

/// Gate pre-activations, weights laid out as [input | forget | cell | output].
struct LstmWeights {
    Tensor input_kernel;      // (features, 4 * hidden)
    Tensor recurrent_kernel;  // (hidden, 4 * hidden)
    Tensor bias;              // (4 * hidden)
};

struct LstmState {
    Tensor h;  // (batch, hidden)
    Tensor c;  // (batch, hidden)
};

/// One LSTM cell update:
///   i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.)
///   c' = f * c + i * g,  h' = o * tanh(c')
LstmState lstm_step(const Tensor& x_t, const LstmState& state, const LstmWeights& weights);

}  // namespace beesense::nn
