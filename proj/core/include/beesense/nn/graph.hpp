#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "beesense/nn/layers.hpp"

namespace beesense::nn {

using Feed = std::map<std::string, Tensor>;

/// Activations and caches of one forward pass, consumed by backward().
struct Tape {
    Mode mode = Mode::Inference;
    std::vector<Tensor> values;
    std::vector<Cache> caches;
    std::vector<bool> computed;
    std::vector<std::string> outputs;
    std::vector<std::size_t> output_nodes;

    bool empty() const noexcept { return values.empty(); }
    const Tensor& output(std::size_t i) const;
};

struct NamedParameter {
    std::string name;  // "<node>/<parameter>"
    Parameter* parameter;
};

/// Directed acyclic network of named nodes. Nodes are added in topological
/// order: every input of a node must already exist.
class NetworkGraph {
public:
    NetworkGraph();
    ~NetworkGraph();
    NetworkGraph(NetworkGraph&&) noexcept;
    NetworkGraph& operator=(NetworkGraph&&) noexcept;

    void add_input(const std::string& name, Shape sample_shape);
    /// Builds the layer against its inputs' shapes; shape errors name the node.
    void add(const std::string& name, const LayerSpec& spec, const std::vector<std::string>& inputs);
    void set_outputs(std::vector<std::string> names);

    const std::vector<std::string>& outputs() const noexcept { return outputs_; }
    std::vector<std::string> input_names() const;
    std::vector<std::string> node_names() const;
    bool has_node(const std::string& name) const;
    const Shape& node_shape(const std::string& name) const;
    const LayerSpec& node_spec(const std::string& name) const;
    std::size_t node_count() const noexcept { return nodes_.size(); }

    void initialize(std::uint64_t seed);

    /// Inference, evaluating only the ancestors of `outputs` (default: the
    /// graph outputs).
    Feed predict(const Feed& feed, const std::vector<std::string>& outputs = {}) const;

    Tape forward(const Feed& feed, Mode mode, Rng* rng = nullptr) const;

    /// Accumulates parameter gradients from d(loss)/d(output) for each graph
    /// output (missing outputs count as zero). With `input_gradients` the
    /// returned feed holds d(loss)/d(input); otherwise it is empty and
    /// subgraphs without trainable parameters are skipped.
    Feed backward(const Tape& tape, const std::vector<Tensor>& output_grads, bool input_gradients = false);

    /// Folds training-mode statistics (batchnorm) from a tape into the model.
    void commit(const Tape& tape);

    void zero_grad();

    /// Freezing keeps a node's weights out of optimization.
    void set_trainable(const std::string& node, bool trainable);
    bool is_trainable(const std::string& node) const;

    std::vector<NamedParameter> parameters();
    std::size_t parameter_count() const;
    std::size_t trainable_parameter_count() const;

    std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

    /// Line-oriented description sufficient to rebuild the graph.
    std::string topology() const;
    static NetworkGraph from_topology(const std::string& text);

private:
    struct Node {
        std::string name;
        LayerSpec spec;
        std::vector<std::size_t> inputs;
        Shape shape;
        std::unique_ptr<Layer> layer;
        bool trainable = true;
    };

    std::size_t index_of(const std::string& name) const;
    void check_name(const std::string& name) const;
    std::vector<bool> ancestors(const std::vector<std::size_t>& targets) const;
    std::vector<std::size_t> output_indices(const std::vector<std::string>& names) const;
    void run(const Feed& feed, Mode mode, Rng* rng, const std::vector<bool>& needed, std::vector<Tensor>& values,
             std::vector<Cache>* caches) const;

    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> outputs_;
    std::map<std::string, std::string> metadata_;
};

}  // namespace beesense::nn
