#include "beesense/nn/graph.hpp"

#include <algorithm>
#include <sstream>

#include "beesense/error.hpp"

namespace beesense::nn {

const Tensor& Tape::output(std::size_t i) const {
    require(!empty(), ErrorKind::State, "tape is empty");
    require(i < outputs.size(), ErrorKind::Range, "tape output index out of range");
    return values.at(output_nodes[i]);
}

NetworkGraph::NetworkGraph() = default;
NetworkGraph::~NetworkGraph() = default;
NetworkGraph::NetworkGraph(NetworkGraph&&) noexcept = default;
NetworkGraph& NetworkGraph::operator=(NetworkGraph&&) noexcept = default;

void NetworkGraph::check_name(const std::string& name) const {
    if (name.empty() || name.find_first_of(" \t\r\n,=") != std::string::npos) {
        fail(ErrorKind::Parameter, "node name '" + name + "' must be non-empty without spaces, commas or '='");
    }
    if (index_.count(name)) {
        fail(ErrorKind::Parameter, "duplicate node name '" + name + "'");
    }
}

std::size_t NetworkGraph::index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) {
        fail(ErrorKind::Parameter, "no node named '" + name + "'");
    }
    return it->second;
}

void NetworkGraph::add_input(const std::string& name, Shape sample_shape) {
    check_name(name);
    if (sample_shape.empty() || shape_size(sample_shape) == 0) {
        fail(ErrorKind::Shape, "input '" + name + "' needs a non-empty shape");
    }
    Node node;
    node.name = name;
    node.spec = LayerSpec::input(sample_shape);
    node.shape = std::move(sample_shape);
    node.trainable = false;
    index_[name] = nodes_.size();
    nodes_.push_back(std::move(node));
}

void NetworkGraph::add(const std::string& name, const LayerSpec& spec, const std::vector<std::string>& inputs) {
    check_name(name);
    if (spec.kind == LayerKind::Input) {
        add_input(name, spec.shape);
        return;
    }
    Node node;
    node.name = name;
    node.spec = spec;
    std::vector<Shape> shapes;
    for (const auto& in : inputs) {
        const auto it = index_.find(in);
        if (it == index_.end()) {
            fail(ErrorKind::Parameter, "node '" + name + "' reads unknown node '" + in + "'");
        }
        node.inputs.push_back(it->second);
        shapes.push_back(nodes_[it->second].shape);
    }
    try {
        node.layer = make_layer(spec);
        node.shape = node.layer->build(shapes);
    } catch (const Error& e) {
        fail(e.kind(), "node '" + name + "': " + e.what());
    }
    index_[name] = nodes_.size();
    nodes_.push_back(std::move(node));
}

void NetworkGraph::set_outputs(std::vector<std::string> names) {
    require(!names.empty(), ErrorKind::Parameter, "a graph needs at least one output");
    for (const auto& n : names) {
        index_of(n);
    }
    outputs_ = std::move(names);
}

std::vector<std::string> NetworkGraph::input_names() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        if (!n.layer) {
            out.push_back(n.name);
        }
    }
    return out;
}

std::vector<std::string> NetworkGraph::node_names() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        out.push_back(n.name);
    }
    return out;
}

bool NetworkGraph::has_node(const std::string& name) const { return index_.count(name) != 0; }

const Shape& NetworkGraph::node_shape(const std::string& name) const { return nodes_[index_of(name)].shape; }

const LayerSpec& NetworkGraph::node_spec(const std::string& name) const { return nodes_[index_of(name)].spec; }

void NetworkGraph::initialize(std::uint64_t seed) {
    Rng root(seed);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].layer) {
            Rng rng = root.fork(i);
            nodes_[i].layer->initialize(rng);
        }
    }
}

std::vector<bool> NetworkGraph::ancestors(const std::vector<std::size_t>& targets) const {
    std::vector<bool> needed(nodes_.size(), false);
    for (auto t : targets) {
        needed[t] = true;
    }
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (needed[i]) {
            for (auto in : nodes_[i].inputs) {
                needed[in] = true;
            }
        }
    }
    return needed;
}

std::vector<std::size_t> NetworkGraph::output_indices(const std::vector<std::string>& names) const {
    const auto& list = names.empty() ? outputs_ : names;
    require(!list.empty(), ErrorKind::State, "graph has no outputs set");
    std::vector<std::size_t> idx;
    for (const auto& n : list) {
        idx.push_back(index_of(n));
    }
    return idx;
}

void NetworkGraph::run(const Feed& feed, Mode mode, Rng* rng, const std::vector<bool>& needed,
                       std::vector<Tensor>& values, std::vector<Cache>* caches) const {
    std::size_t batch = 0;
    values.assign(nodes_.size(), Tensor());
    std::vector<const Tensor*> args;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!needed[i]) {
            continue;
        }
        const Node& node = nodes_[i];
        if (!node.layer) {
            const auto it = feed.find(node.name);
            if (it == feed.end()) {
                fail(ErrorKind::Parameter, "no value fed for input '" + node.name + "'");
            }
            const Tensor& t = it->second;
            if (t.rank() != node.shape.size() + 1 || !std::equal(node.shape.begin(), node.shape.end(), t.shape().begin() + 1)) {
                fail(ErrorKind::Shape, "input '" + node.name + "' expects (batch, ...) with sample shape " +
                                           shape_string(node.shape) + ", got " + shape_string(t.shape()));
            }
            if (t.dim(0) == 0) {
                fail(ErrorKind::EmptyInput, "input '" + node.name + "' has an empty batch");
            }
            if (batch == 0) {
                batch = t.dim(0);
            } else if (batch != t.dim(0)) {
                fail(ErrorKind::Shape, "inputs disagree on batch size");
            }
            check_finite(t, "input '" + node.name + "'");
            values[i] = t;
            continue;
        }
        args.clear();
        for (auto in : node.inputs) {
            args.push_back(&values[in]);
        }
        Cache* cache = caches ? &(*caches)[i] : nullptr;
        try {
            values[i] = node.layer->forward(args, mode, rng, cache);
        } catch (const Error& e) {
            fail(e.kind(), "node '" + node.name + "': " + e.what());
        }
        check_finite(values[i], "node '" + node.name + "'");
    }
}

Feed NetworkGraph::predict(const Feed& feed, const std::vector<std::string>& outputs) const {
    const auto targets = output_indices(outputs);
    std::vector<Tensor> values;
    run(feed, Mode::Inference, nullptr, ancestors(targets), values, nullptr);
    Feed out;
    for (auto t : targets) {
        out[nodes_[t].name] = values[t];
    }
    return out;
}

Tape NetworkGraph::forward(const Feed& feed, Mode mode, Rng* rng) const {
    const auto targets = output_indices({});
    Tape tape;
    tape.mode = mode;
    tape.computed = ancestors(targets);
    tape.caches.assign(nodes_.size(), Cache());
    run(feed, mode, rng, tape.computed, tape.values, &tape.caches);
    tape.outputs = outputs_;
    tape.output_nodes = targets;
    return tape;
}

Feed NetworkGraph::backward(const Tape& tape, const std::vector<Tensor>& output_grads, bool input_gradients) {
    if (tape.empty()) {
        fail(ErrorKind::State, "backward() needs a tape from forward()");
    }
    require(tape.outputs == outputs_, ErrorKind::State, "tape was recorded with different outputs");
    require(output_grads.size() == outputs_.size(), ErrorKind::Shape,
            "expected one gradient per graph output");
    auto value = [&](std::size_t i) -> const Tensor& { return tape.values[i]; };

    // A node needs a gradient if it or something upstream of it learns.
    std::vector<bool> wants(nodes_.size(), false);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (!tape.computed[i]) {
            continue;
        }
        if (!n.layer) {
            wants[i] = input_gradients;
            continue;
        }
        bool any = false;
        for (const auto& p : n.layer->parameters()) {
            any = any || (p.trainable && !p.is_state);
        }
        for (auto in : n.inputs) {
            any = any || wants[in];
        }
        wants[i] = any;
    }

    std::vector<Tensor> grads(nodes_.size());
    const auto targets = output_indices({});
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const std::size_t t = targets[k];
        if (output_grads[k].empty()) {
            continue;
        }
        if (output_grads[k].shape() != value(t).shape()) {
            fail(ErrorKind::Shape, "gradient for output '" + outputs_[k] + "' has shape " +
                                       shape_string(output_grads[k].shape()) + ", expected " +
                                       shape_string(value(t).shape()));
        }
        if (grads[t].empty()) {
            grads[t] = output_grads[k];
        } else {
            for (std::size_t j = 0; j < grads[t].size(); ++j) {
                grads[t][j] += output_grads[k][j];
            }
        }
    }

    std::vector<const Tensor*> args;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.layer || grads[i].empty() || !wants[i]) {
            continue;
        }
        args.clear();
        for (auto in : node.inputs) {
            args.push_back(&value(in));
        }
        auto in_grads = node.layer->backward(grads[i], args, value(i), tape.caches[i]);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const std::size_t src = node.inputs[k];
            if (!wants[src]) {
                continue;
            }
            if (grads[src].empty()) {
                grads[src] = std::move(in_grads[k]);
            } else {
                for (std::size_t j = 0; j < grads[src].size(); ++j) {
                    grads[src][j] += in_grads[k][j];
                }
            }
        }
        grads[i] = Tensor();
    }

    Feed out;
    if (input_gradients) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!nodes_[i].layer && tape.computed[i]) {
                out[nodes_[i].name] = grads[i].empty() ? Tensor(value(i).shape()) : std::move(grads[i]);
            }
        }
    }
    return out;
}

void NetworkGraph::commit(const Tape& tape) {
    if (tape.empty() || tape.mode != Mode::Train) {
        return;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].layer && tape.computed[i] && nodes_[i].trainable) {
            nodes_[i].layer->commit(tape.caches[i]);
        }
    }
}

void NetworkGraph::zero_grad() {
    for (auto& n : nodes_) {
        if (n.layer) {
            for (auto& p : n.layer->parameters()) {
                p.grad.fill(0.0);
            }
        }
    }
}

void NetworkGraph::set_trainable(const std::string& node, bool trainable) {
    Node& n = nodes_[index_of(node)];
    if (!n.layer) {
        return;
    }
    n.trainable = trainable;
    for (auto& p : n.layer->parameters()) {
        p.trainable = trainable && !p.is_state;
    }
}

bool NetworkGraph::is_trainable(const std::string& node) const { return nodes_[index_of(node)].trainable; }

std::vector<NamedParameter> NetworkGraph::parameters() {
    std::vector<NamedParameter> out;
    for (auto& n : nodes_) {
        if (n.layer) {
            for (auto& p : n.layer->parameters()) {
                out.push_back({n.name + "/" + p.name, &p});
            }
        }
    }
    return out;
}

std::size_t NetworkGraph::parameter_count() const {
    std::size_t total = 0;
    for (const auto& n : nodes_) {
        if (n.layer) {
            for (const auto& p : n.layer->parameters()) {
                total += p.value.size();
            }
        }
    }
    return total;
}

std::size_t NetworkGraph::trainable_parameter_count() const {
    std::size_t total = 0;
    for (const auto& n : nodes_) {
        if (n.layer) {
            for (const auto& p : n.layer->parameters()) {
                if (p.trainable && !p.is_state) {
                    total += p.value.size();
                }
            }
        }
    }
    return total;
}

std::string NetworkGraph::topology() const {
    std::ostringstream out;
    for (const auto& [k, v] : metadata_) {
        out << "meta " << k << ' ' << v << '\n';
    }
    for (const auto& n : nodes_) {
        out << "node " << n.name << " in=";
        if (n.inputs.empty()) {
            out << '-';
        }
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            out << (k ? "," : "") << nodes_[n.inputs[k]].name;
        }
        out << ' ' << n.spec.describe();
        if (n.layer && !n.trainable) {
            out << " frozen";
        }
        out << '\n';
    }
    for (const auto& o : outputs_) {
        out << "output " << o << '\n';
    }
    return out.str();
}

NetworkGraph NetworkGraph::from_topology(const std::string& text) {
    NetworkGraph g;
    std::istringstream in(text);
    std::vector<std::string> outputs;
    std::vector<std::string> frozen;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        auto bad = [&](const std::string& why) {
            fail(ErrorKind::Parse, "topology line " + std::to_string(line_no) + ": " + why);
        };
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (key.empty()) {
                bad("meta needs a key");
            }
            g.metadata_[key] = value.empty() ? value : value.substr(1);
        } else if (tag == "node") {
            std::string name, ins;
            ls >> name >> ins;
            if (name.empty() || ins.rfind("in=", 0) != 0) {
                bad("expected 'node <name> in=<inputs> <layer>'");
            }
            std::vector<std::string> inputs;
            ins = ins.substr(3);
            if (ins != "-") {
                std::istringstream is(ins);
                for (std::string part; std::getline(is, part, ',');) {
                    inputs.push_back(part);
                }
            }
            std::string rest;
            std::getline(ls, rest);
            constexpr std::string_view kFrozen = " frozen";
            if (rest.size() >= kFrozen.size() && rest.compare(rest.size() - kFrozen.size(), kFrozen.size(), kFrozen) == 0) {
                rest.resize(rest.size() - kFrozen.size());
                frozen.push_back(name);
            }
            const LayerSpec spec = LayerSpec::parse(rest);
            if (spec.kind == LayerKind::Input) {
                g.add_input(name, spec.shape);
            } else {
                g.add(name, spec, inputs);
            }
        } else if (tag == "output") {
            std::string name;
            ls >> name;
            outputs.push_back(name);
        } else {
            bad("unknown tag '" + tag + "'");
        }
    }
    if (!outputs.empty()) {
        g.set_outputs(outputs);
    }
    for (const auto& f : frozen) {
        g.set_trainable(f, false);
    }
    return g;
}

}  // namespace beesense::nn
