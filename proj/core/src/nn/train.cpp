#include "beesense/nn/train.hpp"

#include <chrono>
#include <numeric>

#include "beesense/error.hpp"

namespace beesense::nn {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.n_classes = n_classes;
    for (const auto& [name, t] : inputs) {
        out.inputs[name] = t.gather(rows);
    }
    out.labels.reserve(rows.size());
    for (auto r : rows) {
        require(r < labels.size(), ErrorKind::Range, "dataset row out of range");
        out.labels.push_back(labels[r]);
    }
    return out;
}

Tensor Dataset::targets() const { return one_hot(labels, n_classes); }

void Dataset::validate() const {
    require(n_classes > 0, ErrorKind::Data, "dataset has no classes");
    require(!inputs.empty(), ErrorKind::Data, "dataset has no inputs");
    for (const auto& [name, t] : inputs) {
        if (t.rank() < 2 || t.dim(0) != labels.size()) {
            fail(ErrorKind::Data, "input '" + name + "' has " + shape_string(t.shape()) + " for " +
                                      std::to_string(labels.size()) + " labels");
        }
    }
    for (auto l : labels) {
        require(l < n_classes, ErrorKind::Data, "label " + std::to_string(l) + " outside the class range");
    }
}

double objective(const Tape& tape, const Tensor& targets, const LossSpec& loss, std::vector<Tensor>* grads) {
    const bool with_grad = grads != nullptr;
    if (loss.kind == LossKind::CrossEntropy) {
        auto ce = cross_entropy(tape.output(0), targets, with_grad);
        if (grads) {
            grads->assign(tape.outputs.size(), Tensor());
            (*grads)[0] = std::move(ce.grad);
        }
        return ce.value;
    }
    require(tape.outputs.size() == 3, ErrorKind::State,
            "multimodal loss needs outputs [fused, image head, sound head]");
    auto fused = cross_entropy(tape.output(0), targets, with_grad);
    auto heads = multimodal_loss(tape.output(1), tape.output(2), targets, loss.lambda_image, loss.lambda_sound,
                                 with_grad);
    if (grads) {
        grads->assign(3, Tensor());
        (*grads)[0] = std::move(fused.grad);
        (*grads)[1] = std::move(heads.grad_image);
        (*grads)[2] = std::move(heads.grad_sound);
    }
    return fused.value + heads.total.value;
}

EvalResult evaluate(const NetworkGraph& graph, const Dataset& data, const LossSpec& loss, std::size_t batch_size) {
    data.validate();
    require(!data.empty(), ErrorKind::Data, "cannot evaluate on an empty dataset");
    require(batch_size > 0, ErrorKind::Parameter, "batch size must be positive");
    EvalResult out;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<double> probs;
    std::size_t width = 0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        rows.resize(end - start);
        std::iota(rows.begin(), rows.end(), start);
        const Dataset batch = data.subset(rows);
        Tape tape = graph.forward(batch.inputs, Mode::Inference);
        loss_sum += objective(tape, batch.targets(), loss, nullptr) * static_cast<double>(rows.size());
        const Tensor& p = tape.output(0);
        width = p.dim(1);
        probs.insert(probs.end(), p.values().begin(), p.values().end());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < width; ++j) {
                if (p.at(i, j) > p.at(i, best)) {
                    best = j;
                }
            }
            out.predictions.push_back(best);
            correct += best == batch.labels[i] ? 1 : 0;
        }
    }
    out.loss = loss_sum / static_cast<double>(data.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    out.probabilities = Tensor({data.size(), width}, std::move(probs));
    return out;
}

namespace {

std::vector<Tensor> snapshot(NetworkGraph& graph) {
    std::vector<Tensor> out;
    for (auto& np : graph.parameters()) {
        out.push_back(np.parameter->value);
    }
    return out;
}

void restore(NetworkGraph& graph, const std::vector<Tensor>& saved) {
    auto params = graph.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].parameter->value = saved[i];
    }
}

}  // namespace

TrainHistory train(NetworkGraph& graph, const Dataset& training, const Dataset* validation, const LossSpec& loss,
                   Optimizer& optimizer, const TrainOptions& options) {
    if (training.empty()) {
        fail(ErrorKind::Data, "training set is empty");
    }
    training.validate();
    if (validation && validation->empty()) {
        validation = nullptr;
    }
    if (validation) {
        validation->validate();
    }
    loss.validate();
    require(options.batch_size > 0, ErrorKind::Parameter, "batch size must be positive");
    require(options.epochs > 0, ErrorKind::Parameter, "epoch count must be positive");

    const auto t0 = std::chrono::steady_clock::now();
    Rng root(options.seed);
    Rng order_rng = root.fork(1);
    Rng layer_rng = root.fork(2);

    TrainHistory history;
    std::vector<std::size_t> order(training.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Tensor> grads;
    std::vector<Tensor> best_params;
    double best = 0.0;
    std::size_t wait = 0;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        order_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const Dataset batch = training.subset(rows);
            graph.zero_grad();
            Tape tape = graph.forward(batch.inputs, Mode::Train, &layer_rng);
            objective(tape, batch.targets(), loss, &grads);
            graph.backward(tape, grads);
            optimizer.step(graph);
            graph.commit(tape);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const auto tr = evaluate(graph, training, loss, options.batch_size);
        rec.train_loss = tr.loss;
        rec.train_accuracy = tr.accuracy;
        if (validation) {
            const auto va = evaluate(graph, *validation, loss, options.batch_size);
            rec.val_loss = va.loss;
            rec.val_accuracy = va.accuracy;
        }
        history.epochs.push_back(rec);
        if (options.on_epoch) {
            options.on_epoch(epoch, rec.train_loss, rec.val_loss.value_or(rec.train_loss));
        }

        const double monitored = rec.val_loss.value_or(rec.train_loss);
        if (epoch == 1 || monitored < best) {
            best = monitored;
            history.best_epoch = epoch;
            best_params = snapshot(graph);
            wait = 0;
        } else {
            ++wait;
        }
        if (options.target_train_accuracy && rec.train_accuracy >= *options.target_train_accuracy) {
            history.reached_target = true;
            break;
        }
        if (wait > 0 && wait >= options.patience) {
            history.stopped_early = epoch < options.epochs;
            break;
        }
    }
    if (!history.reached_target && !best_params.empty() && history.best_epoch != history.epochs.size()) {
        restore(graph, best_params);
    }
    history.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return history;
}

}  // namespace beesense::nn
