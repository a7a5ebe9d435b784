#include "beesense/nn/loss.hpp"

#include <cmath>

#include "beesense/error.hpp"

namespace beesense::nn {
namespace {

void check_pair(const Tensor& pred, const Tensor& target) {
    if (pred.rank() != 2 || pred.shape() != target.shape()) {
        fail(ErrorKind::Shape, "cross entropy needs matching (batch, classes) tensors, got " +
                                   shape_string(pred.shape()) + " and " + shape_string(target.shape()));
    }
    if (pred.dim(0) == 0) {
        fail(ErrorKind::EmptyInput, "cross entropy on an empty batch");
    }
    const std::size_t n = pred.dim(0);
    const std::size_t c = pred.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        std::size_t ones = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const double p = pred.at(i, j);
            const double y = target.at(i, j);
            if (!(p >= 0.0)) {
                fail(ErrorKind::Precondition, "prediction row " + std::to_string(i) + " has a negative entry");
            }
            total += p;
            if (y == 1.0) {
                ++ones;
            } else if (y != 0.0) {
                fail(ErrorKind::Precondition, "target row " + std::to_string(i) + " is not one-hot");
            }
        }
        if (std::abs(total - 1.0) > 1e-6) {
            fail(ErrorKind::Precondition, "prediction row " + std::to_string(i) + " sums to " +
                                              std::to_string(total) + ", not 1");
        }
        if (ones != 1) {
            fail(ErrorKind::Precondition, "target row " + std::to_string(i) + " is not one-hot");
        }
    }
}

}  // namespace

LossValue cross_entropy(const Tensor& pred, const Tensor& target, bool with_grad) {
    check_pair(pred, target);
    const std::size_t n = pred.dim(0);
    const std::size_t c = pred.dim(1);
    LossValue out;
    if (with_grad) {
        out.grad = Tensor(pred.shape());
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double y = target.at(i, j);
            if (y == 0.0) {
                continue;
            }
            const double p = pred.at(i, j);
            total -= y * std::log(std::max(p, kLogClamp));
            if (with_grad && p > kLogClamp) {
                out.grad.at(i, j) = -y / (p * static_cast<double>(n));
            }
        }
    }
    out.value = total / static_cast<double>(n);
    return out;
}

MultimodalLoss multimodal_loss(const Tensor& pred_img, const Tensor& pred_snd, const Tensor& target,
                               double lambda_img, double lambda_snd, bool with_grad) {
    LossSpec{LossKind::MultimodalWeighted, lambda_img, lambda_snd}.validate();
    auto img = cross_entropy(pred_img, target, with_grad);
    auto snd = cross_entropy(pred_snd, target, with_grad);
    MultimodalLoss out;
    out.image = img.value;
    out.sound = snd.value;
    out.total.value = lambda_img * img.value + lambda_snd * snd.value;
    if (with_grad) {
        for (double& g : img.grad.values()) {
            g *= lambda_img;
        }
        for (double& g : snd.grad.values()) {
            g *= lambda_snd;
        }
        out.grad_image = std::move(img.grad);
        out.grad_sound = std::move(snd.grad);
    }
    return out;
}

void LossSpec::validate() const {
    if (kind != LossKind::MultimodalWeighted) {
        return;
    }
    if (!(lambda_image >= 0.0) || !(lambda_sound >= 0.0)) {
        fail(ErrorKind::Parameter, "loss weights must be nonnegative");
    }
    if (!(lambda_image + lambda_sound > 0.0)) {
        fail(ErrorKind::Parameter, "loss weights must not both be zero");
    }
}

std::vector<std::size_t> argmax_rows(const Tensor& t) {
    require(t.rank() == 2, ErrorKind::Shape, "argmax_rows needs a (batch, classes) tensor");
    std::vector<std::size_t> out(t.dim(0));
    for (std::size_t i = 0; i < t.dim(0); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < t.dim(1); ++j) {
            if (t.at(i, j) > t.at(i, best)) {
                best = j;
            }
        }
        out[i] = best;
    }
    return out;
}

Tensor one_hot(const std::vector<std::size_t>& classes, std::size_t n_classes) {
    Tensor t({classes.size(), n_classes});
    for (std::size_t i = 0; i < classes.size(); ++i) {
        require(classes[i] < n_classes, ErrorKind::Range, "class index out of range for one-hot");
        t.at(i, classes[i]) = 1.0;
    }
    return t;
}

}  // namespace beesense::nn
