#pragma once

#include "beesense/nn/tensor.hpp"

namespace beesense::nn {

/// Probabilities are clamped to this before the log.
inline constexpr double kLogClamp = 1e-12;

struct LossValue {
    double value = 0.0;
    Tensor grad;  // d(value)/d(pred); empty when not requested
};

/// Mean over rows of -sum(y * log(max(p, 1e-12))). `pred` rows must sum to 1
/// within 1e-6 and `target` rows must be one-hot.
LossValue cross_entropy(const Tensor& pred, const Tensor& target, bool with_grad = false);

struct MultimodalLoss {
    LossValue total;
    double image = 0.0;
    double sound = 0.0;
    Tensor grad_image;
    Tensor grad_sound;
};

/// lambda_img * CE(pred_img) + lambda_snd * CE(pred_snd), both against `target`.
MultimodalLoss multimodal_loss(const Tensor& pred_img, const Tensor& pred_snd, const Tensor& target,
                               double lambda_img, double lambda_snd, bool with_grad = false);

enum class LossKind { CrossEntropy, MultimodalWeighted };

struct LossSpec {
    LossKind kind = LossKind::CrossEntropy;
    double lambda_image = 0.5;
    double lambda_sound = 0.5;

    void validate() const;
};

/// Row-wise argmax.
std::vector<std::size_t> argmax_rows(const Tensor& t);

/// Rows of `classes` one-hot over `n_classes` columns.
Tensor one_hot(const std::vector<std::size_t>& classes, std::size_t n_classes);

}  // namespace beesense::nn
