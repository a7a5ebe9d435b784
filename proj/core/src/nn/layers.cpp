#include "beesense/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "beesense/error.hpp"

namespace beesense::nn {
namespace {

using Index = Eigen::Index;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;
using CRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

CMatMap cmat(const double* p, std::size_t rows, std::size_t cols) {
    return CMatMap(p, static_cast<Index>(rows), static_cast<Index>(cols));
}
MatMap mat(double* p, std::size_t rows, std::size_t cols) {
    return MatMap(p, static_cast<Index>(rows), static_cast<Index>(cols));
}

std::string layer_name(const LayerSpec& spec) { return std::string(to_string(spec.kind)); }

void expect_inputs(const LayerSpec& spec, const std::vector<Shape>& inputs, std::size_t n) {
    if (inputs.size() != n) {
        fail(ErrorKind::Shape, layer_name(spec) + " takes " + std::to_string(n) + " input(s), got " +
                                   std::to_string(inputs.size()));
    }
}

void expect_rank(const LayerSpec& spec, const Shape& shape, std::size_t rank, const char* layout) {
    if (shape.size() != rank) {
        fail(ErrorKind::Shape, layer_name(spec) + " expects per-sample shape " + layout + ", got " +
                                   shape_string(shape));
    }
}

void expect_sample(const LayerSpec& spec, const Tensor& t, std::size_t sample_size) {
    if (t.rank() < 1 || t.dim(0) == 0 || t.sample_size() != sample_size) {
        fail(ErrorKind::Shape, layer_name(spec) + " got a tensor of shape " + shape_string(t.shape()) +
                                   " for samples of " + std::to_string(sample_size) + " values");
    }
}

void uniform_fill(Tensor& t, double limit, Rng& rng) {
    for (double& v : t.values()) {
        v = rng.uniform(-limit, limit);
    }
}

double init_limit(Init init, std::size_t fan_in, std::size_t fan_out) {
    if (init == Init::HeUniform) {
        return std::sqrt(6.0 / static_cast<double>(fan_in));
    }
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Shape with_batch(std::size_t batch, const Shape& sample) {
    Shape s;
    s.reserve(sample.size() + 1);
    s.push_back(batch);
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------

class DenseLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        expect_rank(spec_, inputs[0], 1, "(features)");
        in_ = inputs[0][0];
        params_.clear();
        add_parameter("kernel", {in_, spec_.units});
        add_parameter("bias", {spec_.units});
        return {spec_.units};
    }

    void initialize(Rng& rng) override {
        uniform_fill(params_[0].value, init_limit(spec_.init, in_, spec_.units), rng);
        params_[1].value.fill(0.0);
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        const Tensor& x = *inputs[0];
        expect_sample(spec_, x, in_);
        const std::size_t batch = x.dim(0);
        Tensor y({batch, spec_.units});
        auto Y = mat(y.data(), batch, spec_.units);
        Y.noalias() = cmat(x.data(), batch, in_) * cmat(params_[0].value.data(), in_, spec_.units);
        Y.rowwise() += CRowVecMap(params_[1].value.data(), static_cast<Index>(spec_.units));
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        const Tensor& x = *inputs[0];
        const std::size_t batch = x.dim(0);
        const auto X = cmat(x.data(), batch, in_);
        const auto dY = cmat(dy.data(), batch, spec_.units);
        mat(params_[0].grad.data(), in_, spec_.units).noalias() += X.transpose() * dY;
        RowVecMap(params_[1].grad.data(), static_cast<Index>(spec_.units)) += dY.colwise().sum();
        Tensor dx(x.shape());
        mat(dx.data(), batch, in_).noalias() = dY * cmat(params_[0].value.data(), in_, spec_.units).transpose();
        return {std::move(dx)};
    }

private:
    std::size_t in_ = 0;
};

// ---------------------------------------------------------------------------

/// Stride-1 "same" convolution over (H, W, C) samples; 1D runs with H = 1.
class ConvLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        const Shape& s = inputs[0];
        const std::size_t k = spec_.kernel;
        if (spec_.kind == LayerKind::Conv1D) {
            expect_rank(spec_, s, 2, "(length, channels)");
            height_ = 1;
            width_ = s[0];
            channels_ = s[1];
            kh_ = 1;
            kw_ = k;
        } else {
            expect_rank(spec_, s, 3, "(height, width, channels)");
            height_ = s[0];
            width_ = s[1];
            channels_ = s[2];
            kh_ = k;
            kw_ = k;
        }
        pad_top_ = (kh_ - 1) / 2;
        pad_left_ = (kw_ - 1) / 2;
        patch_ = kh_ * kw_ * channels_;
        params_.clear();
        if (spec_.kind == LayerKind::Conv1D) {
            add_parameter("kernel", {k, channels_, spec_.units});
            add_parameter("bias", {spec_.units});
            return Shape{width_, spec_.units};
        }
        add_parameter("kernel", {k, k, channels_, spec_.units});
        add_parameter("bias", {spec_.units});
        return Shape{height_, width_, spec_.units};
    }

    void initialize(Rng& rng) override {
        const double limit = init_limit(spec_.init, patch_, kh_ * kw_ * spec_.units);
        uniform_fill(params_[0].value, limit, rng);
        params_[1].value.fill(0.0);
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        const Tensor& x = *inputs[0];
        const std::size_t pixels = height_ * width_;
        expect_sample(spec_, x, pixels * channels_);
        const std::size_t batch = x.dim(0);
        const std::size_t filters = spec_.units;
        Tensor y(with_batch(batch, output_sample_shape()));

        const auto Wm = cmat(params_[0].value.data(), patch_, filters);
        const CRowVecMap bias(params_[1].value.data(), static_cast<Index>(filters));
        const std::size_t chunk = std::min(chunk_size(), batch);
        Storage cols(chunk * pixels * patch_);
        for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
            const std::size_t nb = std::min(chunk, batch - b0);
            for (std::size_t i = 0; i < nb; ++i) {
                im2col(x.data() + (b0 + i) * pixels * channels_, cols.data() + i * pixels * patch_);
            }
            auto Y = mat(y.data() + b0 * pixels * filters, nb * pixels, filters);
            Y.noalias() = cmat(cols.data(), nb * pixels, patch_) * Wm;
            Y.rowwise() += bias;
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        const Tensor& x = *inputs[0];
        const std::size_t pixels = height_ * width_;
        const std::size_t batch = x.dim(0);
        const std::size_t filters = spec_.units;
        Tensor dx(x.shape());

        const auto Wm = cmat(params_[0].value.data(), patch_, filters);
        auto dW = mat(params_[0].grad.data(), patch_, filters);
        RowVecMap db(params_[1].grad.data(), static_cast<Index>(filters));
        const std::size_t chunk = std::min(chunk_size(), batch);
        Storage cols(chunk * pixels * patch_);
        RowMat dcols;
        for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
            const std::size_t nb = std::min(chunk, batch - b0);
            for (std::size_t i = 0; i < nb; ++i) {
                im2col(x.data() + (b0 + i) * pixels * channels_, cols.data() + i * pixels * patch_);
            }
            const auto C = cmat(cols.data(), nb * pixels, patch_);
            const auto dY = cmat(dy.data() + b0 * pixels * filters, nb * pixels, filters);
            dW.noalias() += C.transpose() * dY;
            db += dY.colwise().sum();
            dcols.noalias() = dY * Wm.transpose();
            for (std::size_t i = 0; i < nb; ++i) {
                col2im(dcols.data() + i * pixels * patch_, dx.data() + (b0 + i) * pixels * channels_);
            }
        }
        return {std::move(dx)};
    }

private:
    Shape output_sample_shape() const {
        if (spec_.kind == LayerKind::Conv1D) {
            return {width_, spec_.units};
        }
        return {height_, width_, spec_.units};
    }

    std::size_t chunk_size() const { return std::max<std::size_t>(1, 8192 / (height_ * width_)); }

    void im2col(const double* x, double* cols) const {
        for (std::size_t y = 0; y < height_; ++y) {
            for (std::size_t xx = 0; xx < width_; ++xx) {
                double* row = cols + (y * width_ + xx) * patch_;
                for (std::size_t ky = 0; ky < kh_; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad_top_);
                    for (std::size_t kx = 0; kx < kw_; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(xx + kx) - static_cast<std::ptrdiff_t>(pad_left_);
                        double* dst = row + (ky * kw_ + kx) * channels_;
                        if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(height_) ||
                            ix >= static_cast<std::ptrdiff_t>(width_)) {
                            std::fill_n(dst, channels_, 0.0);
                        } else {
                            std::copy_n(x + (static_cast<std::size_t>(iy) * width_ + static_cast<std::size_t>(ix)) * channels_,
                                        channels_, dst);
                        }
                    }
                }
            }
        }
    }

    void col2im(const double* cols, double* dx) const {
        for (std::size_t y = 0; y < height_; ++y) {
            for (std::size_t xx = 0; xx < width_; ++xx) {
                const double* row = cols + (y * width_ + xx) * patch_;
                for (std::size_t ky = 0; ky < kh_; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad_top_);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height_)) {
                        continue;
                    }
                    for (std::size_t kx = 0; kx < kw_; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(xx + kx) - static_cast<std::ptrdiff_t>(pad_left_);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width_)) {
                            continue;
                        }
                        const double* src = row + (ky * kw_ + kx) * channels_;
                        double* dst = dx + (static_cast<std::size_t>(iy) * width_ + static_cast<std::size_t>(ix)) * channels_;
                        for (std::size_t c = 0; c < channels_; ++c) {
                            dst[c] += src[c];
                        }
                    }
                }
            }
        }
    }

    std::size_t height_ = 0, width_ = 0, channels_ = 0;
    std::size_t kh_ = 0, kw_ = 0, pad_top_ = 0, pad_left_ = 0, patch_ = 0;
};

// ---------------------------------------------------------------------------

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped.
class MaxPoolLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        const Shape& s = inputs[0];
        if (spec_.kind == LayerKind::MaxPool1D) {
            expect_rank(spec_, s, 2, "(length, channels)");
            height_ = 1;
            width_ = s[0];
            channels_ = s[1];
            ph_ = 1;
        } else {
            expect_rank(spec_, s, 3, "(height, width, channels)");
            height_ = s[0];
            width_ = s[1];
            channels_ = s[2];
            ph_ = spec_.pool;
        }
        pw_ = spec_.pool;
        out_h_ = height_ / ph_;
        out_w_ = width_ / pw_;
        if (out_h_ == 0 || out_w_ == 0) {
            fail(ErrorKind::Shape, layer_name(spec_) + " window " + std::to_string(spec_.pool) +
                                       " does not fit input " + shape_string(s));
        }
        if (spec_.kind == LayerKind::MaxPool1D) {
            return {out_w_, channels_};
        }
        return {out_h_, out_w_, channels_};
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache* cache) const override {
        const Tensor& x = *inputs[0];
        expect_sample(spec_, x, height_ * width_ * channels_);
        const std::size_t batch = x.dim(0);
        Shape out_shape = spec_.kind == LayerKind::MaxPool1D ? Shape{batch, out_w_, channels_}
                                                             : Shape{batch, out_h_, out_w_, channels_};
        Tensor y(out_shape);
        std::vector<std::size_t> argmax(y.size());
        std::size_t o = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = b * height_ * width_ * channels_;
            for (std::size_t oy = 0; oy < out_h_; ++oy) {
                for (std::size_t ox = 0; ox < out_w_; ++ox) {
                    for (std::size_t c = 0; c < channels_; ++c, ++o) {
                        std::size_t best = base + ((oy * ph_) * width_ + ox * pw_) * channels_ + c;
                        double best_v = x[best];
                        for (std::size_t dy = 0; dy < ph_; ++dy) {
                            for (std::size_t dx = 0; dx < pw_; ++dx) {
                                const std::size_t idx = base + ((oy * ph_ + dy) * width_ + ox * pw_ + dx) * channels_ + c;
                                if (x[idx] > best_v) {
                                    best_v = x[idx];
                                    best = idx;
                                }
                            }
                        }
                        y[o] = best_v;
                        argmax[o] = best;
                    }
                }
            }
        }
        if (cache) {
            cache->indices = std::move(argmax);
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache& cache) override {
        Tensor dx(inputs[0]->shape());
        for (std::size_t o = 0; o < dy.size(); ++o) {
            dx[cache.indices[o]] += dy[o];
        }
        return {std::move(dx)};
    }

private:
    std::size_t height_ = 0, width_ = 0, channels_ = 0, ph_ = 1, pw_ = 1, out_h_ = 0, out_w_ = 0;
};

// ---------------------------------------------------------------------------

/// Normalizes over every axis but the last (channels).
class BatchNormLayer final : public Layer {
public:
    static constexpr double kMomentum = 0.9;
    static constexpr double kEpsilon = 1e-5;

    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        if (inputs[0].empty()) {
            fail(ErrorKind::Shape, "batchnorm needs at least one feature axis");
        }
        channels_ = inputs[0].back();
        sample_ = shape_size(inputs[0]);
        params_.clear();
        add_parameter("gamma", {channels_});
        add_parameter("beta", {channels_});
        add_parameter("running_mean", {channels_}, true);
        add_parameter("running_var", {channels_}, true);
        reset();
        return inputs[0];
    }

    void initialize(Rng&) override { reset(); }

    Tensor forward(std::span<const Tensor* const> inputs, Mode mode, Rng*, Cache* cache) const override {
        const Tensor& x = *inputs[0];
        expect_sample(spec_, x, sample_);
        const std::size_t rows = x.size() / channels_;
        const auto X = cmat(x.data(), rows, channels_);

        Eigen::RowVectorXd mean;
        Eigen::RowVectorXd var;
        if (mode == Mode::Train) {
            mean = X.colwise().mean();
            var = (X.rowwise() - mean).array().square().colwise().mean().matrix();
        } else {
            mean = CRowVecMap(params_[2].value.data(), static_cast<Index>(channels_));
            var = CRowVecMap(params_[3].value.data(), static_cast<Index>(channels_));
        }
        const Eigen::RowVectorXd inv_std = (var.array() + kEpsilon).rsqrt().matrix();

        Tensor xhat(x.shape());
        auto Xh = mat(xhat.data(), rows, channels_);
        Xh = (X.rowwise() - mean).array().rowwise() * inv_std.array();
        Tensor y(x.shape());
        auto Y = mat(y.data(), rows, channels_);
        const CRowVecMap gamma(params_[0].value.data(), static_cast<Index>(channels_));
        const CRowVecMap beta(params_[1].value.data(), static_cast<Index>(channels_));
        Y = (Xh.array().rowwise() * gamma.array()).rowwise() + beta.array();

        if (cache) {
            cache->tensors.clear();
            cache->tensors.push_back(std::move(xhat));
            cache->tensors.emplace_back(Shape{channels_}, std::vector<double>(inv_std.data(), inv_std.data() + channels_));
            cache->tensors.emplace_back(Shape{channels_}, std::vector<double>(mean.data(), mean.data() + channels_));
            cache->tensors.emplace_back(Shape{channels_}, std::vector<double>(var.data(), var.data() + channels_));
            cache->indices = {mode == Mode::Train ? 1u : 0u};
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache& cache) override {
        const std::size_t rows = dy.size() / channels_;
        const auto dY = cmat(dy.data(), rows, channels_);
        const auto Xh = cmat(cache.tensors[0].data(), rows, channels_);
        const CRowVecMap inv_std(cache.tensors[1].data(), static_cast<Index>(channels_));
        const CRowVecMap gamma(params_[0].value.data(), static_cast<Index>(channels_));

        RowVecMap(params_[0].grad.data(), static_cast<Index>(channels_)) += (dY.array() * Xh.array()).colwise().sum().matrix();
        RowVecMap(params_[1].grad.data(), static_cast<Index>(channels_)) += dY.colwise().sum();

        Tensor dx(inputs[0]->shape());
        auto dX = mat(dx.data(), rows, channels_);
        const RowMat dXh = dY.array().rowwise() * gamma.array();
        if (cache.indices.at(0) == 1u) {
            const double n = static_cast<double>(rows);
            const Eigen::RowVectorXd sum_dxh = dXh.colwise().sum();
            const Eigen::RowVectorXd sum_dxh_xh = (dXh.array() * Xh.array()).colwise().sum().matrix();
            dX = ((dXh * n).rowwise() - sum_dxh - (Xh.array().rowwise() * sum_dxh_xh.array()).matrix());
            dX = dX.array().rowwise() * (inv_std.array() / n);
        } else {
            dX = dXh.array().rowwise() * inv_std.array();
        }
        return {std::move(dx)};
    }

    void commit(const Cache& cache) override {
        if (cache.indices.empty() || cache.indices[0] != 1u) {
            return;
        }
        for (std::size_t c = 0; c < channels_; ++c) {
            params_[2].value[c] = kMomentum * params_[2].value[c] + (1.0 - kMomentum) * cache.tensors[2][c];
            params_[3].value[c] = kMomentum * params_[3].value[c] + (1.0 - kMomentum) * cache.tensors[3][c];
        }
    }

private:
    void reset() {
        params_[0].value.fill(1.0);
        params_[1].value.fill(0.0);
        params_[2].value.fill(0.0);
        params_[3].value.fill(1.0);
    }

    std::size_t channels_ = 0;
    std::size_t sample_ = 0;
};

// ---------------------------------------------------------------------------

/// Inverted dropout: kept units are scaled by 1 / (1 - rate) in training so
/// inference is the identity.
class DropoutLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        return inputs[0];
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode mode, Rng* rng, Cache* cache) const override {
        const Tensor& x = *inputs[0];
        if (mode == Mode::Inference || spec_.rate == 0.0) {
            if (cache) {
                cache->tensors.clear();
            }
            return x;
        }
        if (!rng) {
            fail(ErrorKind::State, "dropout in training mode needs a random generator");
        }
        const double keep_scale = 1.0 / (1.0 - spec_.rate);
        Tensor mask(x.shape());
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask[i] = rng->uniform() >= spec_.rate ? keep_scale : 0.0;
            y[i] = x[i] * mask[i];
        }
        if (cache) {
            cache->tensors = {std::move(mask)};
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const>, const Tensor&,
                                 const Cache& cache) override {
        if (cache.tensors.empty()) {
            return {dy};
        }
        Tensor dx(dy.shape());
        const Tensor& mask = cache.tensors[0];
        for (std::size_t i = 0; i < dy.size(); ++i) {
            dx[i] = dy[i] * mask[i];
        }
        return {std::move(dx)};
    }
};

// ---------------------------------------------------------------------------

class FlattenLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        return {shape_size(inputs[0])};
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        const Tensor& x = *inputs[0];
        return x.reshaped({x.dim(0), x.sample_size()});
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        return {dy.reshaped(inputs[0]->shape())};
    }
};

class ReluLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        return inputs[0];
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        Tensor y = *inputs[0];
        for (double& v : y.values()) {
            v = v > 0.0 ? v : 0.0;
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        const Tensor& x = *inputs[0];
        Tensor dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) {
            dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
        }
        return {std::move(dx)};
    }
};

/// Softmax over the last axis.
class SoftmaxLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        if (inputs[0].empty()) {
            fail(ErrorKind::Shape, "softmax needs at least one feature axis");
        }
        width_ = inputs[0].back();
        return inputs[0];
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        Tensor y = *inputs[0];
        const std::size_t rows = y.size() / width_;
        for (std::size_t r = 0; r < rows; ++r) {
            double* row = y.data() + r * width_;
            const double peak = *std::max_element(row, row + width_);
            double total = 0.0;
            for (std::size_t j = 0; j < width_; ++j) {
                row[j] = std::exp(row[j] - peak);
                total += row[j];
            }
            for (std::size_t j = 0; j < width_; ++j) {
                row[j] /= total;
            }
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const>, const Tensor& y,
                                 const Cache&) override {
        Tensor dx(dy.shape());
        const std::size_t rows = dy.size() / width_;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = dy.data() + r * width_;
            const double* p = y.data() + r * width_;
            double dot = 0.0;
            for (std::size_t j = 0; j < width_; ++j) {
                dot += g[j] * p[j];
            }
            for (std::size_t j = 0; j < width_; ++j) {
                dx[r * width_ + j] = p[j] * (g[j] - dot);
            }
        }
        return {std::move(dx)};
    }

private:
    std::size_t width_ = 0;
};

// ---------------------------------------------------------------------------

struct GateValues {
    RowMat i, f, g, o;
};

/// Computes gates, c' and h' for one step; shared by lstm_step and the layer.
void lstm_cell(const CMatMap& x, const CMatMap& h, const CMatMap& c, const CMatMap& W, const CMatMap& U,
               const CRowVecMap& b, std::size_t hidden, RowMat& gates, RowMat& c_next, RowMat& h_next) {
    const auto H = static_cast<Index>(hidden);
    gates.noalias() = x * W;
    gates.noalias() += h * U;
    gates.rowwise() += b;
    gates.leftCols(2 * H) = gates.leftCols(2 * H).unaryExpr([](double v) { return sigmoid(v); });
    gates.middleCols(2 * H, H) = gates.middleCols(2 * H, H).array().tanh().matrix();
    gates.rightCols(H) = gates.rightCols(H).unaryExpr([](double v) { return sigmoid(v); });
    c_next = gates.middleCols(H, H).cwiseProduct(c) + gates.leftCols(H).cwiseProduct(gates.middleCols(2 * H, H));
    h_next = gates.rightCols(H).cwiseProduct(c_next.array().tanh().matrix());
}

/// Runs a (T, F) sequence and emits the final hidden state.
class LstmLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 1);
        expect_rank(spec_, inputs[0], 2, "(timesteps, features)");
        steps_ = inputs[0][0];
        features_ = inputs[0][1];
        const std::size_t hidden = spec_.units;
        params_.clear();
        add_parameter("kernel", {features_, 4 * hidden});
        add_parameter("recurrent_kernel", {hidden, 4 * hidden});
        add_parameter("bias", {4 * hidden});
        return {hidden};
    }

    void initialize(Rng& rng) override {
        const std::size_t hidden = spec_.units;
        uniform_fill(params_[0].value, init_limit(Init::GlorotUniform, features_, 4 * hidden), rng);
        uniform_fill(params_[1].value, init_limit(Init::GlorotUniform, hidden, 4 * hidden), rng);
        params_[2].value.fill(0.0);
        for (std::size_t j = hidden; j < 2 * hidden; ++j) {
            params_[2].value[j] = 1.0;  // forget-gate bias
        }
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache* cache) const override {
        const Tensor& x = *inputs[0];
        expect_sample(spec_, x, steps_ * features_);
        const std::size_t batch = x.dim(0);
        const std::size_t hidden = spec_.units;
        const auto W = cmat(params_[0].value.data(), features_, 4 * hidden);
        const auto U = cmat(params_[1].value.data(), hidden, 4 * hidden);
        const CRowVecMap bias(params_[2].value.data(), static_cast<Index>(4 * hidden));

        Tensor gates_all({steps_, batch, 4 * hidden});
        Tensor cells({steps_ + 1, batch, hidden});
        Tensor hiddens({steps_ + 1, batch, hidden});
        RowMat xt(static_cast<Index>(batch), static_cast<Index>(features_));
        RowMat gates, c_next, h_next;
        for (std::size_t t = 0; t < steps_; ++t) {
            for (std::size_t b = 0; b < batch; ++b) {
                std::copy_n(x.data() + (b * steps_ + t) * features_, features_, xt.data() + b * features_);
            }
            const CMatMap xm(xt.data(), xt.rows(), xt.cols());
            lstm_cell(xm, cmat(hiddens.data() + t * batch * hidden, batch, hidden),
                      cmat(cells.data() + t * batch * hidden, batch, hidden), W, U, bias, hidden, gates, c_next,
                      h_next);
            mat(gates_all.data() + t * batch * 4 * hidden, batch, 4 * hidden) = gates;
            mat(cells.data() + (t + 1) * batch * hidden, batch, hidden) = c_next;
            mat(hiddens.data() + (t + 1) * batch * hidden, batch, hidden) = h_next;
        }
        Tensor y({batch, hidden});
        std::copy_n(hiddens.data() + steps_ * batch * hidden, batch * hidden, y.data());
        if (cache) {
            cache->tensors = {std::move(gates_all), std::move(cells), std::move(hiddens)};
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache& cache) override {
        const Tensor& x = *inputs[0];
        const std::size_t batch = x.dim(0);
        const std::size_t hidden = spec_.units;
        const auto H = static_cast<Index>(hidden);
        const auto W = cmat(params_[0].value.data(), features_, 4 * hidden);
        const auto U = cmat(params_[1].value.data(), hidden, 4 * hidden);
        auto dW = mat(params_[0].grad.data(), features_, 4 * hidden);
        auto dU = mat(params_[1].grad.data(), hidden, 4 * hidden);
        RowVecMap db(params_[2].grad.data(), static_cast<Index>(4 * hidden));
        const Tensor& gates_all = cache.tensors.at(0);
        const Tensor& cells = cache.tensors.at(1);
        const Tensor& hiddens = cache.tensors.at(2);

        Tensor dx(x.shape());
        RowMat dh = cmat(dy.data(), batch, hidden);
        RowMat dc = RowMat::Zero(static_cast<Index>(batch), H);
        RowMat dz(static_cast<Index>(batch), 4 * H);
        RowMat xt(static_cast<Index>(batch), static_cast<Index>(features_));
        RowMat dxt;
        for (std::size_t tt = steps_; tt-- > 0;) {
            const auto G = cmat(gates_all.data() + tt * batch * 4 * hidden, batch, 4 * hidden);
            const auto c_prev = cmat(cells.data() + tt * batch * hidden, batch, hidden);
            const auto c_cur = cmat(cells.data() + (tt + 1) * batch * hidden, batch, hidden);
            const auto h_prev = cmat(hiddens.data() + tt * batch * hidden, batch, hidden);
            const auto i = G.leftCols(H).array();
            const auto f = G.middleCols(H, H).array();
            const auto g = G.middleCols(2 * H, H).array();
            const auto o = G.rightCols(H).array();
            const RowMat tanh_c = c_cur.array().tanh().matrix();

            dc.array() += dh.array() * o * (1.0 - tanh_c.array().square());
            dz.leftCols(H) = (dc.array() * g * i * (1.0 - i)).matrix();
            dz.middleCols(H, H) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
            dz.middleCols(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
            dz.rightCols(H) = (dh.array() * tanh_c.array() * o * (1.0 - o)).matrix();

            for (std::size_t b = 0; b < batch; ++b) {
                std::copy_n(x.data() + (b * steps_ + tt) * features_, features_, xt.data() + b * features_);
            }
            dW.noalias() += xt.transpose() * dz;
            dU.noalias() += h_prev.transpose() * dz;
            db += dz.colwise().sum();
            dxt.noalias() = dz * W.transpose();
            for (std::size_t b = 0; b < batch; ++b) {
                std::copy_n(dxt.data() + b * features_, features_, dx.data() + (b * steps_ + tt) * features_);
            }
            dh.noalias() = dz * U.transpose();
            dc = (dc.array() * f).matrix();
        }
        return {std::move(dx)};
    }

private:
    std::size_t steps_ = 0;
    std::size_t features_ = 0;
};

// ---------------------------------------------------------------------------

/// Joins inputs along the last axis.
class ConcatLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        if (inputs.size() < 2) {
            fail(ErrorKind::Shape, "concat needs at least two inputs");
        }
        widths_.clear();
        Shape out = inputs[0];
        if (out.empty()) {
            fail(ErrorKind::Shape, "concat inputs need a feature axis");
        }
        out.back() = 0;
        for (const auto& s : inputs) {
            if (s.size() != out.size() || !std::equal(s.begin(), s.end() - 1, out.begin())) {
                fail(ErrorKind::Shape, "concat inputs disagree on leading axes: " + shape_string(inputs[0]) +
                                           " vs " + shape_string(s));
            }
            widths_.push_back(s.back());
            out.back() += s.back();
        }
        total_ = out.back();
        outer_ = shape_size(out) / total_;
        return out;
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        const std::size_t batch = inputs[0]->dim(0);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            expect_sample(spec_, *inputs[k], outer_ * widths_[k]);
            if (inputs[k]->dim(0) != batch) {
                fail(ErrorKind::Shape, "concat inputs disagree on batch size");
            }
        }
        Shape out_shape = inputs[0]->shape();
        out_shape.back() = total_;
        Tensor y(out_shape);
        const std::size_t rows = batch * outer_;
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                std::copy_n(inputs[k]->data() + r * widths_[k], widths_[k], y.data() + r * total_ + offset);
                offset += widths_[k];
            }
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        std::vector<Tensor> grads;
        for (const Tensor* in : inputs) {
            grads.emplace_back(in->shape());
        }
        const std::size_t rows = dy.size() / total_;
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < grads.size(); ++k) {
                std::copy_n(dy.data() + r * total_ + offset, widths_[k], grads[k].data() + r * widths_[k]);
                offset += widths_[k];
            }
        }
        return grads;
    }

private:
    std::vector<std::size_t> widths_;
    std::size_t total_ = 0;
    std::size_t outer_ = 0;
};

/// out[j] = features[j] * weights[j / (n / k)]: each of k equal segments of
/// the feature vector is scaled by one weight. k == n is plain gating.
class AttentionMultiplyLayer final : public Layer {
public:
    using Layer::Layer;

    Shape build(const std::vector<Shape>& inputs) override {
        expect_inputs(spec_, inputs, 2);
        expect_rank(spec_, inputs[0], 1, "(features)");
        expect_rank(spec_, inputs[1], 1, "(weights)");
        features_ = inputs[0][0];
        weights_ = inputs[1][0];
        const std::size_t expected = spec_.segments == 0 ? features_ : spec_.segments;
        if (weights_ != expected) {
            fail(ErrorKind::Shape, "attention weights have width " + std::to_string(weights_) + ", expected " +
                                       std::to_string(expected));
        }
        if (features_ % weights_ != 0) {
            fail(ErrorKind::Parameter, std::to_string(weights_) + " attention segments do not divide " +
                                           std::to_string(features_) + " features");
        }
        segment_ = features_ / weights_;
        return {features_};
    }

    Tensor forward(std::span<const Tensor* const> inputs, Mode, Rng*, Cache*) const override {
        const Tensor& f = *inputs[0];
        const Tensor& w = *inputs[1];
        expect_sample(spec_, f, features_);
        expect_sample(spec_, w, weights_);
        const std::size_t batch = f.dim(0);
        Tensor y(f.shape());
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < features_; ++j) {
                y[b * features_ + j] = f[b * features_ + j] * w[b * weights_ + j / segment_];
            }
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& dy, std::span<const Tensor* const> inputs, const Tensor&,
                                 const Cache&) override {
        const Tensor& f = *inputs[0];
        const Tensor& w = *inputs[1];
        const std::size_t batch = f.dim(0);
        Tensor df(f.shape());
        Tensor dw(w.shape());
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < features_; ++j) {
                const std::size_t s = b * weights_ + j / segment_;
                df[b * features_ + j] = dy[b * features_ + j] * w[s];
                dw[s] += dy[b * features_ + j] * f[b * features_ + j];
            }
        }
        return {std::move(df), std::move(dw)};
    }

private:
    std::size_t features_ = 0;
    std::size_t weights_ = 0;
    std::size_t segment_ = 1;
};

}  // namespace

Parameter& Layer::add_parameter(std::string name, Shape shape, bool is_state) {
    Parameter p;
    p.name = std::move(name);
    p.value = Tensor(shape);
    p.grad = Tensor(shape);
    p.is_state = is_state;
    p.trainable = !is_state;
    params_.push_back(std::move(p));
    return params_.back();
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case LayerKind::Conv1D:
    case LayerKind::Conv2D: return std::make_unique<ConvLayer>(spec);
    case LayerKind::Dense: return std::make_unique<DenseLayer>(spec);
    case LayerKind::BatchNorm: return std::make_unique<BatchNormLayer>(spec);
    case LayerKind::MaxPool1D:
    case LayerKind::MaxPool2D: return std::make_unique<MaxPoolLayer>(spec);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer>(spec);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>(spec);
    case LayerKind::Relu: return std::make_unique<ReluLayer>(spec);
    case LayerKind::Softmax: return std::make_unique<SoftmaxLayer>(spec);
    case LayerKind::Lstm: return std::make_unique<LstmLayer>(spec);
    case LayerKind::Concat: return std::make_unique<ConcatLayer>(spec);
    case LayerKind::AttentionMultiply: return std::make_unique<AttentionMultiplyLayer>(spec);
    case LayerKind::Input: break;
    }
    fail(ErrorKind::Parameter, "input nodes have no layer");
}

LstmState lstm_step(const Tensor& x_t, const LstmState& state, const LstmWeights& weights) {
    require(x_t.rank() == 2, ErrorKind::Shape, "lstm_step expects x_t of shape (batch, features)");
    const std::size_t batch = x_t.dim(0);
    const std::size_t features = x_t.dim(1);
    require(weights.recurrent_kernel.rank() == 2, ErrorKind::Shape, "recurrent kernel must be (hidden, 4*hidden)");
    const std::size_t hidden = weights.recurrent_kernel.dim(0);
    const Shape gate_shape{4 * hidden};
    if (weights.input_kernel.shape() != Shape{features, 4 * hidden} ||
        weights.recurrent_kernel.shape() != Shape{hidden, 4 * hidden} || weights.bias.shape() != gate_shape) {
        fail(ErrorKind::Shape, "lstm weights do not match features " + std::to_string(features) + " and hidden " +
                                   std::to_string(hidden));
    }
    if (state.h.shape() != Shape{batch, hidden} || state.c.shape() != Shape{batch, hidden}) {
        fail(ErrorKind::Shape, "lstm state must be (batch, hidden)");
    }
    RowMat gates, c_next, h_next;
    lstm_cell(cmat(x_t.data(), batch, features), cmat(state.h.data(), batch, hidden),
              cmat(state.c.data(), batch, hidden), cmat(weights.input_kernel.data(), features, 4 * hidden),
              cmat(weights.recurrent_kernel.data(), hidden, 4 * hidden),
              CRowVecMap(weights.bias.data(), static_cast<Index>(4 * hidden)), hidden, gates, c_next, h_next);
    LstmState out{Tensor({batch, hidden}), Tensor({batch, hidden})};
    mat(out.h.data(), batch, hidden) = h_next;
    mat(out.c.data(), batch, hidden) = c_next;
    return out;
}

}  // namespace beesense::nn
