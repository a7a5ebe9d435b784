#include "beesense/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <new>
#include <numeric>
#include <unordered_map>

#include "beesense/error.hpp"

namespace beesense::nn {

namespace detail {
namespace {

constexpr std::align_val_t kAlignment{64};
constexpr std::size_t kPooledMin = std::size_t{1} << 16;
constexpr std::size_t kPageBytes = 4096;
constexpr std::size_t kPoolCap = std::size_t{256} << 20;

struct BufferPool {
    std::mutex mutex;
    std::unordered_map<std::size_t, std::vector<void*>> free_blocks;
    std::size_t cached_bytes = 0;
};

// Never destroyed: tensors with static storage may be released after
// ordinary statics have gone.
BufferPool& pool() {
    static auto* instance = new BufferPool;
    return *instance;
}

std::size_t pooled_size(std::size_t bytes) { return (bytes + kPageBytes - 1) / kPageBytes * kPageBytes; }

}  // namespace

void* acquire_buffer(std::size_t bytes) {
    if (bytes < kPooledMin) {
        return ::operator new(bytes, kAlignment);
    }
    const std::size_t size = pooled_size(bytes);
    auto& p = pool();
    {
        std::lock_guard lock(p.mutex);
        auto it = p.free_blocks.find(size);
        if (it != p.free_blocks.end() && !it->second.empty()) {
            void* block = it->second.back();
            it->second.pop_back();
            p.cached_bytes -= size;
            return block;
        }
    }
    return ::operator new(size, kAlignment);
}

void release_buffer(void* ptr, std::size_t bytes) noexcept {
    if (ptr == nullptr) {
        return;
    }
    if (bytes < kPooledMin) {
        ::operator delete(ptr, kAlignment);
        return;
    }
    const std::size_t size = pooled_size(bytes);
    auto& p = pool();
    {
        std::lock_guard lock(p.mutex);
        if (p.cached_bytes + size <= kPoolCap) {
            try {
                p.free_blocks[size].push_back(ptr);
                p.cached_bytes += size;
                return;
            } catch (...) {
            }
        }
    }
    ::operator delete(ptr, kAlignment);
}

}  // namespace detail

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            out += ", ";
        }
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<double>& values)
    : Tensor(std::move(shape), Storage(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, Storage values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
        fail(ErrorKind::Shape, "tensor of shape " + shape_string(shape_) + " given " +
                                   std::to_string(values_.size()) + " values");
    }
}

Tensor::Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<double> values)
    : Tensor(Shape(shape), Storage(values)) {}

std::size_t Tensor::sample_size() const {
    require(!shape_.empty() && shape_[0] > 0, ErrorKind::Shape, "tensor has no batch axis");
    return values_.size() / shape_[0];
}

Shape Tensor::sample_shape() const {
    require(!shape_.empty(), ErrorKind::Shape, "tensor has no batch axis");
    return Shape(shape_.begin() + 1, shape_.end());
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != values_.size()) {
        fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), values_);
}

Tensor Tensor::gather(std::span<const std::size_t> rows) const {
    require(!shape_.empty(), ErrorKind::Shape, "gather on a scalar tensor");
    const std::size_t stride = shape_[0] ? values_.size() / shape_[0] : 0;
    Shape out_shape = shape_;
    out_shape[0] = rows.size();
    Tensor out(out_shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < shape_[0], ErrorKind::Shape, "gather row out of range");
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(rows[i] * stride), stride,
                    out.values_.begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return out;
}

void check_finite(const Tensor& tensor, std::string_view where) {
    const auto values = tensor.values();
    const auto it = std::find_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); });
    if (it != values.end()) {
        fail(ErrorKind::NonFinite, std::string(where) + " produced a non-finite value at index " +
                                       std::to_string(it - values.begin()));
    }
}

}  // namespace beesense::nn
