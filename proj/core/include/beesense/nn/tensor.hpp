#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace beesense::nn {

using Shape = std::vector<std::size_t>;

namespace detail {
/// 64-byte aligned storage. Large blocks are kept in a bounded process-wide
/// pool on release and handed out again for the next request of the same
/// size, so repeated forward passes do not page memory in from the OS.
void* acquire_buffer(std::size_t bytes);
void release_buffer(void* ptr, std::size_t bytes) noexcept;
}  // namespace detail

/// Every buffer starts on a 64-byte boundary. Vectorized reductions split
/// off an unaligned head whose length depends on the start address, so
/// without a fixed alignment identical runs could round differently.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(detail::acquire_buffer(n * sizeof(T))); }
    void deallocate(T* p, std::size_t n) noexcept { detail::release_buffer(p, n * sizeof(T)); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Axis 0 is the batch axis wherever a
/// tensor flows through a graph.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, const std::vector<double>& values);
    Tensor(Shape shape, Storage values);
    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    /// Elements per batch entry.
    std::size_t sample_size() const;
    /// Shape without the batch axis.
    Shape sample_shape() const;

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    Storage& storage() noexcept { return values_; }
    const Storage& storage() const noexcept { return values_; }
    std::vector<double> to_vector() const { return {values_.begin(), values_.end()}; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }

    void fill(double value);
    Tensor reshaped(Shape shape) const;

    /// Rows of axis 0 in the given order.
    Tensor gather(std::span<const std::size_t> rows) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Storage values_;
};

/// Throws ErrorKind::NonFinite naming `where` if any element is NaN or Inf.
void check_finite(const Tensor& tensor, std::string_view where);

}  // namespace beesense::nn
