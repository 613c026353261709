#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "quanvseg/errors.hpp"

namespace quanvseg::nn {

using Dims = std::vector<std::size_t>;

inline std::size_t element_count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_to_string(const Dims& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

// Dense row-major array. Activations use NCHW layout throughout.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Dims dims, T fill = T{0}) : dims_(std::move(dims)), data_(element_count(dims_), fill) {}
    Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        if (data_.size() != element_count(dims_)) {
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                             dims_to_string(dims_));
        }
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* ptr() noexcept { return data_.data(); }
    const T* ptr() const noexcept { return data_.data(); }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // NCHW element access
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }

    bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Dims dims) const {
        if (element_count(dims) != data_.size()) throw ShapeError("reshape changes element count");
        return Tensor(std::move(dims), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Dims dims_;
    std::vector<T> data_;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* name) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                         dims_to_string(t.dims()));
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));
    }
}

}  // namespace quanvseg::nn
