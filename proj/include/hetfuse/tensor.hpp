#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "hetfuse/common.hpp"

namespace hetfuse {

// Dense row-major n-d array with value semantics. The last axis is the
// fastest-varying one; network tensors use (B, C, H, W[, D]) and data
// tensors use (H, W[, D]).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape, T fill = T{})
        : shape_(std::move(shape)) {
        for (int64_t s : shape_) check(s >= 0, ErrorKind::Shape, "negative tensor extent");
        data_.assign(static_cast<size_t>(numel_of(shape_)), fill);
    }

    Tensor(std::initializer_list<int64_t> shape, T fill = T{})
        : Tensor(std::vector<int64_t>(shape), fill) {}

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, T v) { return Tensor(std::move(shape), v); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim() const { return static_cast<int64_t>(shape_.size()); }
    int64_t size(int64_t axis) const { return shape_.at(static_cast<size_t>(axis)); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    template <typename... Idx>
    T& operator()(Idx... idx) {
        return data_[flat_index(idx...)];
    }
    template <typename... Idx>
    const T& operator()(Idx... idx) const {
        return data_[flat_index(idx...)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(std::vector<int64_t> shape) const {
        check(numel_of(shape) == numel(), ErrorKind::Shape, "reshape changes element count");
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    static int64_t numel_of(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t s : shape) n *= s;
        return shape.empty() ? 0 : n;
    }

private:
    template <typename... Idx>
    size_t flat_index(Idx... idx) const {
        const int64_t ids[] = {static_cast<int64_t>(idx)...};
        constexpr size_t n = sizeof...(Idx);
        int64_t flat = 0;
        for (size_t a = 0; a < n; ++a) flat = flat * shape_[a] + ids[a];
        return static_cast<size_t>(flat);
    }

    std::vector<int64_t> shape_;
    std::vector<T> data_;
};

template <typename T>
double mean_of(const Tensor<T>& t) {
    double acc = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) acc += static_cast<double>(t[i]);
    return t.numel() > 0 ? acc / static_cast<double>(t.numel()) : 0.0;
}

template <typename T>
double stddev_of(const Tensor<T>& t) {
    // Population standard deviation.
    const double mu = mean_of(t);
    double acc = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double d = static_cast<double>(t[i]) - mu;
        acc += d * d;
    }
    return t.numel() > 0 ? std::sqrt(acc / static_cast<double>(t.numel())) : 0.0;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(static_cast<double>(t[i]))) return false;
    return true;
}

}  // namespace hetfuse
