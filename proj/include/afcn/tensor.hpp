#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "afcn/error.hpp"

namespace afcn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense N-dimensional array, row-major. Value semantics; treated as
// immutable once built except by its single writer (parameter updates).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(shape_size(shape_), T(0)) {}

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_size(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    std::size_t extent(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(shape_.size()));
        }
        return shape_[axis];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Row-major offset of a multi-index; bijective on the index box.
    template <typename... Ix>
    std::size_t offset(Ix... ix) const {
        static_assert(sizeof...(Ix) > 0);
        if (sizeof...(Ix) != shape_.size()) {
            throw ShapeError("index rank " + std::to_string(sizeof...(Ix)) +
                             " does not match tensor rank " + std::to_string(shape_.size()));
        }
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        std::size_t off = 0;
        for (std::size_t a = 0; a < shape_.size(); ++a) {
            if (idx[a] >= shape_[a]) {
                throw ShapeError("index " + std::to_string(idx[a]) + " out of range for axis " +
                                 std::to_string(a) + " extent " + std::to_string(shape_[a]));
            }
            off = off * shape_[a] + idx[a];
        }
        return off;
    }

    template <typename... Ix>
    T& at(Ix... ix) {
        return data_[offset(ix...)];
    }

    template <typename... Ix>
    const T& at(Ix... ix) const {
        return data_[offset(ix...)];
    }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

private:
    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape new_shape) {
    if (shape_size(new_shape) != t.size()) {
        throw ShapeError("reshape from " + shape_str(t.shape()) + " to " + shape_str(new_shape) +
                         ": element count mismatch");
    }
    return Tensor<T>(std::move(new_shape), std::vector<T>(t.data(), t.data() + t.size()));
}

template <typename T, typename F>
Tensor<T> elementwise(const Tensor<T>& t, F f) {
    Tensor<T> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t[i]);
    return out;
}

// Pairwise (cascade) summation; deterministic and order-stable.
template <typename T>
T pairwise_sum(const T* x, std::size_t n) {
    if (n <= 16) {
        T s = T(0);
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

template <typename T>
T sum_all(const Tensor<T>& t) {
    return pairwise_sum(t.data(), t.size());
}

namespace detail {

struct AxisSplit {
    std::size_t outer, n, inner;
};

template <typename T>
AxisSplit split_axis(const Tensor<T>& t, std::size_t axis) {
    if (axis >= t.rank()) {
        throw ShapeError("reduce axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(t.rank()));
    }
    AxisSplit s{1, t.shape()[axis], 1};
    for (std::size_t a = 0; a < axis; ++a) s.outer *= t.shape()[a];
    for (std::size_t a = axis + 1; a < t.rank(); ++a) s.inner *= t.shape()[a];
    return s;
}

inline Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t a = 0; a < shape.size(); ++a) {
        if (a != axis) out.push_back(shape[a]);
    }
    return out;
}

template <typename T>
T strided_pairwise_sum(const T* x, std::size_t n, std::size_t stride) {
    if (n <= 16) {
        T s = T(0);
        for (std::size_t i = 0; i < n; ++i) s += x[i * stride];
        return s;
    }
    std::size_t half = n / 2;
    return strided_pairwise_sum(x, half, stride) +
           strided_pairwise_sum(x + half * stride, n - half, stride);
}

} // namespace detail

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& t, std::size_t axis) {
    auto s = detail::split_axis(t, axis);
    Tensor<T> out(detail::drop_axis(t.shape(), axis));
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const T* base = t.data() + o * s.n * s.inner + i;
            out[o * s.inner + i] = detail::strided_pairwise_sum(base, s.n, s.inner);
        }
    }
    return out;
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& t, std::size_t axis) {
    auto s = detail::split_axis(t, axis);
    Tensor<T> out(detail::drop_axis(t.shape(), axis));
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const T* base = t.data() + o * s.n * s.inner + i;
            T best = base[0];
            for (std::size_t j = 1; j < s.n; ++j) best = std::max(best, base[j * s.inner]);
            out[o * s.inner + i] = best;
        }
    }
    return out;
}

// Ties break to the lowest index.
template <typename T>
Tensor<std::size_t> reduce_argmax(const Tensor<T>& t, std::size_t axis) {
    auto s = detail::split_axis(t, axis);
    Tensor<std::size_t> out(detail::drop_axis(t.shape(), axis));
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const T* base = t.data() + o * s.n * s.inner + i;
            std::size_t best = 0;
            for (std::size_t j = 1; j < s.n; ++j) {
                if (base[j * s.inner] > base[best * s.inner]) best = j;
            }
            out[o * s.inner + i] = best;
        }
    }
    return out;
}

template <typename U, typename T>
Tensor<U> cast_tensor(const Tensor<T>& t) {
    Tensor<U> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<U>(t[i]);
    return out;
}

} // namespace afcn
