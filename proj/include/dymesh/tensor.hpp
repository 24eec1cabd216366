#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dymesh {

/// Dense row-major tensor. The scalar type is a template parameter so the
/// gradient-check tooling can instantiate the whole stack in double precision;
/// production code uses Tensor (= TensorT<float>).
template <class T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }
    TensorT(std::vector<std::size_t> s, std::vector<T> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }
    static TensorT zeros(std::vector<std::size_t> s) { return TensorT(std::move(s)); }
    static TensorT full(std::vector<std::size_t> s, T v) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    // 2-d accessors; most of the model runs on matrices.
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const {
        if (shape.size() < 2) return shape.size() == 1 ? shape[0] : 0;
        std::size_t c = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return c;
    }
    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    T at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    T max_abs() const {
        T m = 0;
        for (T v : data) m = std::max(m, std::abs(v));
        return m;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (T v : data) out.data.push_back(static_cast<U>(v));
        return out;
    }
};

using Tensor = TensorT<float>;

/// C = A * B, with A: [r,k], B: [k,c]. Accumulation happens in the scalar
/// type; the ikj loop order keeps the inner loop contiguous.
template <class T>
void matmul_into(const T* a, const T* b, T* c, std::size_t r, std::size_t k, std::size_t n,
                 bool accumulate = false) {
    if (!accumulate) std::fill(c, c + r * n, T(0));
    for (std::size_t i = 0; i < r; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C = A * B^T, with A: [r,k], B: [n,k].
template <class T>
void matmul_nt_into(const T* a, const T* b, T* c, std::size_t r, std::size_t k, std::size_t n,
                    bool accumulate = false) {
    for (std::size_t i = 0; i < r; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            if (accumulate)
                c[i * n + j] += acc;
            else
                c[i * n + j] = acc;
        }
    }
}

/// C = A^T * B, with A: [k,r], B: [k,n].
template <class T>
void matmul_tn_into(const T* a, const T* b, T* c, std::size_t k, std::size_t r, std::size_t n,
                    bool accumulate = false) {
    if (!accumulate) std::fill(c, c + r * n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * r;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < r; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace dymesh
