#pragma once

#include <cmath>
#include <cstdint>

#include "lsda/core/parallel.hpp"

namespace lsda::kernels {

// Elementwise activations and the softmax head. Elementwise ops are trivially
// order-independent; softmax reduces within a row, one row per thread.

namespace serial {

template <class T>
void leaky_relu_forward(const T* x, T* y, int64_t n, T alpha) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : alpha * x[i];
}

template <class T>
void leaky_relu_backward(const T* x, const T* dy, T* dx, int64_t n, T alpha) {
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (x[i] > T(0) ? T(1) : alpha);
}

template <class T>
void tanh_forward(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

// Needs the forward output, not the input: d tanh = 1 - y^2.
template <class T>
void tanh_backward(const T* y, const T* dy, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
}

template <class T>
void softmax_rows(const T* x, T* y, int batch, int n) {
    for (int b = 0; b < batch; ++b) {
        const T* xp = x + static_cast<size_t>(b) * n;
        T* yp = y + static_cast<size_t>(b) * n;
        T mx = xp[0];
        for (int i = 1; i < n; ++i) mx = xp[i] > mx ? xp[i] : mx;
        T sum = T(0);
        for (int i = 0; i < n; ++i) {
            yp[i] = std::exp(xp[i] - mx);
            sum += yp[i];
        }
        const T inv = T(1) / sum;
        for (int i = 0; i < n; ++i) yp[i] *= inv;
    }
}

}  // namespace serial

namespace omp {

template <class T>
void leaky_relu_forward(const T* x, T* y, int64_t n, T alpha) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : alpha * x[i];
}

template <class T>
void leaky_relu_backward(const T* x, const T* dy, T* dx, int64_t n, T alpha) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (x[i] > T(0) ? T(1) : alpha);
}

template <class T>
void tanh_forward(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <class T>
void tanh_backward(const T* y, const T* dy, T* dx, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
}

template <class T>
void softmax_rows(const T* x, T* y, int batch, int n) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) {
        const T* xp = x + static_cast<size_t>(b) * n;
        T* yp = y + static_cast<size_t>(b) * n;
        T mx = xp[0];
        for (int i = 1; i < n; ++i) mx = xp[i] > mx ? xp[i] : mx;
        T sum = T(0);
        for (int i = 0; i < n; ++i) {
            yp[i] = std::exp(xp[i] - mx);
            sum += yp[i];
        }
        const T inv = T(1) / sum;
        for (int i = 0; i < n; ++i) yp[i] *= inv;
    }
}

}  // namespace omp

template <class T>
void leaky_relu_forward(const T* x, T* y, int64_t n, T alpha) {
    if (parallel::enabled())
        omp::leaky_relu_forward(x, y, n, alpha);
    else
        serial::leaky_relu_forward(x, y, n, alpha);
}

template <class T>
void leaky_relu_backward(const T* x, const T* dy, T* dx, int64_t n, T alpha) {
    if (parallel::enabled())
        omp::leaky_relu_backward(x, dy, dx, n, alpha);
    else
        serial::leaky_relu_backward(x, dy, dx, n, alpha);
}

template <class T>
void tanh_forward(const T* x, T* y, int64_t n) {
    if (parallel::enabled())
        omp::tanh_forward(x, y, n);
    else
        serial::tanh_forward(x, y, n);
}

template <class T>
void tanh_backward(const T* y, const T* dy, T* dx, int64_t n) {
    if (parallel::enabled())
        omp::tanh_backward(y, dy, dx, n);
    else
        serial::tanh_backward(y, dy, dx, n);
}

template <class T>
void softmax_rows(const T* x, T* y, int batch, int n) {
    if (parallel::enabled())
        omp::softmax_rows(x, y, batch, n);
    else
        serial::softmax_rows(x, y, batch, n);
}

}  // namespace lsda::kernels
