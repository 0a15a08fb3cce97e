#pragma once

#include <cstdint>

#include "lsda/core/parallel.hpp"

namespace lsda::kernels {

// Fully connected layer kernels. x is (B, In) row-major, w is (Out, In),
// bias (Out), y (B, Out). Same serial/omp split as the conv kernels: every
// output element is produced by exactly one fixed-order reduction.

namespace detail {

template <class T>
inline T dot_n(const T* a, const T* b, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace detail

namespace serial {

template <class T>
void dense_forward(const T* x, const T* w, const T* bias, T* y, int batch, int in_n, int out_n) {
    const int64_t n = static_cast<int64_t>(batch) * out_n;
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / out_n);
        const int o = static_cast<int>(p % out_n);
        y[p] = (bias ? bias[o] : T(0)) +
               detail::dot_n(x + static_cast<size_t>(b) * in_n, w + static_cast<size_t>(o) * in_n, in_n);
    }
}

template <class T>
void dense_backward_input(const T* dy, const T* w, T* dx, int batch, int in_n, int out_n) {
    const int64_t n = static_cast<int64_t>(batch) * in_n;
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / in_n);
        const int i = static_cast<int>(p % in_n);
        const T* dyp = dy + static_cast<size_t>(b) * out_n;
        T acc = T(0);
        for (int o = 0; o < out_n; ++o) acc += dyp[o] * w[static_cast<size_t>(o) * in_n + i];
        dx[p] = acc;
    }
}

template <class T>
void dense_backward_params(const T* x, const T* dy, T* dw, T* db, int batch, int in_n, int out_n) {
    for (int o = 0; o < out_n; ++o) {
        T* drow = dw + static_cast<size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) drow[i] = T(0);
        T bacc = T(0);
        for (int b = 0; b < batch; ++b) {
            const T gv = dy[static_cast<size_t>(b) * out_n + o];
            bacc += gv;
            const T* xp = x + static_cast<size_t>(b) * in_n;
            for (int i = 0; i < in_n; ++i) drow[i] += xp[i] * gv;
        }
        if (db) db[o] = bacc;
    }
}

}  // namespace serial

namespace omp {

template <class T>
void dense_forward(const T* x, const T* w, const T* bias, T* y, int batch, int in_n, int out_n) {
    const int64_t n = static_cast<int64_t>(batch) * out_n;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / out_n);
        const int o = static_cast<int>(p % out_n);
        y[p] = (bias ? bias[o] : T(0)) +
               detail::dot_n(x + static_cast<size_t>(b) * in_n, w + static_cast<size_t>(o) * in_n, in_n);
    }
}

template <class T>
void dense_backward_input(const T* dy, const T* w, T* dx, int batch, int in_n, int out_n) {
    const int64_t n = static_cast<int64_t>(batch) * in_n;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / in_n);
        const int i = static_cast<int>(p % in_n);
        const T* dyp = dy + static_cast<size_t>(b) * out_n;
        T acc = T(0);
        for (int o = 0; o < out_n; ++o) acc += dyp[o] * w[static_cast<size_t>(o) * in_n + i];
        dx[p] = acc;
    }
}

template <class T>
void dense_backward_params(const T* x, const T* dy, T* dw, T* db, int batch, int in_n, int out_n) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_n; ++o) {
        T* drow = dw + static_cast<size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) drow[i] = T(0);
        T bacc = T(0);
        for (int b = 0; b < batch; ++b) {
            const T gv = dy[static_cast<size_t>(b) * out_n + o];
            bacc += gv;
            const T* xp = x + static_cast<size_t>(b) * in_n;
            for (int i = 0; i < in_n; ++i) drow[i] += xp[i] * gv;
        }
        if (db) db[o] = bacc;
    }
}

}  // namespace omp

template <class T>
void dense_forward(const T* x, const T* w, const T* bias, T* y, int batch, int in_n, int out_n) {
    if (parallel::enabled())
        omp::dense_forward(x, w, bias, y, batch, in_n, out_n);
    else
        serial::dense_forward(x, w, bias, y, batch, in_n, out_n);
}

template <class T>
void dense_backward_input(const T* dy, const T* w, T* dx, int batch, int in_n, int out_n) {
    if (parallel::enabled())
        omp::dense_backward_input(dy, w, dx, batch, in_n, out_n);
    else
        serial::dense_backward_input(dy, w, dx, batch, in_n, out_n);
}

template <class T>
void dense_backward_params(const T* x, const T* dy, T* dw, T* db, int batch, int in_n, int out_n) {
    if (parallel::enabled())
        omp::dense_backward_params(x, dy, dw, db, batch, in_n, out_n);
    else
        serial::dense_backward_params(x, dy, dw, db, batch, in_n, out_n);
}

}  // namespace lsda::kernels
