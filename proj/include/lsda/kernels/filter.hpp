#pragma once

#include <cstdint>

#include "lsda/core/parallel.hpp"

namespace lsda::kernels {

// Separable 1-D filter passes over (B, H, W, C) tensors, plus the fixed 3x3
// Sobel pair. "valid" shrinks by klen-1, "full" grows by klen-1 and is the
// exact adjoint of "valid" (written as a convolution, so it is the adjoint
// for asymmetric kernels too). "reflect" keeps the size, mirroring indices
// with edge repeat: -1 -> 0, -2 -> 1, n -> n-1.

namespace detail {

inline int reflect_index(int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
}

template <class T>
inline void corr_row_valid(const T* xrow, T* yrow, int w, int c, const T* k, int klen) {
    const int ow = w - klen + 1;
    for (int x = 0; x < ow; ++x) {
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (int i = 0; i < klen; ++i) acc += k[i] * xrow[(static_cast<size_t>(x) + i) * c + ch];
            yrow[static_cast<size_t>(x) * c + ch] = acc;
        }
    }
}

template <class T>
inline void conv_row_full(const T* xrow, T* yrow, int w, int c, const T* k, int klen) {
    const int ow = w + klen - 1;
    for (int x = 0; x < ow; ++x) {
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (int i = 0; i < klen; ++i) {
                const int src = x - i;
                if (src < 0 || src >= w) continue;
                acc += k[i] * xrow[static_cast<size_t>(src) * c + ch];
            }
            yrow[static_cast<size_t>(x) * c + ch] = acc;
        }
    }
}

template <class T>
inline void corr_row_reflect(const T* xrow, T* yrow, int w, int c, const T* k, int klen) {
    const int r = klen / 2;
    for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (int i = 0; i < klen; ++i) {
                const int src = reflect_index(x - r + i, w);
                acc += k[i] * xrow[static_cast<size_t>(src) * c + ch];
            }
            yrow[static_cast<size_t>(x) * c + ch] = acc;
        }
    }
}

// Column pass expressed per output row: out[b, y, x, ch] reduces over the
// kernel along y. mode: 0 = valid, 1 = full (adjoint), 2 = reflect.
template <class T>
inline void col_pass_row(const T* x, T* yrow, int h, int w, int c, const T* k, int klen,
                         int mode, int b, int y) {
    const size_t plane = static_cast<size_t>(h) * w * c;
    const T* base = x + static_cast<size_t>(b) * plane;
    const int64_t rowlen = static_cast<int64_t>(w) * c;
    for (int64_t j = 0; j < rowlen; ++j) yrow[j] = T(0);
    for (int i = 0; i < klen; ++i) {
        int src;
        if (mode == 0) src = y + i;
        else if (mode == 1) src = y - i;
        else src = reflect_index(y - klen / 2 + i, h);
        if (src < 0 || src >= h) continue;
        const T kv = k[i];
        const T* srow = base + static_cast<size_t>(src) * w * c;
        for (int64_t j = 0; j < rowlen; ++j) yrow[j] += kv * srow[j];
    }
}

// Both Sobel responses for one output row; out is (B, H, W, 2C) interleaved
// (h0, v0, h1, v1, ...). Correlation with [[-1,0,1],[-2,0,2],[-1,0,1]]: the
// horizontal response is positive where values increase with x. Scaled by
// 1/4 and clipped so a [-1,1] input yields a [-1,1] edge map.
template <class T>
inline void sobel_row(const T* x, T* out, int h, int w, int c, int b, int y) {
    const T* base = x + static_cast<size_t>(b) * h * w * c;
    const int ym = reflect_index(y - 1, h), yp = reflect_index(y + 1, h);
    const T* r0 = base + static_cast<size_t>(ym) * w * c;
    const T* r1 = base + static_cast<size_t>(y) * w * c;
    const T* r2 = base + static_cast<size_t>(yp) * w * c;
    T* orow = out + (static_cast<size_t>(b) * h + y) * w * (2 * c);
    for (int px = 0; px < w; ++px) {
        const int xm = reflect_index(px - 1, w), xp = reflect_index(px + 1, w);
        for (int ch = 0; ch < c; ++ch) {
            const T a = r0[static_cast<size_t>(xm) * c + ch], bb = r0[static_cast<size_t>(px) * c + ch], cc = r0[static_cast<size_t>(xp) * c + ch];
            const T d = r1[static_cast<size_t>(xm) * c + ch], f = r1[static_cast<size_t>(xp) * c + ch];
            const T g = r2[static_cast<size_t>(xm) * c + ch], hh = r2[static_cast<size_t>(px) * c + ch], ii = r2[static_cast<size_t>(xp) * c + ch];
            // Paired differences cancel exactly on constant input, so flat
            // regions map to exactly zero.
            T rh = ((cc - a) + 2 * (f - d) + (ii - g)) * T(0.25);
            T rv = ((g - a) + 2 * (hh - bb) + (ii - cc)) * T(0.25);
            rh = rh > T(1) ? T(1) : (rh < T(-1) ? T(-1) : rh);
            rv = rv > T(1) ? T(1) : (rv < T(-1) ? T(-1) : rv);
            orow[static_cast<size_t>(px) * 2 * c + 2 * ch] = rh;
            orow[static_cast<size_t>(px) * 2 * c + 2 * ch + 1] = rv;
        }
    }
}

}  // namespace detail

namespace serial {

// Row pass: out width depends on mode (valid shrinks, full grows, reflect keeps).
template <class T>
void filter_rows(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, int mode) {
    const int ow = mode == 0 ? w - klen + 1 : (mode == 1 ? w + klen - 1 : w);
    const int64_t nrows = static_cast<int64_t>(batch) * h;
    for (int64_t r = 0; r < nrows; ++r) {
        const T* xrow = x + static_cast<size_t>(r) * w * c;
        T* yrow = y + static_cast<size_t>(r) * ow * c;
        if (mode == 0) detail::corr_row_valid(xrow, yrow, w, c, k, klen);
        else if (mode == 1) detail::conv_row_full(xrow, yrow, w, c, k, klen);
        else detail::corr_row_reflect(xrow, yrow, w, c, k, klen);
    }
}

template <class T>
void filter_cols(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, int mode) {
    const int oh = mode == 0 ? h - klen + 1 : (mode == 1 ? h + klen - 1 : h);
    const int64_t nrows = static_cast<int64_t>(batch) * oh;
    for (int64_t r = 0; r < nrows; ++r) {
        const int b = static_cast<int>(r / oh);
        const int yy = static_cast<int>(r % oh);
        detail::col_pass_row(x, y + static_cast<size_t>(r) * w * c, h, w, c, k, klen, mode, b, yy);
    }
}

template <class T>
void sobel_hv(const T* x, T* out, int batch, int h, int w, int c) {
    const int64_t nrows = static_cast<int64_t>(batch) * h;
    for (int64_t r = 0; r < nrows; ++r)
        detail::sobel_row(x, out, h, w, c, static_cast<int>(r / h), static_cast<int>(r % h));
}

}  // namespace serial

namespace omp {

template <class T>
void filter_rows(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, int mode) {
    const int ow = mode == 0 ? w - klen + 1 : (mode == 1 ? w + klen - 1 : w);
    const int64_t nrows = static_cast<int64_t>(batch) * h;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < nrows; ++r) {
        const T* xrow = x + static_cast<size_t>(r) * w * c;
        T* yrow = y + static_cast<size_t>(r) * ow * c;
        if (mode == 0) detail::corr_row_valid(xrow, yrow, w, c, k, klen);
        else if (mode == 1) detail::conv_row_full(xrow, yrow, w, c, k, klen);
        else detail::corr_row_reflect(xrow, yrow, w, c, k, klen);
    }
}

template <class T>
void filter_cols(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, int mode) {
    const int oh = mode == 0 ? h - klen + 1 : (mode == 1 ? h + klen - 1 : h);
    const int64_t nrows = static_cast<int64_t>(batch) * oh;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < nrows; ++r) {
        const int b = static_cast<int>(r / oh);
        const int yy = static_cast<int>(r % oh);
        detail::col_pass_row(x, y + static_cast<size_t>(r) * w * c, h, w, c, k, klen, mode, b, yy);
    }
}

template <class T>
void sobel_hv(const T* x, T* out, int batch, int h, int w, int c) {
    const int64_t nrows = static_cast<int64_t>(batch) * h;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < nrows; ++r)
        detail::sobel_row(x, out, h, w, c, static_cast<int>(r / h), static_cast<int>(r % h));
}

}  // namespace omp

enum class FilterMode { valid = 0, full_adjoint = 1, reflect = 2 };

template <class T>
void filter_rows(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, FilterMode mode) {
    if (parallel::enabled())
        omp::filter_rows(x, y, batch, h, w, c, k, klen, static_cast<int>(mode));
    else
        serial::filter_rows(x, y, batch, h, w, c, k, klen, static_cast<int>(mode));
}

template <class T>
void filter_cols(const T* x, T* y, int batch, int h, int w, int c, const T* k, int klen, FilterMode mode) {
    if (parallel::enabled())
        omp::filter_cols(x, y, batch, h, w, c, k, klen, static_cast<int>(mode));
    else
        serial::filter_cols(x, y, batch, h, w, c, k, klen, static_cast<int>(mode));
}

template <class T>
void sobel_hv(const T* x, T* out, int batch, int h, int w, int c) {
    if (parallel::enabled())
        omp::sobel_hv(x, out, batch, h, w, c);
    else
        serial::sobel_hv(x, out, batch, h, w, c);
}

}  // namespace lsda::kernels
