#pragma once

#include <cstdint>
#include <vector>

#include "lsda/core/parallel.hpp"

namespace lsda::kernels {

// 2-D convolution geometry. Activations are laid out (B, H, W, C) row-major,
// weights (K, K, Cin, Cout), bias (Cout).
struct ConvGeom {
    int batch = 1;
    int in_h = 0, in_w = 0, in_c = 0;
    int out_c = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    size_t in_count() const { return static_cast<size_t>(batch) * in_h * in_w * in_c; }
    size_t out_count() const { return static_cast<size_t>(batch) * out_h() * out_w() * out_c; }
    size_t weight_count() const { return static_cast<size_t>(kernel) * kernel * in_c * out_c; }
};

namespace detail {

// One output pixel y[b, oy, ox, :]. Accumulation order (ky, kx, ic) is fixed
// here so the serial and OpenMP drivers produce identical bits.
template <class T>
inline void conv_fwd_pixel(const T* x, const T* w, const T* bias, T* y,
                           const ConvGeom& g, int b, int oy, int ox) {
    const int ow = g.out_w();
    T* out = y + ((static_cast<size_t>(b) * g.out_h() + oy) * ow + ox) * g.out_c;
    for (int oc = 0; oc < g.out_c; ++oc) out[oc] = bias ? bias[oc] : T(0);
    for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const T* xp = x + ((static_cast<size_t>(b) * g.in_h + iy) * g.in_w + ix) * g.in_c;
            const T* wp = w + (static_cast<size_t>(ky) * g.kernel + kx) * g.in_c * g.out_c;
            for (int ic = 0; ic < g.in_c; ++ic) {
                const T xv = xp[ic];
                const T* wrow = wp + static_cast<size_t>(ic) * g.out_c;
                for (int oc = 0; oc < g.out_c; ++oc) out[oc] += xv * wrow[oc];
            }
        }
    }
}

// One input pixel dx[b, iy, ix, :], gathering from dy. Gather form keeps the
// writes disjoint across threads.
template <class T>
inline void conv_bwd_input_pixel(const T* dy, const T* w, T* dx,
                                 const ConvGeom& g, int b, int iy, int ix) {
    const int oh = g.out_h(), ow = g.out_w();
    T* out = dx + ((static_cast<size_t>(b) * g.in_h + iy) * g.in_w + ix) * g.in_c;
    for (int ic = 0; ic < g.in_c; ++ic) out[ic] = T(0);
    for (int ky = 0; ky < g.kernel; ++ky) {
        const int oy_num = iy + g.pad - ky;
        if (oy_num < 0 || oy_num % g.stride != 0) continue;
        const int oy = oy_num / g.stride;
        if (oy >= oh) continue;
        for (int kx = 0; kx < g.kernel; ++kx) {
            const int ox_num = ix + g.pad - kx;
            if (ox_num < 0 || ox_num % g.stride != 0) continue;
            const int ox = ox_num / g.stride;
            if (ox >= ow) continue;
            const T* dyp = dy + ((static_cast<size_t>(b) * oh + oy) * ow + ox) * g.out_c;
            const T* wp = w + (static_cast<size_t>(ky) * g.kernel + kx) * g.in_c * g.out_c;
            for (int ic = 0; ic < g.in_c; ++ic) {
                const T* wrow = wp + static_cast<size_t>(ic) * g.out_c;
                T acc = T(0);
                for (int oc = 0; oc < g.out_c; ++oc) acc += dyp[oc] * wrow[oc];
                out[ic] += acc;
            }
        }
    }
}

// Weight and bias gradient for one output channel. Each call owns the oc lane
// of dw/db exclusively; the (b, oy, ox) accumulation order is fixed.
template <class T>
inline void conv_bwd_params_channel(const T* x, const T* dy, T* dw, T* db,
                                    const ConvGeom& g, int oc) {
    const int oh = g.out_h(), ow = g.out_w();
    const size_t wslots = static_cast<size_t>(g.kernel) * g.kernel * g.in_c;
    std::vector<T> acc(wslots, T(0));
    T bacc = T(0);
    for (int b = 0; b < g.batch; ++b) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const T gv = dy[((static_cast<size_t>(b) * oh + oy) * ow + ox) * g.out_c + oc];
                if (gv == T(0)) continue;
                bacc += gv;
                for (int ky = 0; ky < g.kernel; ++ky) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (int kx = 0; kx < g.kernel; ++kx) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix < 0 || ix >= g.in_w) continue;
                        const T* xp = x + ((static_cast<size_t>(b) * g.in_h + iy) * g.in_w + ix) * g.in_c;
                        T* arow = acc.data() + (static_cast<size_t>(ky) * g.kernel + kx) * g.in_c;
                        for (int ic = 0; ic < g.in_c; ++ic) arow[ic] += xp[ic] * gv;
                    }
                }
            }
        }
    }
    for (size_t s = 0; s < wslots; ++s) dw[s * g.out_c + oc] = acc[s];
    if (db) db[oc] = bacc;
}

}  // namespace detail

namespace serial {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeom& g) {
    const int oh = g.out_h(), ow = g.out_w();
    const int64_t n = static_cast<int64_t>(g.batch) * oh * ow;
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        detail::conv_fwd_pixel(x, w, bias, y, g, b, oy, ox);
    }
}

template <class T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const ConvGeom& g) {
    const int64_t n = static_cast<int64_t>(g.batch) * g.in_h * g.in_w;
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (g.in_h * g.in_w));
        const int iy = static_cast<int>((p / g.in_w) % g.in_h);
        const int ix = static_cast<int>(p % g.in_w);
        detail::conv_bwd_input_pixel(dy, w, dx, g, b, iy, ix);
    }
}

template <class T>
void conv2d_backward_params(const T* x, const T* dy, T* dw, T* db, const ConvGeom& g) {
    for (int oc = 0; oc < g.out_c; ++oc) detail::conv_bwd_params_channel(x, dy, dw, db, g, oc);
}

}  // namespace serial

namespace omp {

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeom& g) {
    const int oh = g.out_h(), ow = g.out_w();
    const int64_t n = static_cast<int64_t>(g.batch) * oh * ow;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        detail::conv_fwd_pixel(x, w, bias, y, g, b, oy, ox);
    }
}

template <class T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const ConvGeom& g) {
    const int64_t n = static_cast<int64_t>(g.batch) * g.in_h * g.in_w;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (g.in_h * g.in_w));
        const int iy = static_cast<int>((p / g.in_w) % g.in_h);
        const int ix = static_cast<int>(p % g.in_w);
        detail::conv_bwd_input_pixel(dy, w, dx, g, b, iy, ix);
    }
}

template <class T>
void conv2d_backward_params(const T* x, const T* dy, T* dw, T* db, const ConvGeom& g) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_c; ++oc) detail::conv_bwd_params_channel(x, dy, dw, db, g, oc);
}

}  // namespace omp

// Dispatchers honoring the process-wide parallel switch.

template <class T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeom& g) {
    if (parallel::enabled())
        omp::conv2d_forward(x, w, bias, y, g);
    else
        serial::conv2d_forward(x, w, bias, y, g);
}

template <class T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const ConvGeom& g) {
    if (parallel::enabled())
        omp::conv2d_backward_input(dy, w, dx, g);
    else
        serial::conv2d_backward_input(dy, w, dx, g);
}

template <class T>
void conv2d_backward_params(const T* x, const T* dy, T* dw, T* db, const ConvGeom& g) {
    if (parallel::enabled())
        omp::conv2d_backward_params(x, dy, dw, db, g);
    else
        serial::conv2d_backward_params(x, dy, dw, db, g);
}

}  // namespace lsda::kernels
