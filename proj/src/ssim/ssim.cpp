#include "lsda/ssim/ssim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "lsda/kernels/filter.hpp"

namespace lsda::ssim {

void SsimConfig::validate() const {
    if (window_size < 3 || window_size % 2 == 0)
        throw std::invalid_argument("ssim: window_size must be odd and >= 3");
    if (window_sigma <= 0) throw std::invalid_argument("ssim: window_sigma must be > 0");
    if (dynamic_range <= 0) throw std::invalid_argument("ssim: dynamic_range must be > 0");
    if (alpha <= 0 || beta <= 0 || gamma <= 0)
        throw std::invalid_argument("ssim: exponents must be > 0");
    if (c1() <= 0 || c2() <= 0) throw std::invalid_argument("ssim: k1, k2 must be nonzero");
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const double mid = (size - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-(i - mid) * (i - mid) / (2 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

LossKind parse_loss_kind(const std::string& s) {
    std::string u;
    for (char ch : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (u == "SSIM") return LossKind::ssim;
    if (u == "MSE") return LossKind::mse;
    if (u == "MAE") return LossKind::mae;
    throw std::invalid_argument("unknown search loss kind: " + s);
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::ssim: return "SSIM";
        case LossKind::mse: return "MSE";
        case LossKind::mae: return "MAE";
    }
    return "?";
}

// All window statistics run in double regardless of the image element type:
// float-precision moments would leak ~1e-5 relative error into the component
// values of near-degenerate windows, which the closed-form tests do resolve.
// Float entry points cast at the boundary.

namespace {

// v^e with e == 1 kept an exact identity so default exponents preserve the
// ssim(x,x) == 1 guarantee. Fractional exponents of a nonpositive base
// (possible for l and s) are flushed to 0.
inline double pow_ss(double v, double e) {
    if (e == 1.0) return v;
    if (v <= 0.0) return 0.0;
    return std::pow(v, e);
}

inline double pow_ss_deriv(double v, double e) {
    if (e == 1.0) return 1.0;
    if (v <= 0.0) return 0.0;
    return e * std::pow(v, e - 1.0);
}

TensorD sep_valid(const TensorD& img, const std::vector<double>& k) {
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const int klen = static_cast<int>(k.size());
    TensorD tmp({h, w - klen + 1, c});
    TensorD out({h - klen + 1, w - klen + 1, c});
    kernels::filter_rows(img.data(), tmp.data(), 1, h, w, c, k.data(), klen,
                         kernels::FilterMode::valid);
    kernels::filter_cols(tmp.data(), out.data(), 1, h, w - klen + 1, c, k.data(), klen,
                         kernels::FilterMode::valid);
    return out;
}

// Adjoint of sep_valid: maps a window-space tensor back to pixel space.
TensorD sep_valid_adjoint(const TensorD& win, const std::vector<double>& k, int h, int w) {
    const int c = win.dim(2);
    const int klen = static_cast<int>(k.size());
    TensorD tmp({win.dim(0), w, c});
    TensorD out({h, w, c});
    kernels::filter_rows(win.data(), tmp.data(), 1, win.dim(0), win.dim(1), c, k.data(), klen,
                         kernels::FilterMode::full_adjoint);
    kernels::filter_cols(tmp.data(), out.data(), 1, win.dim(0), w, c, k.data(), klen,
                         kernels::FilterMode::full_adjoint);
    return out;
}

TensorD hadamard(const TensorD& a, const TensorD& b) {
    TensorD out(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

struct WindowStats {
    TensorD mux, muy, sxx, syy, sxy;
};

WindowStats window_stats(const TensorD& x, const TensorD& y, const std::vector<double>& k) {
    return {sep_valid(x, k), sep_valid(y, k), sep_valid(hadamard(x, x), k),
            sep_valid(hadamard(y, y), k), sep_valid(hadamard(x, y), k)};
}

void check_pair_shape(const std::vector<int>& xs, const std::vector<int>& ys,
                      const SsimConfig& cfg) {
    cfg.validate();
    if (xs.size() != 3 || xs != ys)
        throw std::invalid_argument("ssim: images must be (H, W, C) of equal shape");
    if (xs[0] < cfg.window_size || xs[1] < cfg.window_size)
        throw std::invalid_argument("ssim: image smaller than the window");
}

// Per-window l, c, s plus the intermediates the backward pass reuses.
// sigma_x*sigma_y is computed as sqrt(var_x*var_y), which IEEE round-to-
// nearest maps back to var exactly when the vars coincide, and the covariance
// is clamped to the Cauchy-Schwarz bound; together these make every window of
// an (x, x) pair evaluate to exactly (1, 1, 1).
struct WindowPoint {
    double mux, muy, varx, vary, cov, ss;
    double l, c, s;
    bool cov_hi, cov_lo, vary_clamped;

    WindowPoint(const WindowStats& st, size_t i, double c1, double c2, double c3) {
        mux = st.mux[i];
        muy = st.muy[i];
        varx = std::max(st.sxx[i] - mux * mux, 0.0);
        const double vy_raw = st.syy[i] - muy * muy;
        vary_clamped = vy_raw <= 0.0;
        vary = vary_clamped ? 0.0 : vy_raw;
        ss = std::sqrt(varx * vary);
        const double cv = st.sxy[i] - mux * muy;
        cov_hi = cv > ss;
        cov_lo = cv < -ss;
        cov = cov_hi ? ss : (cov_lo ? -ss : cv);
        l = (2 * mux * muy + c1) / (mux * mux + muy * muy + c1);
        c = (2 * ss + c2) / (varx + vary + c2);
        s = (cov + c3) / (ss + c3);
    }
};

SsimComponents components_core(const TensorD& x, const TensorD& y, const SsimConfig& cfg) {
    const auto k = gaussian_window(cfg.window_size, cfg.window_sigma);
    const auto st = window_stats(x, y, k);
    double sl = 0, sc = 0, ssum = 0;
    for (size_t i = 0; i < st.mux.size(); ++i) {
        const WindowPoint p(st, i, cfg.c1(), cfg.c2(), cfg.c3());
        sl += p.l;
        sc += p.c;
        ssum += p.s;
    }
    const double n = static_cast<double>(st.mux.size());
    return {sl / n, sc / n, ssum / n};
}

double ssim_core(const TensorD& x, const TensorD& y, const SsimConfig& cfg) {
    const auto k = gaussian_window(cfg.window_size, cfg.window_sigma);
    const auto st = window_stats(x, y, k);
    double acc = 0;
    for (size_t i = 0; i < st.mux.size(); ++i) {
        const WindowPoint p(st, i, cfg.c1(), cfg.c2(), cfg.c3());
        acc += pow_ss(p.l, cfg.alpha) * pow_ss(p.c, cfg.beta) * pow_ss(p.s, cfg.gamma);
    }
    return acc / static_cast<double>(st.mux.size());
}

// SSIM loss and gradient with respect to y, in terms of the raw window
// moments m = W*y, q = W*(y^2), r = W*(x*y):
//   var_y = q - m^2,  cov = r - mu_x*m,
//   dL/dy = adj(A) + 2y . adj(B) + x . adj(R)
// where A, B, R hold the per-window partials dL/dm, dL/dq, dL/dr.
double ssim_grad_core(const TensorD& x, const TensorD& y, const SsimConfig& cfg, TensorD& dy) {
    const auto k = gaussian_window(cfg.window_size, cfg.window_sigma);
    const auto st = window_stats(x, y, k);
    const double c1 = cfg.c1(), c2 = cfg.c2(), c3 = cfg.c3();

    TensorD A(st.mux.shape()), B(st.mux.shape()), R(st.mux.shape());
    const double inv_n = 1.0 / static_cast<double>(st.mux.size());
    double acc = 0;
    for (size_t i = 0; i < st.mux.size(); ++i) {
        const WindowPoint p(st, i, c1, c2, c3);
        const double pl = pow_ss(p.l, cfg.alpha), pc = pow_ss(p.c, cfg.beta),
                     ps = pow_ss(p.s, cfg.gamma);
        acc += pl * pc * ps;

        const double dP_dl = pow_ss_deriv(p.l, cfg.alpha) * pc * ps;
        const double dP_dc = pl * pow_ss_deriv(p.c, cfg.beta) * ps;
        const double dP_ds = pl * pc * pow_ss_deriv(p.s, cfg.gamma);

        const double den_l = p.mux * p.mux + p.muy * p.muy + c1;
        const double dl_dm = 2 * (p.mux - p.l * p.muy) / den_l;

        const double dss_dvy = p.ss > 0.0 ? p.varx / (2 * p.ss) : 0.0;
        const double den_c = p.varx + p.vary + c2;
        const double dc_dvy = (2 * dss_dvy - p.c) / den_c;

        const double den_s = p.ss + c3;
        double ds_dvy, ds_dcov;
        if (p.cov_hi || p.cov_lo) {
            // Covariance pinned at +/- ss: s varies only through ss.
            const double sign = p.cov_hi ? 1.0 : -1.0;
            ds_dvy = dss_dvy * (sign - p.s) / den_s;
            ds_dcov = 0.0;
        } else {
            ds_dvy = -(p.s / den_s) * dss_dvy;
            ds_dcov = 1.0 / den_s;
        }

        const double dvy_dm = p.vary_clamped ? 0.0 : -2 * p.muy;
        const double dvy_dq = p.vary_clamped ? 0.0 : 1.0;
        const double dcov_dm = -p.mux;

        // L = 1 - mean(P): scale every partial by -1/n.
        const double dL_dvy = (dP_dc * dc_dvy + dP_ds * ds_dvy) * -inv_n;
        const double dL_dcov = dP_ds * ds_dcov * -inv_n;
        A[i] = dP_dl * dl_dm * -inv_n + dL_dvy * dvy_dm + dL_dcov * dcov_dm;
        B[i] = dL_dvy * dvy_dq;
        R[i] = dL_dcov;
    }

    const int h = x.dim(0), w = x.dim(1);
    const TensorD adjA = sep_valid_adjoint(A, k, h, w);
    const TensorD adjB = sep_valid_adjoint(B, k, h, w);
    const TensorD adjR = sep_valid_adjoint(R, k, h, w);
    dy = TensorD(y.shape());
    for (size_t i = 0; i < dy.size(); ++i) dy[i] = adjA[i] + 2 * y[i] * adjB[i] + x[i] * adjR[i];
    return 1.0 - acc * inv_n;
}

template <class T>
TensorD to_double(const Tensor<T>& t) {
    return t.template cast<double>();
}

template <>
TensorD to_double(const TensorD& t) {
    return t;
}

}  // namespace

template <class T>
SsimComponents ssim_components(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
    check_pair_shape(x.shape(), y.shape(), cfg);
    return components_core(to_double(x), to_double(y), cfg);
}

template <class T>
double ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
    check_pair_shape(x.shape(), y.shape(), cfg);
    return ssim_core(to_double(x), to_double(y), cfg);
}

template <class T>
double search_loss(const Tensor<T>& x, const Tensor<T>& y, LossKind kind, const SsimConfig& cfg) {
    if (kind == LossKind::ssim) return 1.0 - ssim(x, y, cfg);
    if (!x.same_shape(y))
        throw std::invalid_argument("search_loss: shape mismatch " + x.shape_str() + " vs " +
                                    y.shape_str());
    double acc = 0;
    if (kind == LossKind::mse)
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
            acc += d * d;
        }
    else
        for (size_t i = 0; i < x.size(); ++i)
            acc += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
    return acc / static_cast<double>(x.size());
}

template <class T>
double search_loss_grad(const Tensor<T>& x, const Tensor<T>& y, LossKind kind,
                        const SsimConfig& cfg, Tensor<T>& dy) {
    if (kind != LossKind::ssim) {
        if (!x.same_shape(y)) throw std::invalid_argument("search_loss_grad: shape mismatch");
        dy = Tensor<T>(y.shape());
        const double inv_n = 1.0 / static_cast<double>(x.size());
        double acc = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(y[i]) - static_cast<double>(x[i]);
            if (kind == LossKind::mse) {
                acc += d * d;
                dy[i] = static_cast<T>(2.0 * d * inv_n);
            } else {
                acc += std::abs(d);
                dy[i] = static_cast<T>((d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv_n);
            }
        }
        return acc * inv_n;
    }

    check_pair_shape(x.shape(), y.shape(), cfg);
    TensorD dyd;
    const double loss = ssim_grad_core(to_double(x), to_double(y), cfg, dyd);
    dy = dyd.cast<T>();
    return loss;
}

template SsimComponents ssim_components<float>(const Tensor<float>&, const Tensor<float>&,
                                               const SsimConfig&);
template SsimComponents ssim_components<double>(const Tensor<double>&, const Tensor<double>&,
                                                const SsimConfig&);
template double ssim<float>(const Tensor<float>&, const Tensor<float>&, const SsimConfig&);
template double ssim<double>(const Tensor<double>&, const Tensor<double>&, const SsimConfig&);
template double search_loss<float>(const Tensor<float>&, const Tensor<float>&, LossKind,
                                   const SsimConfig&);
template double search_loss<double>(const Tensor<double>&, const Tensor<double>&, LossKind,
                                    const SsimConfig&);
template double search_loss_grad<float>(const Tensor<float>&, const Tensor<float>&, LossKind,
                                        const SsimConfig&, Tensor<float>&);
template double search_loss_grad<double>(const Tensor<double>&, const Tensor<double>&, LossKind,
                                         const SsimConfig&, Tensor<double>&);

}  // namespace lsda::ssim
