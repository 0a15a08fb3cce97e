#pragma once

#include <string>
#include <vector>

#include "lsda/core/tensor.hpp"

namespace lsda::ssim {

// Windowed structural similarity over (H, W, C) images in [-1, 1].
// C1 = (k1*L)^2, C2 = (k2*L)^2, C3 = C2/2 are derived stabilizers.
struct SsimConfig {
    int window_size = 11;
    double window_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 2.0;  // data range L; 2 for [-1, 1] pixels
    double alpha = 1.0, beta = 1.0, gamma = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    double c3() const { return c2() / 2.0; }
    void validate() const;  // throws std::invalid_argument on bad fields
};

struct SsimComponents {
    double l, c, s;
};

// Normalized 1-D Gaussian taps; the 2-D window is its outer product.
std::vector<double> gaussian_window(int size, double sigma);

// Mean luminance/contrast/structure over all window positions and channels.
template <class T>
SsimComponents ssim_components(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg);

// Mean over windows of l^alpha * c^beta * s^gamma. Equals 1.0 exactly when
// x == y: the implementation computes sigma_x*sigma_y as sqrt(var_x*var_y),
// which rounds back to var under IEEE round-to-nearest, and clamps the
// covariance to the Cauchy-Schwarz bound so degenerate windows stay at 1.
template <class T>
double ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg);

enum class LossKind { ssim, mse, mae };

LossKind parse_loss_kind(const std::string& s);  // "SSIM" | "MSE" | "MAE", case-insensitive
std::string to_string(LossKind kind);

// SSIM -> 1 - ssim(x, y); MSE -> mean squared difference; MAE -> mean
// absolute difference.
template <class T>
double search_loss(const Tensor<T>& x, const Tensor<T>& y, LossKind kind, const SsimConfig& cfg);

// Analytic gradient of search_loss with respect to y (the decoded clone).
// Writes into dy (reshaped to y's shape) and returns the loss.
template <class T>
double search_loss_grad(const Tensor<T>& x, const Tensor<T>& y, LossKind kind,
                        const SsimConfig& cfg, Tensor<T>& dy);

}  // namespace lsda::ssim
