#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "lsda/ssim/ssim.hpp"

using lsda::Rng;
using lsda::Tensor;
using lsda::TensorD;
using lsda::TensorF;
namespace S = lsda::ssim;

namespace {

template <class T>
Tensor<T> random_image(Rng& rng, int h, int w, int c, T lo = T(-1), T hi = T(1)) {
    Tensor<T> img({h, w, c});
    testutil::fill_random(img, rng, lo, hi);
    return img;
}

// Relative L2 error of the analytic gradient against central differences on a
// random probe subset of coordinates.
double grad_fd_error(const TensorD& x, TensorD y, S::LossKind kind, const S::SsimConfig& cfg,
                     Rng& rng, int probes) {
    TensorD dy;
    S::search_loss_grad(x, y, kind, cfg, dy);
    std::vector<double> analytic, fd;
    const double h = 1e-6;
    for (int p = 0; p < probes; ++p) {
        const size_t i = rng.uniform_index(y.size());
        auto loss = [&]() { return S::search_loss(x, y, kind, cfg); };
        fd.push_back(testutil::central_diff(loss, &y[i], h));
        analytic.push_back(dy[i]);
    }
    return testutil::rel_l2(analytic, fd);
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly 1") {
    Rng rng(31);
    for (const auto& [h, w, c] : {std::tuple{16, 16, 1}, {32, 32, 3}, {24, 40, 3}}) {
        const TensorF x = random_image<float>(rng, h, w, c);
        S::SsimConfig cfg;
        CHECK(S::ssim(x, x, cfg) == 1.0);
        const auto [l, cc, s] = S::ssim_components(x, x, cfg);
        CHECK(l == 1.0);
        CHECK(cc == 1.0);
        CHECK(s == 1.0);
        CHECK(S::search_loss(x, x, S::LossKind::ssim, cfg) == 0.0);
        CHECK(S::search_loss(x, x, S::LossKind::mse, cfg) == 0.0);
        CHECK(S::search_loss(x, x, S::LossKind::mae, cfg) == 0.0);
    }
}

TEST_CASE("constant images match the closed form") {
    S::SsimConfig cfg;
    const TensorF a = TensorF::full({16, 16, 1}, 0.0f);
    const TensorF b = TensorF::full({16, 16, 1}, 1.0f);
    // Zero-variance images reduce the component formulas to scalars:
    // l = C1/(1 + C1) with C1 = (0.01*2)^2, c = s = 1.
    const double expected_l = 0.0004 / 1.0004;
    const auto comp = S::ssim_components(a, b, cfg);
    CHECK(comp.l == doctest::Approx(expected_l).epsilon(1e-9));
    CHECK(comp.c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(comp.s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(S::ssim(a, b, cfg) == doctest::Approx(expected_l).epsilon(1e-9));

    CHECK(S::search_loss(a, b, S::LossKind::mse, cfg) == doctest::Approx(1.0));
    CHECK(S::search_loss(a, b, S::LossKind::mae, cfg) == doctest::Approx(1.0));
}

TEST_CASE("ssim is symmetric at unit exponents") {
    Rng rng(32);
    S::SsimConfig cfg;
    for (int t = 0; t < 8; ++t) {
        const TensorF x = random_image<float>(rng, 20, 20, 3);
        const TensorF y = random_image<float>(rng, 20, 20, 3);
        CHECK(S::ssim(x, y, cfg) == S::ssim(y, x, cfg));
        CHECK(S::ssim(x, y, cfg) >= -1.0);
        CHECK(S::ssim(x, y, cfg) <= 1.0);
    }
}

TEST_CASE("ssim gradient matches finite differences on 50 random pairs") {
    Rng rng(33);
    S::SsimConfig cfg;
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const int c = t % 2 == 0 ? 1 : 3;
        const TensorD x = random_image<double>(rng, 16, 16, c);
        const TensorD y = random_image<double>(rng, 16, 16, c);
        worst = std::max(worst, grad_fd_error(x, y, S::LossKind::ssim, cfg, rng, 48));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("ssim gradient handles non-unit exponents") {
    Rng rng(34);
    S::SsimConfig cfg;
    cfg.alpha = 0.5;
    cfg.beta = 2.0;
    cfg.gamma = 1.5;
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        // Positive-leaning images keep l and s away from the nonsmooth
        // base <= 0 guard of fractional powers.
        const TensorD x = random_image<double>(rng, 16, 16, 1, 0.1, 1.0);
        TensorD y = x;
        for (size_t i = 0; i < y.size(); ++i) y[i] += rng.uniform(-0.05, 0.05);
        worst = std::max(worst, grad_fd_error(x, y, S::LossKind::ssim, cfg, rng, 32));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("mse and mae gradients match finite differences") {
    Rng rng(35);
    S::SsimConfig cfg;
    const TensorD x = random_image<double>(rng, 16, 16, 3);
    TensorD y = random_image<double>(rng, 16, 16, 3);
    CHECK(grad_fd_error(x, y, S::LossKind::mse, cfg, rng, 64) <= 1e-6);

    // Keep MAE probes away from its kink at x == y.
    for (size_t i = 0; i < y.size(); ++i)
        if (std::abs(y[i] - x[i]) < 1e-4) y[i] = x[i] + 0.1;
    CHECK(grad_fd_error(x, y, S::LossKind::mae, cfg, rng, 64) <= 1e-6);
}

TEST_CASE("tiny perturbations keep components near 1") {
    Rng rng(36);
    S::SsimConfig cfg;
    const TensorF x = random_image<float>(rng, 24, 24, 3, -0.8f, 0.8f);
    TensorF y = x;
    for (size_t i = 0; i < y.size(); ++i) y[i] += static_cast<float>(rng.normal(0.0, 1e-4));
    const auto comp = S::ssim_components(x, y, cfg);
    for (const double v : {comp.l, comp.c, comp.s}) {
        CHECK(v <= 1.0);
        CHECK(v >= 1.0 - 1e-3);
    }
}

TEST_CASE("ssim loss grows on average as images blend toward noise") {
    S::SsimConfig cfg;
    const std::vector<double> ts = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> mean_loss(ts.size(), 0.0);
    const int seeds = 6;
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(100 + seed);
        const TensorF x = random_image<float>(rng, 24, 24, 3, -0.6f, 0.6f);
        TensorF noise = random_image<float>(rng, 24, 24, 3);
        for (size_t ti = 0; ti < ts.size(); ++ti) {
            TensorF y(x.shape());
            for (size_t i = 0; i < y.size(); ++i)
                y[i] = static_cast<float>((1 - ts[ti]) * x[i] + ts[ti] * noise[i]);
            mean_loss[ti] += S::search_loss(x, y, S::LossKind::ssim, cfg) / seeds;
        }
    }
    for (size_t ti = 1; ti < ts.size(); ++ti) CHECK(mean_loss[ti] >= mean_loss[ti - 1] - 1e-9);
}

TEST_CASE("invalid configurations and shapes are rejected") {
    S::SsimConfig cfg;
    const TensorF x = TensorF::zeros({16, 16, 1});
    const TensorF y16x3 = TensorF::zeros({16, 16, 3});
    CHECK_THROWS(S::ssim(x, y16x3, cfg));

    S::SsimConfig even = cfg;
    even.window_size = 8;
    CHECK_THROWS(S::ssim(x, x, even));

    const TensorF tiny = TensorF::zeros({8, 8, 1});
    CHECK_THROWS(S::ssim(tiny, tiny, cfg));  // smaller than the 11-tap window

    CHECK_THROWS(S::parse_loss_kind("huber"));
    CHECK(S::parse_loss_kind("ssim") == S::LossKind::ssim);
    CHECK(S::parse_loss_kind("MSE") == S::LossKind::mse);
}
