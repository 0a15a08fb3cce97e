#include "lsda/data/shift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lsda/core/rng.hpp"
#include "lsda/kernels/filter.hpp"

namespace lsda::data {

void ShiftConfig::validate() const {
    if (brightness_scale <= 0 || contrast_scale <= 0)
        throw std::invalid_argument("shift: scales must be > 0");
    for (double g : channel_gain)
        if (g <= 0) throw std::invalid_argument("shift: channel gains must be > 0");
    if (noise_sigma < 0 || blur_sigma < 0)
        throw std::invalid_argument("shift: sigmas must be >= 0");
}

bool ShiftConfig::is_identity() const {
    return hue_rotation == 0 && brightness_scale == 1 && contrast_scale == 1 &&
           channel_gain[0] == 1 && channel_gain[1] == 1 && channel_gain[2] == 1 &&
           noise_sigma == 0 && blur_sigma == 0;
}

namespace {

// Rotation of RGB space about the gray axis (1,1,1)/sqrt(3) by `deg` degrees
// (Rodrigues formula). Grays are fixed points; hue moves, luma stays.
void hue_matrix(double deg, double m[3][3]) {
    const double th = deg * M_PI / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double k = 1.0 / std::sqrt(3.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = (i == j ? c : 0.0) + (1 - c) / 3.0;
    m[0][1] -= s * k;
    m[0][2] += s * k;
    m[1][0] += s * k;
    m[1][2] -= s * k;
    m[2][0] -= s * k;
    m[2][1] += s * k;
}

void gaussian_blur(TensorF& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int klen = 2 * radius + 1;
    std::vector<double> kd(klen);
    double sum = 0;
    for (int i = 0; i < klen; ++i) {
        kd[i] = std::exp(-(i - radius) * (i - radius) / (2 * sigma * sigma));
        sum += kd[i];
    }
    std::vector<float> k(klen);
    for (int i = 0; i < klen; ++i) k[i] = static_cast<float>(kd[i] / sum);

    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    TensorF tmp({h, w, c}), out({h, w, c});
    kernels::filter_rows(img.data(), tmp.data(), 1, h, w, c, k.data(), klen,
                         kernels::FilterMode::reflect);
    kernels::filter_cols(tmp.data(), out.data(), 1, h, w, c, k.data(), klen,
                         kernels::FilterMode::reflect);
    img = out;
}

}  // namespace

TensorF shift_image(const TensorF& img, const ShiftConfig& cfg, uint64_t image_index) {
    cfg.validate();
    if (cfg.is_identity()) return img;

    TensorF out = img;
    const int c = out.dim(2);
    const size_t pixels = out.size() / c;

    if (cfg.hue_rotation != 0 && c == 3) {
        double m[3][3];
        hue_matrix(cfg.hue_rotation, m);
        for (size_t p = 0; p < pixels; ++p) {
            float* px = out.data() + p * 3;
            const double r = px[0], g = px[1], b = px[2];
            px[0] = static_cast<float>(m[0][0] * r + m[0][1] * g + m[0][2] * b);
            px[1] = static_cast<float>(m[1][0] * r + m[1][1] * g + m[1][2] * b);
            px[2] = static_cast<float>(m[2][0] * r + m[2][1] * g + m[2][2] * b);
        }
    }

    bool any_gain = false;
    for (double g : cfg.channel_gain) any_gain |= g != 1.0;
    if (any_gain)
        for (size_t p = 0; p < pixels; ++p)
            for (int ch = 0; ch < c; ++ch)
                out[p * c + ch] =
                    static_cast<float>(out[p * c + ch] * cfg.channel_gain[ch % 3]);

    if (cfg.contrast_scale != 1.0) {
        double mean = 0;
        for (size_t i = 0; i < out.size(); ++i) mean += out[i];
        mean /= static_cast<double>(out.size());
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<float>(mean + (out[i] - mean) * cfg.contrast_scale);
    }

    if (cfg.brightness_scale != 1.0)
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<float>(out[i] * cfg.brightness_scale);

    if (cfg.blur_sigma > 0) gaussian_blur(out, cfg.blur_sigma);

    if (cfg.noise_sigma > 0) {
        Rng rng(derive_seed(cfg.seed, "shift-noise", image_index));
        for (size_t i = 0; i < out.size(); ++i)
            out[i] += static_cast<float>(rng.normal(0.0, cfg.noise_sigma));
    }

    for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], -1.0f, 1.0f);
    return out;
}

LabeledDataset apply_shift(const LabeledDataset& ds, const ShiftConfig& cfg,
                           const std::string& new_tag) {
    cfg.validate();
    LabeledDataset out;
    out.labels = ds.labels;
    out.class_names = ds.class_names;
    out.domain_tag = new_tag;
    out.images = TensorF(ds.images.shape());
    for (size_t i = 0; i < ds.size(); ++i) {
        const TensorF shifted = shift_image(ds.image(i), cfg, i);
        std::copy(shifted.data(), shifted.data() + shifted.size(),
                  out.images.data() + i * shifted.size());
    }
    return out;
}

}  // namespace lsda::data
