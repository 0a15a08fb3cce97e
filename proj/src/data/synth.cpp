#include "lsda/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "lsda/core/rng.hpp"
#include "lsda/data/png_io.hpp"

namespace fs = std::filesystem;

namespace lsda::data {

namespace {

const char* kClassNames[4] = {"disk", "ring", "square", "triangle"};

struct Vec2 {
    double x, y;
};

// Signed distances, negative inside.
double sd_disk(Vec2 p, double r) { return std::hypot(p.x, p.y) - r; }

double sd_ring(Vec2 p, double r, double half_width) {
    return std::abs(std::hypot(p.x, p.y) - r) - half_width;
}

double sd_square(Vec2 p, double r, double theta) {
    const double c = std::cos(-theta), s = std::sin(-theta);
    const double qx = std::abs(c * p.x - s * p.y);
    const double qy = std::abs(s * p.x + c * p.y);
    return std::max(qx, qy) - r;
}

// Equilateral triangle with circumradius r: intersection of three half-planes
// whose inward normals sit 120 degrees apart.
double sd_triangle(Vec2 p, double r, double theta) {
    double sd = -1e9;
    for (int i = 0; i < 3; ++i) {
        const double a = theta + M_PI / 2 + i * 2 * M_PI / 3;
        const double nx = std::cos(a), ny = std::sin(a);
        sd = std::max(sd, nx * p.x + ny * p.y - r * 0.5);
    }
    return sd;
}

struct Palette {
    float bg_a[3], bg_b[3], fg[3];
};

// Colors are class-neutral; resample until foreground and background are
// separated enough that the shape outline survives blur and noise.
Palette draw_palette(Rng& rng) {
    Palette p{};
    for (int attempt = 0; attempt < 64; ++attempt) {
        double bg_mean = 0, fg_mean = 0;
        for (int c = 0; c < 3; ++c) {
            p.bg_a[c] = static_cast<float>(rng.uniform(-0.85, 0.1));
            p.bg_b[c] = static_cast<float>(rng.uniform(-0.85, 0.1));
            p.fg[c] = static_cast<float>(rng.uniform(-0.3, 0.9));
            bg_mean += (p.bg_a[c] + p.bg_b[c]) / 2;
            fg_mean += p.fg[c];
        }
        if (fg_mean / 3 - bg_mean / 3 >= 0.55) return p;
    }
    // Hard fallback keeps the generator total.
    for (int c = 0; c < 3; ++c) {
        p.bg_a[c] = p.bg_b[c] = -0.7f;
        p.fg[c] = 0.6f;
    }
    return p;
}

}  // namespace

TensorF synth_image(int class_id, int img_size, int channels, uint64_t seed) {
    if (class_id < 0 || class_id >= 4) throw std::invalid_argument("synth_image: class_id in [0,4)");
    Rng rng(seed);
    const Palette pal = draw_palette(rng);

    const double n = img_size;
    const double radius = rng.uniform(0.26, 0.34) * n;
    const double theta = rng.uniform(0.0, 2 * M_PI);
    const double ring_half = std::max(1.2, 0.22 * radius);
    // Widest footprint of any class (the triangle circumradius); jitter the
    // center only within the slack so no shape ever clips at the border.
    const double extent = 1.15 * radius + 1.0;
    const double slack = std::max(0.01 * n, n / 2 - extent - 0.03 * n);
    const Vec2 center{n / 2 + rng.uniform(-slack, slack), n / 2 + rng.uniform(-slack, slack)};
    // Background gradient direction.
    const double ga = rng.uniform(0.0, 2 * M_PI);
    const double gx = std::cos(ga), gy = std::sin(ga);
    const double noise_sigma = 0.02;

    TensorF rgb({img_size, img_size, 3});
    for (int y = 0; y < img_size; ++y) {
        for (int x = 0; x < img_size; ++x) {
            const Vec2 p{x + 0.5 - center.x, y + 0.5 - center.y};
            double sd;
            switch (class_id) {
                case 0: sd = sd_disk(p, radius); break;
                case 1: sd = sd_ring(p, radius, ring_half); break;
                case 2: sd = sd_square(p, radius * 0.88, theta); break;
                default: sd = sd_triangle(p, radius * 1.15, theta); break;
            }
            // One-pixel smoothstep edge stands in for supersampling.
            const double t = std::clamp(0.5 - sd, 0.0, 1.0);
            const double cover = t * t * (3 - 2 * t);
            const double g = 0.5 + 0.5 * ((x + 0.5 - n / 2) * gx + (y + 0.5 - n / 2) * gy) / (n / 2);
            for (int c = 0; c < 3; ++c) {
                const double bg = pal.bg_a[c] * (1 - g) + pal.bg_b[c] * g;
                double v = bg * (1 - cover) + pal.fg[c] * cover;
                v += rng.normal(0.0, noise_sigma);
                rgb.at(y, x, c) = static_cast<float>(std::clamp(v, -1.0, 1.0));
            }
        }
    }
    return channels == 3 ? rgb : convert_channels(rgb, channels);
}

LabeledDataset synth_dataset(const SynthConfig& cfg, const std::string& domain_tag) {
    LabeledDataset ds;
    ds.class_names.assign(kClassNames, kClassNames + 4);
    ds.domain_tag = domain_tag;
    const int n = cfg.per_class * 4;
    ds.images = TensorF({n, cfg.img_size, cfg.img_size, cfg.channels});
    ds.labels.resize(n);
    const size_t stride = static_cast<size_t>(cfg.img_size) * cfg.img_size * cfg.channels;
    for (int i = 0; i < cfg.per_class; ++i) {
        for (int c = 0; c < 4; ++c) {
            const int item = i * 4 + c;
            const TensorF img = synth_image(
                c, cfg.img_size, cfg.channels,
                derive_seed(cfg.seed, kClassNames[c], static_cast<uint64_t>(i)));
            std::memcpy(ds.images.data() + item * stride, img.data(), stride * sizeof(float));
            ds.labels[item] = c;
        }
    }
    return ds;
}

void write_corpus(const std::string& root, const std::string& split, const SynthConfig& cfg) {
    const LabeledDataset ds = synth_dataset(cfg, split);
    char name[32];
    for (int c = 0; c < 4; ++c) {
        const fs::path dir = fs::path(root) / split / kClassNames[c];
        fs::create_directories(dir);
        int serial = 0;
        for (size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] != c) continue;
            std::snprintf(name, sizeof(name), "%04d.png", serial++);
            write_png((dir / name).string(), ds.image(i));
        }
    }
}

}  // namespace lsda::data
