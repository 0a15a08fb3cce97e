#pragma once

#include <array>
#include <cstdint>

#include "lsda/data/dataset.hpp"

namespace lsda::data {

// Photometric domain shift standing in for camera/stain variation between
// acquisition setups. Applied per image in the fixed order
// hue -> channel_gain -> contrast -> brightness -> blur -> noise, then
// re-clipped to [-1, 1]. Identity parameters are exact no-ops.
struct ShiftConfig {
    double hue_rotation = 0.0;  // degrees, rotation of RGB about the gray axis
    double brightness_scale = 1.0;
    double contrast_scale = 1.0;  // about the per-image mean
    std::array<double, 3> channel_gain{1.0, 1.0, 1.0};
    double noise_sigma = 0.0;
    double blur_sigma = 0.0;
    uint64_t seed = 0;

    void validate() const;  // throws on nonpositive scales or negative sigmas
    bool is_identity() const;
};

// Same labels, order, and cardinality; new domain tag. Noise streams are
// derived per image index, so output is bit-identical for identical
// (dataset, config) regardless of processing order.
LabeledDataset apply_shift(const LabeledDataset& ds, const ShiftConfig& cfg,
                           const std::string& new_tag);

// Single-image form; image_index selects the noise stream.
TensorF shift_image(const TensorF& img, const ShiftConfig& cfg, uint64_t image_index);

}  // namespace lsda::data
