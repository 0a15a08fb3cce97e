#pragma once

#include <string>

#include "lsda/core/tensor.hpp"

namespace lsda::data {

// Read an 8-bit PNG into an (H, W, C) float tensor in [-1, 1]. Palette and
// 16-bit images are expanded/narrowed; alpha is dropped; C is 1 or 3.
TensorF read_png(const std::string& path);

// Write an (H, W, C) tensor in [-1, 1] as an 8-bit PNG (C = 1 or 3).
void write_png(const std::string& path, const TensorF& img);

TensorF resize_bilinear(const TensorF& img, int out_h, int out_w);

// Replicate a grayscale image to 3 channels or reduce RGB to luma.
TensorF convert_channels(const TensorF& img, int out_c);

}  // namespace lsda::data
