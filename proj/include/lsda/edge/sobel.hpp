#pragma once

#include "lsda/core/tensor.hpp"

namespace lsda::edge {

// Edge map of an (H, W, C) image in [-1, 1]: per channel, the horizontal and
// vertical Sobel responses (reflect-padded, divided by 4, clipped to [-1, 1]),
// interleaved as (h0, v0, h1, v1, ...) into an (H, W, 2C) tensor. The
// horizontal response is positive where intensity increases with x.
TensorF sobel_edges(const TensorF& img);

// Batched form over (B, H, W, C) -> (B, H, W, 2C).
TensorF sobel_edges_batch(const TensorF& imgs);

}  // namespace lsda::edge
