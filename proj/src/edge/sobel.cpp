#include "lsda/edge/sobel.hpp"

#include <stdexcept>

#include "lsda/kernels/filter.hpp"

namespace lsda::edge {

TensorF sobel_edges(const TensorF& img) {
    if (img.ndim() != 3) throw std::invalid_argument("sobel_edges: expected (H, W, C) image");
    TensorF out({img.dim(0), img.dim(1), 2 * img.dim(2)});
    kernels::sobel_hv(img.data(), out.data(), 1, img.dim(0), img.dim(1), img.dim(2));
    return out;
}

TensorF sobel_edges_batch(const TensorF& imgs) {
    if (imgs.ndim() != 4) throw std::invalid_argument("sobel_edges_batch: expected (B, H, W, C)");
    TensorF out({imgs.dim(0), imgs.dim(1), imgs.dim(2), 2 * imgs.dim(3)});
    kernels::sobel_hv(imgs.data(), out.data(), imgs.dim(0), imgs.dim(1), imgs.dim(2), imgs.dim(3));
    return out;
}

}  // namespace lsda::edge
