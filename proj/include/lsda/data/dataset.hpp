#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lsda/core/tensor.hpp"

namespace lsda::data {

// Class-labeled image set. Images live in one (N, H, W, C) tensor in
// iteration order; that order is part of the determinism contract.
struct LabeledDataset {
    TensorF images;  // (N, H, W, C)
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::string domain_tag;

    size_t size() const { return labels.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
    int height() const { return images.dim(1); }
    int width() const { return images.dim(2); }
    int channels() const { return images.dim(3); }

    TensorF image(size_t i) const;                  // copy of item i as (H, W, C)
    void set_image(size_t i, const TensorF& img);   // write item i back
};

// Load `root/split/<class>/*.png`, classes indexed by sorted directory name,
// files in sorted order, resized to (img_size, img_size) and converted to
// `channels`. Undecodable files are skipped with a warning; a class with no
// usable image is an error naming the class.
LabeledDataset load_dataset(const std::string& root, const std::string& split, int img_size,
                            int channels);

// Stratified split: per class, round(fraction * n) items into the first part.
// Errors if any class would leave either side empty.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds, double fraction,
                                                        uint64_t seed);

LabeledDataset take_subset(const LabeledDataset& ds, const std::vector<size_t>& indices);

// First n items per the dataset's order, keeping class metadata.
LabeledDataset take_first(const LabeledDataset& ds, size_t n);

// Items order[begin..end) stacked into one (end-begin, H, W, C) tensor.
TensorF gather_batch(const LabeledDataset& ds, const std::vector<size_t>& order, size_t begin,
                     size_t end);

}  // namespace lsda::data
