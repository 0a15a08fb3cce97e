#include "lsda/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include "lsda/core/rng.hpp"
#include "lsda/data/png_io.hpp"

namespace fs = std::filesystem;

namespace lsda::data {

TensorF LabeledDataset::image(size_t i) const {
    const int h = height(), w = width(), c = channels();
    TensorF img({h, w, c});
    std::memcpy(img.data(), images.data() + i * img.size(), img.size() * sizeof(float));
    return img;
}

void LabeledDataset::set_image(size_t i, const TensorF& img) {
    std::memcpy(images.data() + i * img.size(), img.data(), img.size() * sizeof(float));
}

LabeledDataset load_dataset(const std::string& root, const std::string& split, int img_size,
                            int channels) {
    const fs::path base = fs::path(root) / split;
    if (!fs::is_directory(base))
        throw std::runtime_error("dataset directory not found: " + base.string());

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(base))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw std::runtime_error("no class directories in " + base.string());

    std::vector<TensorF> imgs;
    std::vector<int> labels;
    for (size_t ci = 0; ci < class_dirs.size(); ++ci) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(base / class_dirs[ci]))
            if (e.is_regular_file() && e.path().extension() == ".png")
                files.push_back(e.path().string());
        std::sort(files.begin(), files.end());

        size_t loaded = 0;
        for (const std::string& f : files) {
            try {
                TensorF img = read_png(f);
                img = resize_bilinear(img, img_size, img_size);
                img = convert_channels(img, channels);
                imgs.push_back(std::move(img));
                labels.push_back(static_cast<int>(ci));
                ++loaded;
            } catch (const std::exception& e) {
                std::cerr << "warning: skipping " << f << ": " << e.what() << "\n";
            }
        }
        if (loaded == 0)
            throw std::runtime_error("class '" + class_dirs[ci] + "' has no usable image under " +
                                     base.string());
    }

    LabeledDataset ds;
    ds.images = TensorF({static_cast<int>(imgs.size()), img_size, img_size, channels});
    for (size_t i = 0; i < imgs.size(); ++i)
        std::memcpy(ds.images.data() + i * imgs[i].size(), imgs[i].data(),
                    imgs[i].size() * sizeof(float));
    ds.labels = std::move(labels);
    ds.class_names = std::move(class_dirs);
    ds.domain_tag = split;
    return ds;
}

LabeledDataset take_subset(const LabeledDataset& ds, const std::vector<size_t>& indices) {
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.domain_tag = ds.domain_tag;
    out.images = TensorF({static_cast<int>(indices.size()), ds.height(), ds.width(),
                          ds.channels()});
    out.labels.reserve(indices.size());
    const size_t stride = static_cast<size_t>(ds.height()) * ds.width() * ds.channels();
    for (size_t k = 0; k < indices.size(); ++k) {
        std::memcpy(out.images.data() + k * stride, ds.images.data() + indices[k] * stride,
                    stride * sizeof(float));
        out.labels.push_back(ds.labels[indices[k]]);
    }
    return out;
}

LabeledDataset take_first(const LabeledDataset& ds, size_t n) {
    n = std::min(n, ds.size());
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    return take_subset(ds, idx);
}

TensorF gather_batch(const LabeledDataset& ds, const std::vector<size_t>& order, size_t begin,
                     size_t end) {
    const int h = ds.height(), w = ds.width(), c = ds.channels();
    TensorF x({static_cast<int>(end - begin), h, w, c});
    const size_t stride = static_cast<size_t>(h) * w * c;
    for (size_t i = begin; i < end; ++i)
        std::copy(ds.images.data() + order[i] * stride, ds.images.data() + (order[i] + 1) * stride,
                  x.data() + (i - begin) * stride);
    return x;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds, double fraction,
                                                        uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("split_dataset: fraction must be in (0, 1)");

    std::vector<std::vector<size_t>> by_class(ds.num_classes());
    for (size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

    std::vector<size_t> first, second;
    for (int c = 0; c < ds.num_classes(); ++c) {
        auto& idx = by_class[c];
        const size_t n = idx.size();
        const size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
        if (k == 0 || k >= n)
            throw std::invalid_argument("split_dataset: fraction leaves class '" +
                                        ds.class_names[c] + "' empty on one side");
        Rng rng(derive_seed(seed, "split", static_cast<uint64_t>(c)));
        rng.shuffle(idx.begin(), idx.end());
        first.insert(first.end(), idx.begin(), idx.begin() + static_cast<long>(k));
        second.insert(second.end(), idx.begin() + static_cast<long>(k), idx.end());
    }
    // Keep the original relative order inside each part so iteration order
    // stays a pure function of (dataset, fraction, seed).
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {take_subset(ds, first), take_subset(ds, second)};
}

}  // namespace lsda::data
