#pragma once

#include <map>
#include <string>

#include "lsda/core/tensor.hpp"

namespace lsda::nn {

// Self-describing named-tensor archive used for classifier and VAE
// checkpoints: float32 tensors keyed by parameter name plus string metadata
// (architecture descriptor, latent dimension, ...). Binary little-endian;
// loading validates magic, version, and tensor shapes.
struct Archive {
    std::map<std::string, TensorF> tensors;
    std::map<std::string, std::string> meta;

    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    const TensorF& tensor(const std::string& name) const;

    void set_meta_int(const std::string& key, long long v);
    long long meta_int(const std::string& key) const;
    const std::string& meta_str(const std::string& key) const;

    void save(const std::string& path) const;
    static Archive load(const std::string& path);
};

}  // namespace lsda::nn
