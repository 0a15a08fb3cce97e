#include "lsda/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace lsda::nn {

namespace {

constexpr uint32_t kMagic = 0x4c534152;  // "LSAR"
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is, const std::string& path) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw std::runtime_error("checkpoint truncated: " + path);
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is, const std::string& path) {
    const uint32_t n = read_u32(is, path);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint corrupt (string length): " + path);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw std::runtime_error("checkpoint truncated: " + path);
    return s;
}

}  // namespace

const TensorF& Archive::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint missing tensor: " + name);
    return it->second;
}

void Archive::set_meta_int(const std::string& key, long long v) { meta[key] = std::to_string(v); }

long long Archive::meta_int(const std::string& key) const { return std::stoll(meta_str(key)); }

const std::string& Archive::meta_str(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("checkpoint missing metadata: " + key);
    return it->second;
}

void Archive::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    write_u32(os, kMagic);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_str(os, name);
        write_u32(os, static_cast<uint32_t>(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d) write_u32(os, static_cast<uint32_t>(t.dim(d)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    write_u32(os, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        write_str(os, k);
        write_str(os, v);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    if (read_u32(is, path) != kMagic) throw std::runtime_error("not a checkpoint file: " + path);
    if (read_u32(is, path) != kVersion)
        throw std::runtime_error("unsupported checkpoint version: " + path);
    Archive a;
    const uint32_t n_tensors = read_u32(is, path);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = read_str(is, path);
        const uint32_t ndim = read_u32(is, path);
        if (ndim == 0 || ndim > 8)
            throw std::runtime_error("checkpoint corrupt (rank of " + name + "): " + path);
        std::vector<int> shape(ndim);
        size_t count = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            const uint32_t dim = read_u32(is, path);
            if (dim == 0 || dim > (1u << 24))
                throw std::runtime_error("checkpoint corrupt (dim of " + name + "): " + path);
            shape[d] = static_cast<int>(dim);
            count *= dim;
        }
        TensorF t(shape);
        if (!is.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(count * sizeof(float))))
            throw std::runtime_error("checkpoint truncated (data of " + name + "): " + path);
        a.tensors.emplace(name, std::move(t));
    }
    const uint32_t n_meta = read_u32(is, path);
    for (uint32_t i = 0; i < n_meta; ++i) {
        std::string k = read_str(is, path);
        a.meta.emplace(std::move(k), read_str(is, path));
    }
    return a;
}

}  // namespace lsda::nn
