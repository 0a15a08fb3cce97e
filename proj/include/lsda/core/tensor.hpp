#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsda {

// Dense row-major tensor. Images are (H, W, C), batches (B, H, W, C),
// conv weights (K, K, Cin, Cout).
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), T(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }

    int dim(int i) const {
        assert(i >= 0 && i < ndim());
        return shape_[static_cast<size_t>(i)];
    }

    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](size_t i) {
        assert(i < data_.size());
        return data_[i];
    }
    const T& operator[](size_t i) const {
        assert(i < data_.size());
        return data_[i];
    }

    // flat views as std::vector
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& at(int i) { return data_[check_index(static_cast<size_t>(i))]; }
    const T& at(int i) const { return data_[check_index(static_cast<size_t>(i))]; }

    T& at(int i, int j) {
        assert(ndim() == 2);
        return data_[check_index(static_cast<size_t>(i) * shape_[1] + j)];
    }
    const T& at(int i, int j) const {
        assert(ndim() == 2);
        return data_[check_index(static_cast<size_t>(i) * shape_[1] + j)];
    }

    T& at(int i, int j, int k) {
        assert(ndim() == 3);
        return data_[check_index((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k)];
    }
    const T& at(int i, int j, int k) const {
        assert(ndim() == 3);
        return data_[check_index((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k)];
    }

    T& at(int i, int j, int k, int l) {
        assert(ndim() == 4);
        return data_[check_index(((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }
    const T& at(int i, int j, int k, int l) const {
        assert(ndim() == 4);
        return data_[check_index(((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    void reshape(std::vector<int> shape) {
        if (count(shape) != data_.size())
            throw std::invalid_argument("Tensor::reshape: element count mismatch");
        shape_ = std::move(shape);
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (int i = 0; i < ndim(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[static_cast<size_t>(i)]);
        }
        return s + ")";
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static size_t count(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
            n *= static_cast<size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    size_t check_index(size_t i) const {
        assert(i < data_.size());
        return i;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace lsda
