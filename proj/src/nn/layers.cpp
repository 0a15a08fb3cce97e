#include "lsda/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "lsda/kernels/dense.hpp"
#include "lsda/kernels/elementwise.hpp"

namespace lsda::nn {

namespace {

// He-style init with the LeakyReLU(0.2) gain; biases start at zero.
void init_normal(Param& w, Param& b, Rng& rng, int fan_in) {
    const float gain = std::sqrt(2.0f / (1.0f + 0.2f * 0.2f));
    const float std = gain / std::sqrt(static_cast<float>(fan_in));
    for (size_t i = 0; i < w.value.size(); ++i)
        w.value[i] = static_cast<float>(rng.normal(0.0, std));
    b.value.fill(0.0f);
}

}  // namespace

Conv2d::Conv2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad)
    : w(name + ".w", {kernel, kernel, in_c, out_c}),
      b(name + ".b", {out_c}),
      in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {}

void Conv2d::init(Rng& rng) { init_normal(w, b, rng, kernel_ * kernel_ * in_c_); }

TensorF Conv2d::forward(const TensorF& x) {
    if (x.ndim() != 4 || x.dim(3) != in_c_)
        throw std::invalid_argument("Conv2d " + w.name + ": bad input shape " + x.shape_str());
    geom_.batch = x.dim(0);
    geom_.in_h = x.dim(1);
    geom_.in_w = x.dim(2);
    geom_.in_c = in_c_;
    geom_.out_c = out_c_;
    geom_.kernel = kernel_;
    geom_.stride = stride_;
    geom_.pad = pad_;
    x_ = x;
    TensorF y({geom_.batch, geom_.out_h(), geom_.out_w(), out_c_});
    kernels::conv2d_forward(x.data(), w.value.data(), b.value.data(), y.data(), geom_);
    return y;
}

TensorF Conv2d::backward(const TensorF& dy, bool want_param_grads) {
    TensorF dx({geom_.batch, geom_.in_h, geom_.in_w, in_c_});
    kernels::conv2d_backward_input(dy.data(), w.value.data(), dx.data(), geom_);
    if (want_param_grads)
        kernels::conv2d_backward_params(x_.data(), dy.data(), w.grad.data(), b.grad.data(), geom_);
    return dx;
}

ConvT2d::ConvT2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad)
    : w(name + ".w", {kernel, kernel, out_c, in_c}),
      b(name + ".b", {out_c}),
      in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {}

void ConvT2d::init(Rng& rng) {
    // Effective fan-in of the transposed map: each output pixel receives
    // roughly kernel^2 / stride^2 taps from in_c channels.
    const int fan = std::max(1, kernel_ * kernel_ * in_c_ / (stride_ * stride_));
    init_normal(w, b, rng, fan);
}

TensorF ConvT2d::forward(const TensorF& x) {
    if (x.ndim() != 4 || x.dim(3) != in_c_)
        throw std::invalid_argument("ConvT2d " + w.name + ": bad input shape " + x.shape_str());
    // geom_ describes the adjoint convolution big -> small: its "input" is
    // this layer's output and its "output" is this layer's input.
    geom_.batch = x.dim(0);
    geom_.in_h = x.dim(1) * stride_;
    geom_.in_w = x.dim(2) * stride_;
    geom_.in_c = out_c_;
    geom_.out_c = in_c_;
    geom_.kernel = kernel_;
    geom_.stride = stride_;
    geom_.pad = pad_;
    if (geom_.out_h() != x.dim(1) || geom_.out_w() != x.dim(2))
        throw std::invalid_argument("ConvT2d " + w.name + ": geometry not invertible for " +
                                    x.shape_str());
    x_ = x;
    TensorF y({geom_.batch, geom_.in_h, geom_.in_w, out_c_});
    kernels::conv2d_backward_input(x.data(), w.value.data(), y.data(), geom_);
    const int64_t pixels = static_cast<int64_t>(y.size()) / out_c_;
    for (int64_t p = 0; p < pixels; ++p)
        for (int c = 0; c < out_c_; ++c) y[p * out_c_ + c] += b.value[c];
    return y;
}

TensorF ConvT2d::backward(const TensorF& dy, bool want_param_grads) {
    TensorF dx({geom_.batch, x_.dim(1), x_.dim(2), in_c_});
    kernels::conv2d_forward(dy.data(), w.value.data(), static_cast<const float*>(nullptr),
                            dx.data(), geom_);
    if (want_param_grads) {
        // <dy, adjoint(x, w)> = <conv(dy, w), x>: the weight gradient is the
        // usual conv weight gradient with activation and gradient roles swapped.
        kernels::conv2d_backward_params(dy.data(), x_.data(), w.grad.data(),
                                        static_cast<float*>(nullptr), geom_);
        const int64_t pixels = static_cast<int64_t>(dy.size()) / out_c_;
        for (int c = 0; c < out_c_; ++c) b.grad[c] = 0.0f;
        for (int64_t p = 0; p < pixels; ++p)
            for (int c = 0; c < out_c_; ++c) b.grad[c] += dy[p * out_c_ + c];
    }
    return dx;
}

Dense::Dense(const std::string& name, int in_n, int out_n)
    : w(name + ".w", {out_n, in_n}), b(name + ".b", {out_n}), in_n_(in_n), out_n_(out_n) {}

void Dense::init(Rng& rng) { init_normal(w, b, rng, in_n_); }

TensorF Dense::forward(const TensorF& x) {
    if (x.ndim() != 2 || x.dim(1) != in_n_)
        throw std::invalid_argument("Dense " + w.name + ": bad input shape " + x.shape_str());
    x_ = x;
    TensorF y({x.dim(0), out_n_});
    kernels::dense_forward(x.data(), w.value.data(), b.value.data(), y.data(), x.dim(0), in_n_,
                           out_n_);
    return y;
}

TensorF Dense::backward(const TensorF& dy, bool want_param_grads) {
    const int batch = x_.dim(0);
    TensorF dx({batch, in_n_});
    kernels::dense_backward_input(dy.data(), w.value.data(), dx.data(), batch, in_n_, out_n_);
    if (want_param_grads)
        kernels::dense_backward_params(x_.data(), dy.data(), w.grad.data(), b.grad.data(), batch,
                                       in_n_, out_n_);
    return dx;
}

TensorF LeakyRelu::forward(const TensorF& x) {
    x_ = x;
    TensorF y(x.shape());
    kernels::leaky_relu_forward(x.data(), y.data(), static_cast<int64_t>(x.size()), alpha_);
    return y;
}

TensorF LeakyRelu::backward(const TensorF& dy) {
    TensorF dx(x_.shape());
    kernels::leaky_relu_backward(x_.data(), dy.data(), dx.data(), static_cast<int64_t>(dx.size()),
                                 alpha_);
    return dx;
}

TensorF Tanh::forward(const TensorF& x) {
    TensorF y(x.shape());
    kernels::tanh_forward(x.data(), y.data(), static_cast<int64_t>(x.size()));
    y_ = y;
    return y;
}

TensorF Tanh::backward(const TensorF& dy) {
    TensorF dx(y_.shape());
    kernels::tanh_backward(y_.data(), dy.data(), dx.data(), static_cast<int64_t>(dx.size()));
    return dx;
}

}  // namespace lsda::nn
