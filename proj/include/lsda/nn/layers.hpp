#pragma once

#include <string>
#include <vector>

#include "lsda/core/rng.hpp"
#include "lsda/core/tensor.hpp"
#include "lsda/kernels/conv.hpp"

namespace lsda::nn {

// Trainable tensor plus its gradient. Layer backward passes OVERWRITE the
// gradient, so a layer must be invoked at most once per optimizer step;
// gradient fan-in has to be summed at the activation level before backward.
struct Param {
    std::string name;
    TensorF value;
    TensorF grad;

    Param(std::string n, const std::vector<int>& shape)
        : name(std::move(n)), value(TensorF::zeros(shape)), grad(TensorF::zeros(shape)) {}
    void zero_grad() { grad.fill(0.0f); }
};

// 2-D convolution over (B, H, W, C) activations; weights (K, K, Cin, Cout).
class Conv2d {
  public:
    Conv2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad);

    void init(Rng& rng);
    TensorF forward(const TensorF& x);
    // Returns dx. Param gradients are skipped when the layer is frozen
    // (latent search backpropagates through the decoder without touching θ).
    TensorF backward(const TensorF& dy, bool want_param_grads = true);
    std::vector<Param*> params() { return {&w, &b}; }

    Param w, b;

  private:
    int in_c_, out_c_, kernel_, stride_, pad_;
    kernels::ConvGeom geom_;
    TensorF x_;
};

// Transposed convolution: forward is the adjoint of a (kernel, stride, pad)
// convolution, so a stride-2 layer exactly doubles the spatial size that the
// matching convolution would halve. Weights stay in convolution layout
// (K, K, C_big, C_small) = (K, K, out_c, in_c).
class ConvT2d {
  public:
    ConvT2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad);

    void init(Rng& rng);
    TensorF forward(const TensorF& x);
    TensorF backward(const TensorF& dy, bool want_param_grads = true);
    std::vector<Param*> params() { return {&w, &b}; }

    Param w, b;

  private:
    int in_c_, out_c_, kernel_, stride_, pad_;
    kernels::ConvGeom geom_;
    TensorF x_;
};

class Dense {
  public:
    Dense(const std::string& name, int in_n, int out_n);

    void init(Rng& rng);
    TensorF forward(const TensorF& x);  // (B, in_n) -> (B, out_n)
    TensorF backward(const TensorF& dy, bool want_param_grads = true);
    std::vector<Param*> params() { return {&w, &b}; }

    Param w, b;
    int in_n() const { return in_n_; }
    int out_n() const { return out_n_; }

  private:
    int in_n_, out_n_;
    TensorF x_;
};

class LeakyRelu {
  public:
    explicit LeakyRelu(float alpha = 0.2f) : alpha_(alpha) {}
    TensorF forward(const TensorF& x);
    TensorF backward(const TensorF& dy);

  private:
    float alpha_;
    TensorF x_;
};

class Tanh {
  public:
    TensorF forward(const TensorF& x);
    TensorF backward(const TensorF& dy);

  private:
    TensorF y_;
};

}  // namespace lsda::nn
