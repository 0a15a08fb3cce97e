#pragma once

#include <cmath>
#include <vector>

#include "lsda/nn/layers.hpp"

namespace lsda::nn {

// RMSprop: s <- rho*s + (1-rho)*g^2, p <- p - lr * g / (sqrt(s) + eps).
class RmsProp {
  public:
    RmsProp(std::vector<Param*> params, float lr, float rho = 0.9f, float eps = 1e-8f)
        : params_(std::move(params)), lr_(lr), rho_(rho), eps_(eps) {
        for (const Param* p : params_) state_.emplace_back(p->value.size(), 0.0f);
    }

    void step() {
        for (size_t k = 0; k < params_.size(); ++k) {
            Param& p = *params_[k];
            std::vector<float>& s = state_[k];
            for (size_t i = 0; i < s.size(); ++i) {
                const float g = p.grad[i];
                s[i] = rho_ * s[i] + (1.0f - rho_) * g * g;
                p.value[i] -= lr_ * g / (std::sqrt(s[i]) + eps_);
            }
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

    void set_lr(float lr) { lr_ = lr; }
    float lr() const { return lr_; }

  private:
    std::vector<Param*> params_;
    std::vector<std::vector<float>> state_;
    float lr_, rho_, eps_;
};

// Nesterov momentum on a flat vector, in the common deep-learning form:
// buf <- mu*buf + g, x <- x - lr*(g + mu*buf). Used by the latent search
// where the variable is the z batch, not a network parameter.
class NesterovState {
  public:
    NesterovState(size_t n, float lr, float momentum)
        : buf_(n, 0.0f), lr_(lr), mu_(momentum) {}

    void step(float* x, const float* g) {
        for (size_t i = 0; i < buf_.size(); ++i) {
            buf_[i] = mu_ * buf_[i] + g[i];
            x[i] -= lr_ * (g[i] + mu_ * buf_[i]);
        }
    }

    void reset() { std::fill(buf_.begin(), buf_.end(), 0.0f); }

  private:
    std::vector<float> buf_;
    float lr_, mu_;
};

}  // namespace lsda::nn
