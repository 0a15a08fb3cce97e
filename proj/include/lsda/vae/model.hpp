#pragma once

#include <map>
#include <string>
#include <vector>

#include "lsda/core/tensor.hpp"
#include "lsda/nn/layers.hpp"

namespace lsda::vae {

// Scale descriptor for the edge-conditioned VAE. The reference configuration
// (paper_preset) works at 128 px with width-128 conv trunks and a 1024-wide
// bottleneck; desk runs shrink width and resolution, keeping the topology:
// one stride-1 conv plus log2(img/4) stride-2 convs down to 4x4, mirrored
// transposed convs back up, tanh image output, edge concat, three refine
// convs, tanh again.
struct VaeArch {
    int img = 32;
    int channels = 3;
    int latent = 64;
    int trunk = 24;
    int refine = 16;
    int fc = 256;

    int levels() const;  // number of stride-2 stages: log2(img / 4)
    void validate() const;
    static VaeArch paper_preset();
};

// Per-batch posterior parameters, (B, d_z) each. sigma = exp(log_sigma) with
// log_sigma clamped to [-6, 6], so sigma is always strictly positive.
struct PosteriorParams {
    TensorF mu;
    TensorF log_sigma;
    TensorF sigma() const;
};

// z = mu + sigma * eps with eps ~ N(0, I) from the seeded stream.
TensorF reparameterize(const PosteriorParams& p, uint64_t noise_seed);

class VaeModel {
  public:
    VaeModel(const VaeArch& arch, uint64_t seed);

    const VaeArch& arch() const { return arch_; }

    // (B, H, W, C) -> posterior. Caches activations for encoder_backward.
    PosteriorParams encode(const TensorF& x);

    // (B, d_z) plus edge maps (B, H, W, 2C) -> (B, H, W, C) in [-1, 1].
    // Caches activations for decoder_backward.
    TensorF decode(const TensorF& z, const TensorF& edges);

    // Backward through the encoder from posterior-space gradients; fills
    // encoder parameter gradients. Layers are invoked once per step.
    void encoder_backward(const TensorF& dmu, const TensorF& dlog_sigma);

    // Backward through the decoder from image-space gradients; returns dz.
    // With want_param_grads=false the decoder stays frozen (latent search).
    TensorF decoder_backward(const TensorF& dxhat, bool want_param_grads = true);

    std::vector<nn::Param*> encoder_params();
    std::vector<nn::Param*> decoder_params();
    std::vector<nn::Param*> params();

    void save(const std::string& path,
              const std::map<std::string, std::string>& extra_meta = {});
    static VaeModel load(const std::string& path,
                         std::map<std::string, std::string>* extra_meta = nullptr);

  private:
    VaeArch arch_;

    std::vector<nn::Conv2d> enc_convs_;
    std::vector<nn::LeakyRelu> enc_acts_;
    nn::Dense enc_fc_;
    nn::LeakyRelu enc_fc_act_;
    nn::Dense head_mu_;
    nn::Dense head_ls_;
    TensorF ls_pass_;  // 1 where the log-sigma clamp is inactive

    nn::Dense dec_fc1_, dec_fc2_;
    nn::LeakyRelu dec_act1_, dec_act2_;
    std::vector<nn::ConvT2d> dec_deconvs_;
    std::vector<nn::LeakyRelu> dec_acts_;
    nn::Tanh dec_tanh_;
    std::vector<nn::Conv2d> ref_convs_;
    nn::LeakyRelu ref_act1_, ref_act2_;
    nn::Tanh ref_tanh_;
};

}  // namespace lsda::vae
