#pragma once

#include <cstdint>
#include <string>

#include "lsda/data/dataset.hpp"
#include "lsda/perceptual/classifier.hpp"
#include "lsda/vae/model.hpp"

namespace lsda::vae {

// Loss terms summed over the batch. The encoder minimizes all three; the
// decoder never sees the KL term, so total_encoder - total_decoder = kl.
struct VaeLossBreakdown {
    double l_r = 0;
    double l_p = 0;
    double kl = 0;
    double total_encoder = 0;
    double total_decoder = 0;
};

// Sum over batch and dimensions of (mu^2 + sigma^2 - 1 - 2 log sigma) / 2,
// the closed form of D_KL[N(mu, sigma^2) || N(0, 1)].
double kl_divergence(const TensorF& mu, const TensorF& log_sigma);

double sum_sq_diff(const TensorF& a, const TensorF& b);

// One evaluation of the training objective on a batch: encode, sample with
// the seeded noise stream, decode against each image's own edge map, score.
// A null classifier drops the perceptual term. Throws on non-finite terms.
VaeLossBreakdown vae_losses(VaeModel& m, const TensorF& batch,
                            perceptual::SourceClassifier* clf, uint64_t noise_seed);

// Same evaluation but also fills parameter gradients: theta from l_r + l_p,
// phi from l_r + l_p + kl. Training and the finite-difference checks share
// this path. use_edges=false feeds all-zero edge maps.
VaeLossBreakdown vae_losses_grad(VaeModel& m, const TensorF& batch,
                                 perceptual::SourceClassifier* clf, double perceptual_weight,
                                 bool use_edges, uint64_t noise_seed);

struct TrainVaeConfig {
    int epochs = 100;
    int batch_size = 64;
    float lr = 1e-4f;
    uint64_t seed = 0;
    double perceptual_weight = 1.0;  // 0 trains without the perceptual term
    bool use_edges = true;           // false feeds all-zero edge maps
    std::string log_path;            // per-epoch CSV epoch,l_r,l_p,kl
};

// Phase-1 training: RMSprop, encoder driven by l_r + l_p + kl, decoder by
// l_r + l_p. Labels are never read. Zero epochs returns the initialized
// model unchanged. Divergence aborts, reporting the last finite breakdown.
VaeModel train_vae(const data::LabeledDataset& source_train,
                   perceptual::SourceClassifier* clf, const VaeArch& arch,
                   const TrainVaeConfig& cfg);

}  // namespace lsda::vae
