#include "lsda/vae/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lsda/edge/sobel.hpp"
#include "lsda/nn/optim.hpp"

namespace lsda::vae {

double kl_divergence(const TensorF& mu, const TensorF& log_sigma) {
    double kl = 0;
    for (size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i], ls = log_sigma[i];
        const double s2 = std::exp(2.0 * ls);
        kl += 0.5 * (m * m + s2 - 1.0 - 2.0 * ls);
    }
    return kl;
}

double sum_sq_diff(const TensorF& a, const TensorF& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

namespace {

void check_finite(const VaeLossBreakdown& b) {
    const char* bad = nullptr;
    if (!std::isfinite(b.l_r)) bad = "l_r";
    else if (!std::isfinite(b.l_p)) bad = "l_p";
    else if (!std::isfinite(b.kl)) bad = "kl";
    if (bad) {
        std::ostringstream msg;
        msg << "vae loss non-finite in term " << bad << " (l_r=" << b.l_r << " l_p=" << b.l_p
            << " kl=" << b.kl << ")";
        throw std::runtime_error(msg.str());
    }
}

// Shared forward (and optional backward) pass for one batch. Gradients land
// in the model's parameters: theta from l_r + l_p, phi from l_r + l_p + kl.
VaeLossBreakdown step(VaeModel& m, const TensorF& x, const TensorF& edges,
                      perceptual::SourceClassifier* clf, double w_p, uint64_t noise_seed,
                      bool want_grads) {
    PosteriorParams post = m.encode(x);
    const TensorF sigma = post.sigma();

    Rng rng(noise_seed);
    TensorF eps(post.mu.shape());
    for (size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<float>(rng.normal(0.0, 1.0));
    TensorF z(post.mu.shape());
    for (size_t i = 0; i < z.size(); ++i) z[i] = post.mu[i] + sigma[i] * eps[i];

    TensorF xhat = m.decode(z, edges);

    VaeLossBreakdown b;
    b.l_r = sum_sq_diff(x, xhat);
    b.kl = kl_divergence(post.mu, post.log_sigma);

    TensorF dxhat(xhat.shape());
    for (size_t i = 0; i < dxhat.size(); ++i) dxhat[i] = 2.0f * (xhat[i] - x[i]);

    if (clf && w_p > 0) {
        const TensorF fx = clf->features(x);
        TensorF fxh = clf->features(xhat);  // classifier caches now hold xhat
        double lp = 0;
        TensorF dfeat(fxh.shape());
        for (size_t i = 0; i < fxh.size(); ++i) {
            const double d = static_cast<double>(fxh[i]) - fx[i];
            lp += d * d;
            dfeat[i] = static_cast<float>(2.0 * w_p * d);
        }
        b.l_p = w_p * lp;
        if (want_grads) {
            const TensorF dxp = clf->features_backward(dfeat);
            for (size_t i = 0; i < dxhat.size(); ++i) dxhat[i] += dxp[i];
        }
    }

    b.total_decoder = b.l_r + b.l_p;
    b.total_encoder = b.total_decoder + b.kl;
    check_finite(b);
    if (!want_grads) return b;

    const TensorF dz = m.decoder_backward(dxhat, /*want_param_grads=*/true);
    TensorF dmu(dz.shape()), dls(dz.shape());
    for (size_t i = 0; i < dz.size(); ++i) {
        dmu[i] = dz[i] + post.mu[i];
        dls[i] = dz[i] * eps[i] * sigma[i] + (sigma[i] * sigma[i] - 1.0f);
    }
    m.encoder_backward(dmu, dls);
    return b;
}

}  // namespace

VaeLossBreakdown vae_losses(VaeModel& m, const TensorF& batch,
                            perceptual::SourceClassifier* clf, uint64_t noise_seed) {
    if (batch.ndim() != 4 || batch.dim(0) < 1)
        throw std::invalid_argument("vae_losses: batch must be non-empty (B, H, W, C)");
    const TensorF edges = edge::sobel_edges_batch(batch);
    return step(m, batch, edges, clf, 1.0, noise_seed, /*want_grads=*/false);
}

VaeLossBreakdown vae_losses_grad(VaeModel& m, const TensorF& batch,
                                 perceptual::SourceClassifier* clf, double perceptual_weight,
                                 bool use_edges, uint64_t noise_seed) {
    if (batch.ndim() != 4 || batch.dim(0) < 1)
        throw std::invalid_argument("vae_losses_grad: batch must be non-empty (B, H, W, C)");
    const TensorF edges = use_edges
                              ? edge::sobel_edges_batch(batch)
                              : TensorF({batch.dim(0), batch.dim(1), batch.dim(2),
                                         2 * batch.dim(3)});
    return step(m, batch, edges, perceptual_weight > 0 ? clf : nullptr, perceptual_weight,
                noise_seed, /*want_grads=*/true);
}

VaeModel train_vae(const data::LabeledDataset& source_train,
                   perceptual::SourceClassifier* clf, const VaeArch& arch,
                   const TrainVaeConfig& cfg) {
    VaeModel m(arch, derive_seed(cfg.seed, "vae-init", 0));
    if (cfg.epochs == 0) return m;
    if (source_train.size() == 0) throw std::invalid_argument("train_vae: empty dataset");

    nn::RmsProp opt(m.params(), cfg.lr);
    perceptual::SourceClassifier* fitness = cfg.perceptual_weight > 0 ? clf : nullptr;

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        log << "epoch,l_r,l_p,kl\n";
    }

    std::vector<size_t> order(source_train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    VaeLossBreakdown last_ok;
    uint64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "vae-epoch", static_cast<uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());

        double er = 0, ep = 0, ek = 0;
        size_t batches = 0;
        for (size_t o = 0; o < order.size(); o += cfg.batch_size) {
            const size_t hi = std::min(order.size(), o + cfg.batch_size);
            TensorF x = data::gather_batch(source_train, order, o, hi);

            VaeLossBreakdown b;
            try {
                b = vae_losses_grad(m, x, fitness, cfg.perceptual_weight, cfg.use_edges,
                                    derive_seed(cfg.seed, "vae-noise", global_step));
            } catch (const std::runtime_error& e) {
                std::ostringstream msg;
                msg << e.what() << "; last finite breakdown: l_r=" << last_ok.l_r
                    << " l_p=" << last_ok.l_p << " kl=" << last_ok.kl << " at step "
                    << global_step;
                throw std::runtime_error(msg.str());
            }
            opt.step();
            last_ok = b;
            ++global_step;

            er += b.l_r;
            ep += b.l_p;
            ek += b.kl;
            ++batches;
        }
        if (log.is_open())
            log << epoch << ',' << er / batches << ',' << ep / batches << ',' << ek / batches
                << '\n';
    }
    return m;
}

}  // namespace lsda::vae
