#include "lsda/search/latent_search.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

#include "lsda/core/rng.hpp"
#include "lsda/data/png_io.hpp"
#include "lsda/edge/sobel.hpp"
#include "lsda/nn/optim.hpp"

namespace lsda::search {

void SearchConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("SearchConfig: iterations must be >= 1");
    if (!(step_size >= 0.0f))
        throw std::invalid_argument("SearchConfig: step_size must be >= 0");
    if (!(momentum >= 0.0f && momentum < 1.0f))
        throw std::invalid_argument("SearchConfig: momentum must be in [0, 1)");
    if (!(convergence_tol >= 0.0))
        throw std::invalid_argument("SearchConfig: convergence_tol must be >= 0");
    if (restarts < 1) throw std::invalid_argument("SearchConfig: restarts must be >= 1");
    ssim_cfg.validate();
}

VaeDecoder::VaeDecoder(vae::VaeModel& model, const TensorF& target) : model_(model) {
    const vae::VaeArch& a = model.arch();
    if (target.ndim() != 3 || target.dim(0) != a.img || target.dim(1) != a.img ||
        target.dim(2) != a.channels)
        throw std::invalid_argument("VaeDecoder: target " + target.shape_str() +
                                    " does not match the model resolution");
    edges_ = edge::sobel_edges(target);
    edges_.reshape({1, a.img, a.img, 2 * a.channels});
}

int VaeDecoder::latent_dim() const { return model_.arch().latent; }

TensorF VaeDecoder::decode(const TensorF& z) {
    TensorF zb = z;
    zb.reshape({1, latent_dim()});
    const vae::VaeArch& a = model_.arch();
    TensorF out = model_.decode(zb, edges_);
    out.reshape({a.img, a.img, a.channels});
    return out;
}

TensorF VaeDecoder::backward(const TensorF& dxhat) {
    const vae::VaeArch& a = model_.arch();
    TensorF d = dxhat;
    d.reshape({1, a.img, a.img, a.channels});
    TensorF dz = model_.decoder_backward(d, /*want_param_grads=*/false);
    dz.reshape({a.latent});
    return dz;
}

SearchResult latent_search(FrozenDecoder& dec, const TensorF& target, const SearchConfig& cfg,
                           const TensorF* init_z) {
    cfg.validate();
    const int d_z = dec.latent_dim();
    if (init_z && init_z->size() != static_cast<size_t>(d_z))
        throw std::invalid_argument("latent_search: init_z has " +
                                    std::to_string(init_z->size()) + " elements, expected " +
                                    std::to_string(d_z));

    SearchResult best;
    best.final_loss = std::numeric_limits<double>::infinity();
    bool any_finite = false;

    TensorF dxhat;  // gradient buffer, reshaped by search_loss_grad
    for (int r = 0; r < cfg.restarts; ++r) {
        TensorF z({d_z});
        if (init_z && r == 0) {
            z = *init_z;
            z.reshape({d_z});
        } else {
            Rng rng(derive_seed(cfg.init_seed, "search-restart", static_cast<uint64_t>(r)));
            for (int i = 0; i < d_z; ++i) z[i] = static_cast<float>(rng.normal());
        }

        nn::NesterovState momentum(static_cast<size_t>(d_z), cfg.step_size, cfg.momentum);
        std::vector<double> trace;
        trace.reserve(static_cast<size_t>(cfg.iterations));
        double run_best = std::numeric_limits<double>::infinity();
        TensorF run_best_z;

        for (int t = 0; t < cfg.iterations; ++t) {
            TensorF xhat = dec.decode(z);
            const double loss = ssim::search_loss_grad(target, xhat, cfg.loss, cfg.ssim_cfg, dxhat);
            if (!std::isfinite(loss)) break;  // abandon the restart, keep its finite prefix
            trace.push_back(loss);
            if (loss < run_best) {
                run_best = loss;
                run_best_z = z;
            }
            if (t + 1 >= cfg.iterations) break;  // a step after the last evaluation goes unused
            if (cfg.convergence_tol > 0.0 && trace.size() >= 2 &&
                std::abs(trace[trace.size() - 2] - loss) <= cfg.convergence_tol)
                break;
            TensorF g = dec.backward(dxhat);
            momentum.step(z.data(), g.data());
        }

        if (!trace.empty()) any_finite = true;
        if (run_best < best.final_loss) {
            best.final_loss = run_best;
            best.z = std::move(run_best_z);
            best.loss_trace = std::move(trace);
        }
    }

    if (!any_finite)
        throw std::runtime_error("latent_search: loss was non-finite in every restart");

    best.iterations_used = static_cast<int>(best.loss_trace.size());
    best.clone = dec.decode(best.z);
    return best;
}

SearchResult latent_search(vae::VaeModel& m, const TensorF& target, const SearchConfig& cfg) {
    VaeDecoder dec(m, target);
    if (cfg.init_from_encoder) {
        TensorF batch = target;
        batch.reshape({1, target.dim(0), target.dim(1), target.dim(2)});
        vae::PosteriorParams p = m.encode(batch);
        TensorF z0 = p.mu;
        z0.reshape({m.arch().latent});
        return latent_search(dec, target, cfg, &z0);
    }
    return latent_search(dec, target, cfg);
}

AdaptationSummary adapt_and_classify(vae::VaeModel& m, perceptual::SourceClassifier& clf,
                                     const data::LabeledDataset& targets,
                                     const SearchConfig& cfg) {
    cfg.validate();
    AdaptationSummary out;
    out.results.reserve(targets.size());
    size_t adapted_hits = 0, source_hits = 0, scored = 0;

    for (size_t i = 0; i < targets.size(); ++i) {
        const TensorF img = targets.image(i);
        AdaptationResult r;
        r.image_id = i;
        r.true_class = targets.labels[i];
        r.source_only_pred = clf.predict(img).first;

        SearchConfig per_image = cfg;
        per_image.init_seed = derive_seed(cfg.init_seed, "search-init", i);
        try {
            SearchResult s = latent_search(m, img, per_image);
            r.clone = std::move(s.clone);
            r.z_final = std::move(s.z);
            r.loss_trace = std::move(s.loss_trace);
            r.final_loss = s.final_loss;
            r.iterations_used = s.iterations_used;
            auto adapted = clf.predict(r.clone);
            r.adapted_pred = adapted.first;
            r.class_probabilities = std::move(adapted.second);
        } catch (const std::runtime_error& e) {
            // Numeric failure of this one search. Config and shape errors are
            // invalid_argument and propagate: they would fail every image.
            r.failed = true;
            std::fprintf(stderr, "warning: latent search failed for image %zu: %s\n", i,
                         e.what());
        }

        if (r.failed) {
            ++out.failures;
        } else {
            ++scored;
            if (r.adapted_pred == r.true_class) ++adapted_hits;
            if (r.source_only_pred == r.true_class) ++source_hits;
        }
        out.results.push_back(std::move(r));
    }

    if (scored > 0) {
        out.adapted_accuracy = static_cast<double>(adapted_hits) / static_cast<double>(scored);
        out.source_only_accuracy = static_cast<double>(source_hits) / static_cast<double>(scored);
    }
    return out;
}

void write_adaptation_report(const AdaptationSummary& s, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_adaptation_report: cannot open " + path);
    out << "image_id,true_class,source_only_pred,adapted_pred,final_loss,iterations_used\n";
    char loss[64];
    for (const AdaptationResult& r : s.results) {
        if (r.failed) {
            out << r.image_id << ',' << r.true_class << ',' << r.source_only_pred
                << ",-1,nan,0\n";
            continue;
        }
        std::snprintf(loss, sizeof loss, "%.9g", r.final_loss);
        out << r.image_id << ',' << r.true_class << ',' << r.source_only_pred << ','
            << r.adapted_pred << ',' << loss << ',' << r.iterations_used << '\n';
    }
    if (!out) throw std::runtime_error("write_adaptation_report: write failed for " + path);
}

void dump_clones(const AdaptationSummary& s, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (const AdaptationResult& r : s.results) {
        if (r.failed) continue;
        std::snprintf(name, sizeof name, "clone_%04zu.png", r.image_id);
        data::write_png((std::filesystem::path(dir) / name).string(), r.clone);
    }
}

}  // namespace lsda::search
