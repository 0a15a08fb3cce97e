#include "lsda/metrics/domain_metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "lsda/core/parallel.hpp"
#include "lsda/core/rng.hpp"

namespace lsda::metrics {

int FeatureSet::dim() const {
    return vectors.empty() ? 0 : static_cast<int>(vectors.front().size());
}

void FeatureSet::validate() const {
    if (vectors.empty()) throw std::invalid_argument("FeatureSet: empty");
    const size_t d = vectors.front().size();
    if (d == 0) throw std::invalid_argument("FeatureSet: zero-dimensional vectors");
    for (const auto& v : vectors)
        if (v.size() != d) throw std::invalid_argument("FeatureSet: ragged dimensions");
}

namespace {

// Hinge + L2 linear classifier by full-batch gradient descent on features
// standardized with the training folds' statistics. Zero initialization keeps
// the learner deterministic; on label-symmetric data the weights stay at
// exactly zero and every tie predicts the second set.
struct LinearProbe {
    std::vector<double> w;
    double b = 0.0;
    std::vector<double> mean, inv_sd;

    void fit(const std::vector<const float*>& xs, const std::vector<int>& ys, int d) {
        const double lambda = 1e-3, lr = 0.5;
        const int iters = 400;
        const size_t m = xs.size();

        mean.assign(d, 0.0);
        inv_sd.assign(d, 0.0);
        for (const float* x : xs)
            for (int j = 0; j < d; ++j) mean[j] += x[j];
        for (int j = 0; j < d; ++j) mean[j] /= static_cast<double>(m);
        for (const float* x : xs)
            for (int j = 0; j < d; ++j) {
                const double c = x[j] - mean[j];
                inv_sd[j] += c * c;
            }
        for (int j = 0; j < d; ++j)
            inv_sd[j] = 1.0 / std::max(std::sqrt(inv_sd[j] / static_cast<double>(m)), 1e-6);

        w.assign(d, 0.0);
        b = 0.0;
        std::vector<double> gw(d);
        for (int it = 0; it < iters; ++it) {
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (size_t i = 0; i < m; ++i) {
                const float* x = xs[i];
                const double y = ys[i];
                double s = b;
                for (int j = 0; j < d; ++j) s += w[j] * (x[j] - mean[j]) * inv_sd[j];
                if (y * s < 1.0) {
                    for (int j = 0; j < d; ++j) gw[j] -= y * (x[j] - mean[j]) * inv_sd[j];
                    gb -= y;
                }
            }
            const double inv_m = 1.0 / static_cast<double>(m);
            for (int j = 0; j < d; ++j) w[j] = w[j] - lr * (gw[j] * inv_m + 2.0 * lambda * w[j]);
            b -= lr * gb * inv_m;
        }
    }

    int predict(const float* x, int d) const {
        double s = b;
        for (int j = 0; j < d; ++j) s += w[j] * (x[j] - mean[j]) * inv_sd[j];
        return s > 0.0 ? +1 : -1;
    }
};

}  // namespace

double a_distance(const FeatureSet& a, const FeatureSet& b, int folds) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim())
        throw std::invalid_argument("a_distance: dimension mismatch " +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    if (folds < 2) throw std::invalid_argument("a_distance: folds must be >= 2");
    if (a.vectors.size() < 2 * static_cast<size_t>(folds) ||
        b.vectors.size() < 2 * static_cast<size_t>(folds))
        throw std::invalid_argument("a_distance: each set needs at least 2*folds samples");

    const int d = a.dim();
    struct Item {
        const float* x;
        int y;
        int fold;
    };
    std::vector<Item> items;
    items.reserve(a.vectors.size() + b.vectors.size());
    for (size_t i = 0; i < a.vectors.size(); ++i)
        items.push_back({a.vectors[i].data(), +1, static_cast<int>(i % folds)});
    for (size_t i = 0; i < b.vectors.size(); ++i)
        items.push_back({b.vectors[i].data(), -1, static_cast<int>(i % folds)});

    size_t errors = 0, total = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<const float*> xs;
        std::vector<int> ys;
        for (const Item& it : items)
            if (it.fold != f) {
                xs.push_back(it.x);
                ys.push_back(it.y);
            }
        LinearProbe probe;
        probe.fit(xs, ys, d);
        for (const Item& it : items)
            if (it.fold == f) {
                ++total;
                if (probe.predict(it.x, d) != it.y) ++errors;
            }
    }

    double eps = static_cast<double>(errors) / static_cast<double>(total);
    eps = std::clamp(eps, 0.0, 0.5);
    return 2.0 * (1.0 - 2.0 * eps);
}

namespace {

Eigen::VectorXd set_mean(const FeatureSet& s) {
    const int d = s.dim();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto& v : s.vectors)
        for (int j = 0; j < d; ++j) mu[j] += v[j];
    return mu / static_cast<double>(s.vectors.size());
}

Eigen::MatrixXd set_cov(const FeatureSet& s, const Eigen::VectorXd& mu) {
    const int d = s.dim();
    const size_t n = s.vectors.size();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x(d);
    for (const auto& v : s.vectors) {
        for (int j = 0; j < d; ++j) x[j] = v[j] - mu[j];
        c.noalias() += x * x.transpose();
    }
    return c / static_cast<double>(n - 1);
}

// Symmetric PSD square root; negative eigenvalues from numerics clip to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("frechet_feature_distance: eigendecomposition failed");
    Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_feature_distance(const FeatureSet& a, const FeatureSet& b) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim())
        throw std::invalid_argument("frechet_feature_distance: dimension mismatch");
    const size_t need = static_cast<size_t>(a.dim()) + 1;
    if (a.vectors.size() < need || b.vectors.size() < need)
        throw std::invalid_argument(
            "frechet_feature_distance: each set needs at least dim + 1 samples");

    const Eigen::VectorXd mu_a = set_mean(a), mu_b = set_mean(b);
    const Eigen::MatrixXd ca = set_cov(a, mu_a), cb = set_cov(b, mu_b);

    // tr((Ca Cb)^{1/2}) through the congruent symmetric form
    // sqrt(Ca) Cb sqrt(Ca), which shares its eigenvalues.
    const Eigen::MatrixXd ra = psd_sqrt(ca);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        0.5 * (ra * cb * ra + (ra * cb * ra).transpose()));
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("frechet_feature_distance: eigendecomposition failed");
    const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double d2 = (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    return std::max(d2, 0.0);  // tiny negatives are numerical noise
}

FeatureSet encode_features(vae::VaeModel& m, const data::LabeledDataset& ds,
                           const std::string& tag) {
    if (ds.size() == 0) throw std::invalid_argument("encode_features: empty dataset");
    FeatureSet out;
    out.domain_tag = tag;
    out.vectors.reserve(ds.size());
    const int d = m.arch().latent;
    std::vector<size_t> order(ds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const size_t chunk = 64;
    for (size_t at = 0; at < ds.size(); at += chunk) {
        const size_t end = std::min(at + chunk, ds.size());
        vae::PosteriorParams p = m.encode(data::gather_batch(ds, order, at, end));
        for (size_t i = 0; i < end - at; ++i) {
            std::vector<float> v(static_cast<size_t>(d));
            for (int j = 0; j < d; ++j) v[static_cast<size_t>(j)] = p.mu.at(static_cast<int>(i), j);
            out.vectors.push_back(std::move(v));
        }
    }
    return out;
}

FeatureSet search_features(vae::VaeModel& m, const data::LabeledDataset& ds,
                           const search::SearchConfig& cfg, const std::string& tag) {
    if (ds.size() == 0) throw std::invalid_argument("search_features: empty dataset");
    FeatureSet out;
    out.domain_tag = tag;
    out.vectors.reserve(ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
        search::SearchConfig per_image = cfg;
        per_image.init_seed = derive_seed(cfg.init_seed, "search-init", i);
        search::SearchResult r = search::latent_search(m, ds.image(i), per_image);
        out.vectors.emplace_back(r.z.vec());
    }
    return out;
}

FeatureSet classifier_features(perceptual::SourceClassifier& clf, const data::LabeledDataset& ds,
                               const std::string& tag) {
    if (ds.size() == 0) throw std::invalid_argument("classifier_features: empty dataset");
    FeatureSet out;
    out.domain_tag = tag;
    out.vectors.reserve(ds.size());
    const auto [fh, fw, fc] = clf.feature_shape();
    std::vector<size_t> order(ds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const size_t chunk = 64;
    for (size_t at = 0; at < ds.size(); at += chunk) {
        const size_t end = std::min(at + chunk, ds.size());
        TensorF f = clf.features(data::gather_batch(ds, order, at, end));
        for (size_t i = 0; i < end - at; ++i) {
            std::vector<float> v(static_cast<size_t>(fc), 0.0f);
            const float* row = f.data() + i * clf.feature_dim();
            for (int p = 0; p < fh * fw; ++p)
                for (int c = 0; c < fc; ++c) v[static_cast<size_t>(c)] += row[p * fc + c];
            const float inv = 1.0f / static_cast<float>(fh * fw);
            for (float& x : v) x *= inv;
            out.vectors.push_back(std::move(v));
        }
    }
    return out;
}

EmbedMode parse_embed_mode(const std::string& s) {
    if (s == "encode") return EmbedMode::encode;
    if (s == "search") return EmbedMode::search;
    throw std::invalid_argument("embed mode must be encode or search, got \"" + s + "\"");
}

void export_embeddings(vae::VaeModel& m, const data::LabeledDataset& ds, EmbedMode mode,
                       const search::SearchConfig& cfg, const std::string& path) {
    const FeatureSet fs = mode == EmbedMode::encode
                              ? encode_features(m, ds, ds.domain_tag)
                              : search_features(m, ds, cfg, ds.domain_tag);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("export_embeddings: cannot open " + path);
    const int d = fs.dim();
    for (int j = 0; j < d; ++j) out << 'z' << j << ',';
    out << "class_id,domain\n";
    char num[64];
    for (size_t i = 0; i < fs.vectors.size(); ++i) {
        for (int j = 0; j < d; ++j) {
            std::snprintf(num, sizeof num, "%.9g", static_cast<double>(fs.vectors[i][j]));
            out << num << ',';
        }
        out << ds.labels[i] << ',' << ds.domain_tag << '\n';
    }
    if (!out) throw std::runtime_error("export_embeddings: write failed for " + path);
}

std::vector<Lemma1Row> lemma1_demo(int dim, const std::vector<int>& n_grid, int trials,
                                   uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("lemma1_demo: dim must be >= 1");
    if (trials < 1) throw std::invalid_argument("lemma1_demo: trials must be >= 1");
    if (n_grid.empty()) throw std::invalid_argument("lemma1_demo: empty n_grid");
    for (size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 1) throw std::invalid_argument("lemma1_demo: n must be >= 1");
        if (i > 0 && n_grid[i] <= n_grid[i - 1])
            throw std::invalid_argument("lemma1_demo: n_grid must be strictly increasing");
    }

    std::vector<Lemma1Row> rows;
    rows.reserve(n_grid.size());
    for (size_t row = 0; row < n_grid.size(); ++row) {
        const int n = n_grid[row];
        const uint64_t row_seed = derive_seed(seed, "lemma1-n", row);
        std::vector<double> dist(static_cast<size_t>(trials));
#pragma omp parallel for schedule(static) if (parallel::enabled())
        for (int t = 0; t < trials; ++t) {
            Rng rng(derive_seed(row_seed, "lemma1-trial", static_cast<uint64_t>(t)));
            std::vector<double> target(static_cast<size_t>(dim));
            for (double& c : target) c = rng.uniform();
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < n; ++k) {
                double d2 = 0.0;
                for (int j = 0; j < dim; ++j) {
                    const double diff = rng.uniform() - target[static_cast<size_t>(j)];
                    d2 += diff * diff;
                }
                best = std::min(best, d2);
            }
            dist[static_cast<size_t>(t)] = std::sqrt(best);
        }
        double mean = 0.0;
        for (double v : dist) mean += v;
        mean /= static_cast<double>(trials);
        double var = 0.0;
        for (double v : dist) var += (v - mean) * (v - mean);
        var = trials > 1 ? var / static_cast<double>(trials - 1) : 0.0;
        rows.push_back({n, mean, std::sqrt(var)});
    }
    return rows;
}

void write_lemma1_table(const std::vector<Lemma1Row>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_lemma1_table: cannot open " + path);
    out << "n,mean_nn_distance,std\n";
    char a[64], b[64];
    for (const Lemma1Row& r : rows) {
        std::snprintf(a, sizeof a, "%.9g", r.mean_nn_distance);
        std::snprintf(b, sizeof b, "%.9g", r.std_dev);
        out << r.n << ',' << a << ',' << b << '\n';
    }
    if (!out) throw std::runtime_error("write_lemma1_table: write failed for " + path);
}

}  // namespace lsda::metrics
