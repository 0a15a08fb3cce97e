#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsda/data/dataset.hpp"
#include "lsda/perceptual/classifier.hpp"
#include "lsda/search/latent_search.hpp"
#include "lsda/vae/model.hpp"

namespace lsda::metrics {

// Bag of equal-dimension feature vectors from one domain.
struct FeatureSet {
    std::vector<std::vector<float>> vectors;
    std::string domain_tag;

    int dim() const;
    void validate() const;  // non-empty, uniform dimension
};

// Proxy A-distance 2(1 - 2*eps) in [0, 2], where eps is the k-fold
// cross-validated error of a soft-margin linear classifier (hinge + L2,
// full-batch gradient descent) separating a from b, clamped to [0, 0.5].
// Fold assignment is index mod folds within each set, so the result is a
// pure function of the inputs. Each set needs at least 2*folds samples.
double a_distance(const FeatureSet& a, const FeatureSet& b, int folds = 5);

// ||mu_a - mu_b||^2 + tr(Sigma_a + Sigma_b - 2(Sigma_a Sigma_b)^{1/2}) with
// unbiased covariances. The square root comes from eigendecompositions of
// symmetrized matrices; small negative eigenvalues are clipped at 0. Each
// set needs at least dim + 1 samples for covariance rank.
double frechet_feature_distance(const FeatureSet& a, const FeatureSet& b);

// Posterior means of every image, one vector per item.
FeatureSet encode_features(vae::VaeModel& m, const data::LabeledDataset& ds,
                           const std::string& tag);

// Latent codes found by per-image search (image i derives its init stream
// from (cfg.init_seed, i), matching adapt_and_classify).
FeatureSet search_features(vae::VaeModel& m, const data::LabeledDataset& ds,
                           const search::SearchConfig& cfg, const std::string& tag);

// Channel-pooled classifier features: the feature block's spatial mean per
// channel, giving one c-dimensional vector per image. Pooling keeps the
// covariance estimable at desk-scale sample counts.
FeatureSet classifier_features(perceptual::SourceClassifier& clf, const data::LabeledDataset& ds,
                               const std::string& tag);

enum class EmbedMode { encode, search };
EmbedMode parse_embed_mode(const std::string& s);  // "encode" | "search"

// CSV z0..z{d-1},class_id,domain: d_z + 2 columns, one row per image.
void export_embeddings(vae::VaeModel& m, const data::LabeledDataset& ds, EmbedMode mode,
                       const search::SearchConfig& cfg, const std::string& path);

struct Lemma1Row {
    int n;
    double mean_nn_distance;
    double std_dev;
};

// For each n: sample n points uniform on [0,1]^dim plus one target per
// trial, record the nearest-neighbor distance to the target; report mean and
// standard deviation over trials. n_grid must be strictly increasing.
std::vector<Lemma1Row> lemma1_demo(int dim, const std::vector<int>& n_grid, int trials,
                                   uint64_t seed);

// CSV n,mean_nn_distance,std.
void write_lemma1_table(const std::vector<Lemma1Row>& rows, const std::string& path);

}  // namespace lsda::metrics
