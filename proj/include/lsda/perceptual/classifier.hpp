#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "lsda/core/tensor.hpp"
#include "lsda/data/dataset.hpp"
#include "lsda/nn/layers.hpp"

namespace lsda::perceptual {

// Small convolutional classifier trained on source images only. It doubles
// as the perceptual feature extractor: the perceptual loss compares the
// flattened post-activation output of one mid-depth conv block.
struct ClassifierArch {
    int img = 32;
    int channels = 3;
    int num_classes = 4;
    int width = 32;
    // Conv block whose output features() emits; -1 selects the penultimate
    // block (one stride-1 block plus log2(img/4) stride-2 blocks total).
    int feature_layer_index = -1;

    int blocks() const;
    int feature_block() const;
    void validate() const;
};

class SourceClassifier {
  public:
    SourceClassifier(const ClassifierArch& arch, uint64_t seed);

    const ClassifierArch& arch() const { return arch_; }

    TensorF logits(const TensorF& x);         // (B, H, W, C) -> (B, num_classes)
    TensorF predict_proba(const TensorF& x);  // softmax rows of logits
    std::pair<int, std::vector<float>> predict(const TensorF& img);  // single (H, W, C)

    TensorF features(const TensorF& x);  // (B, H, W, C) -> (B, feature_dim)
    size_t feature_dim() const;
    std::array<int, 3> feature_shape() const;  // (h, w, c) of the feature block

    // d(features) -> d(input) with parameters frozen. Valid only directly
    // after features() on the same batch: layers cache their activations.
    TensorF features_backward(const TensorF& dfeat);

    // Full backward from dlogits; fills parameter gradients, returns dx.
    TensorF backward(const TensorF& dlogits);

    std::vector<nn::Param*> params();

    void save(const std::string& path) const;
    static SourceClassifier load(const std::string& path);

  private:
    TensorF forward_blocks(const TensorF& x, int upto);

    ClassifierArch arch_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::LeakyRelu> acts_;
    nn::Dense head_;
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    float lr = 1e-3f;
    int patience = 8;  // epochs without validation improvement before stopping
    uint64_t seed = 0;
    std::string log_path;  // per-epoch CSV epoch,train_loss,train_acc,val_acc; empty = no log
};

// Cross-entropy training with validation-based early stopping; returns the
// parameters of the best validation epoch. Non-finite loss aborts.
SourceClassifier train_classifier(const data::LabeledDataset& train,
                                  const data::LabeledDataset& val, const ClassifierArch& arch,
                                  const TrainConfig& cfg);

double accuracy(SourceClassifier& clf, const data::LabeledDataset& ds);

}  // namespace lsda::perceptual
