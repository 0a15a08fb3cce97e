#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsda/core/tensor.hpp"
#include "lsda/data/dataset.hpp"
#include "lsda/perceptual/classifier.hpp"
#include "lsda/ssim/ssim.hpp"
#include "lsda/vae/model.hpp"

namespace lsda::search {

// Inference by optimization: fit a latent code to one target image through
// the frozen decoder with Nesterov gradient steps on the chosen image loss.
struct SearchConfig {
    int iterations = 600;
    // Tuned so the SSIM loss curve saturates near the 600-iteration budget on
    // the bundled corpus. 0 is allowed: evaluate the initial code only.
    float step_size = 1.0f;
    float momentum = 0.5f;
    ssim::LossKind loss = ssim::LossKind::ssim;
    uint64_t init_seed = 0;
    // Stop once two consecutive losses differ by at most this; 0 disables the
    // early stop and runs all iterations.
    double convergence_tol = 0.0;
    int restarts = 1;
    // Start from the encoder posterior mean instead of z ~ N(0, I). Ablation
    // switch only; prior initialization is the default protocol.
    bool init_from_encoder = false;
    ssim::SsimConfig ssim_cfg;

    void validate() const;  // throws std::invalid_argument on bad fields
};

// Decoder as the search sees it: a frozen map from one latent vector to one
// image plus the pull-back of image-space gradients. backward is valid only
// directly after decode on the same code (implementations cache activations).
class FrozenDecoder {
  public:
    virtual ~FrozenDecoder() = default;
    virtual int latent_dim() const = 0;
    virtual TensorF decode(const TensorF& z) = 0;        // (d_z) -> image
    virtual TensorF backward(const TensorF& dxhat) = 0;  // image grad -> (d_z)
};

// VaeModel-backed decoder. The target's Sobel map is computed once and held
// fixed for the whole search; parameter gradients are never requested, so the
// model weights stay bit-identical.
class VaeDecoder : public FrozenDecoder {
  public:
    VaeDecoder(vae::VaeModel& model, const TensorF& target);
    int latent_dim() const override;
    TensorF decode(const TensorF& z) override;
    TensorF backward(const TensorF& dxhat) override;

  private:
    vae::VaeModel& model_;
    TensorF edges_;  // (1, H, W, 2C)
};

struct SearchResult {
    TensorF z;                       // iterate with the lowest recorded loss
    TensorF clone;                   // decode at z
    std::vector<double> loss_trace;  // per-iterate losses of the winning restart
    double final_loss = 0.0;         // == min(loss_trace) exactly
    int iterations_used = 0;         // == loss_trace.size()
};

// Core loop over a generic frozen decoder. Restart r draws its starting code
// from the stream derived from (init_seed, r); when init_z is given, restart
// 0 starts there instead. A restart whose loss turns non-finite is cut short
// but keeps its finite prefix; if no restart records a finite loss the search
// throws std::runtime_error.
SearchResult latent_search(FrozenDecoder& dec, const TensorF& target, const SearchConfig& cfg,
                           const TensorF* init_z = nullptr);

// VaeModel front end; honors cfg.init_from_encoder.
SearchResult latent_search(vae::VaeModel& m, const TensorF& target, const SearchConfig& cfg);

struct AdaptationResult {
    size_t image_id = 0;
    int true_class = -1;    // evaluation only; the search never sees labels
    int source_only_pred = -1;
    int adapted_pred = -1;  // -1 when the search failed
    TensorF clone;
    TensorF z_final;
    std::vector<float> class_probabilities;  // classifier output on the clone
    std::vector<double> loss_trace;
    double final_loss = 0.0;
    int iterations_used = 0;
    bool failed = false;
};

struct AdaptationSummary {
    std::vector<AdaptationResult> results;  // one per target, in dataset order
    double adapted_accuracy = 0.0;          // over non-failed items
    double source_only_accuracy = 0.0;      // over the same items
    size_t failures = 0;
};

// Per image: search for the closest clone, then classify the clone. Image i
// derives its own init stream from (cfg.init_seed, i). Searches that exhaust
// all restarts without a finite loss are warned about on stderr and excluded
// from both accuracies. Images run sequentially; the model caches activations
// per decode, so concurrent searches over one instance are not safe. The
// kernels parallelize within each decode.
AdaptationSummary adapt_and_classify(vae::VaeModel& m, perceptual::SourceClassifier& clf,
                                     const data::LabeledDataset& targets, const SearchConfig& cfg);

// CSV with header image_id,true_class,source_only_pred,adapted_pred,
// final_loss,iterations_used; one row per target including failed ones
// (adapted_pred -1, final_loss nan).
void write_adaptation_report(const AdaptationSummary& s, const std::string& path);

// One PNG per non-failed clone: <dir>/clone_<id>.png. Creates dir.
void dump_clones(const AdaptationSummary& s, const std::string& dir);

}  // namespace lsda::search
