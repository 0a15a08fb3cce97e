#include "lsda/perceptual/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "lsda/kernels/elementwise.hpp"
#include "lsda/nn/checkpoint.hpp"
#include "lsda/nn/optim.hpp"

namespace lsda::perceptual {

int ClassifierArch::blocks() const {
    int levels = 0, s = img;
    while (s > 4) {
        s /= 2;
        ++levels;
    }
    return levels + 1;
}

int ClassifierArch::feature_block() const {
    return feature_layer_index >= 0 ? feature_layer_index : blocks() - 2;
}

void ClassifierArch::validate() const {
    if (img < 8 || (img & (img - 1)) != 0)
        throw std::invalid_argument("classifier: img must be a power of two >= 8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("classifier: channels must be 1 or 3");
    if (num_classes < 2) throw std::invalid_argument("classifier: need at least 2 classes");
    if (width < 1) throw std::invalid_argument("classifier: width must be positive");
    if (feature_layer_index >= blocks())
        throw std::invalid_argument("classifier: feature_layer_index out of range");
}

SourceClassifier::SourceClassifier(const ClassifierArch& arch, uint64_t seed)
    : arch_(arch), head_("head", 4 * 4 * arch.width, arch.num_classes) {
    arch_.validate();
    const int n = arch_.blocks();
    convs_.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int in_c = i == 0 ? arch_.channels : arch_.width;
        const int stride = i == 0 ? 1 : 2;
        convs_.emplace_back("conv" + std::to_string(i), in_c, arch_.width, 3, stride, 1);
        acts_.emplace_back(0.2f);
    }
    Rng rng(seed);
    for (auto& c : convs_) c.init(rng);
    head_.init(rng);
}

TensorF SourceClassifier::forward_blocks(const TensorF& x, int upto) {
    if (x.ndim() != 4 || x.dim(1) != arch_.img || x.dim(2) != arch_.img ||
        x.dim(3) != arch_.channels)
        throw std::invalid_argument("classifier: input shape does not match architecture");
    TensorF h = x;
    for (int i = 0; i <= upto; ++i) h = acts_[i].forward(convs_[i].forward(h));
    return h;
}

TensorF SourceClassifier::logits(const TensorF& x) {
    TensorF h = forward_blocks(x, arch_.blocks() - 1);
    const int b = h.dim(0);
    h.reshape({b, 4 * 4 * arch_.width});
    return head_.forward(h);
}

TensorF SourceClassifier::predict_proba(const TensorF& x) {
    TensorF lg = logits(x);
    TensorF p(lg.shape());
    kernels::softmax_rows(lg.data(), p.data(), lg.dim(0), lg.dim(1));
    return p;
}

std::pair<int, std::vector<float>> SourceClassifier::predict(const TensorF& img) {
    TensorF x = img;
    x.reshape({1, img.dim(0), img.dim(1), img.dim(2)});
    TensorF p = predict_proba(x);
    std::vector<float> probs(p.data(), p.data() + p.size());
    const int cls = static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                     probs.begin());
    return {cls, probs};
}

std::array<int, 3> SourceClassifier::feature_shape() const {
    const int fb = arch_.feature_block();
    int s = arch_.img;
    for (int i = 1; i <= fb; ++i) s /= 2;
    return {s, s, arch_.width};
}

size_t SourceClassifier::feature_dim() const {
    const auto fs = feature_shape();
    return static_cast<size_t>(fs[0]) * fs[1] * fs[2];
}

TensorF SourceClassifier::features(const TensorF& x) {
    TensorF h = forward_blocks(x, arch_.feature_block());
    h.reshape({h.dim(0), static_cast<int>(feature_dim())});
    return h;
}

TensorF SourceClassifier::features_backward(const TensorF& dfeat) {
    const auto fs = feature_shape();
    TensorF d = dfeat;
    d.reshape({d.dim(0), fs[0], fs[1], fs[2]});
    for (int i = arch_.feature_block(); i >= 0; --i)
        d = convs_[i].backward(acts_[i].backward(d), /*want_param_grads=*/false);
    return d;
}

TensorF SourceClassifier::backward(const TensorF& dlogits) {
    TensorF d = head_.backward(dlogits);
    d.reshape({d.dim(0), 4, 4, arch_.width});
    for (int i = arch_.blocks() - 1; i >= 0; --i)
        d = convs_[i].backward(acts_[i].backward(d));
    return d;
}

std::vector<nn::Param*> SourceClassifier::params() {
    std::vector<nn::Param*> out;
    for (auto& c : convs_)
        for (auto* p : c.params()) out.push_back(p);
    for (auto* p : head_.params()) out.push_back(p);
    return out;
}

void SourceClassifier::save(const std::string& path) const {
    nn::Archive a;
    a.set_meta_int("img", arch_.img);
    a.set_meta_int("channels", arch_.channels);
    a.set_meta_int("num_classes", arch_.num_classes);
    a.set_meta_int("width", arch_.width);
    a.set_meta_int("feature_layer_index", arch_.feature_block());
    a.meta["kind"] = "classifier";
    for (const auto& c : convs_) {
        a.tensors[c.w.name] = c.w.value;
        a.tensors[c.b.name] = c.b.value;
    }
    a.tensors[head_.w.name] = head_.w.value;
    a.tensors[head_.b.name] = head_.b.value;
    a.save(path);
}

SourceClassifier SourceClassifier::load(const std::string& path) {
    nn::Archive a = nn::Archive::load(path);
    if (a.meta_str("kind") != "classifier")
        throw std::runtime_error("not a classifier checkpoint: " + path);
    ClassifierArch arch;
    arch.img = static_cast<int>(a.meta_int("img"));
    arch.channels = static_cast<int>(a.meta_int("channels"));
    arch.num_classes = static_cast<int>(a.meta_int("num_classes"));
    arch.width = static_cast<int>(a.meta_int("width"));
    arch.feature_layer_index = static_cast<int>(a.meta_int("feature_layer_index"));
    SourceClassifier clf(arch, 0);
    for (nn::Param* p : clf.params()) {
        const TensorF& t = a.tensor(p->name);
        if (t.shape() != p->value.shape())
            throw std::runtime_error("checkpoint tensor shape mismatch for " + p->name);
        p->value = t;
    }
    return clf;
}

namespace {

using data::gather_batch;

// Mean cross-entropy from logits (log-sum-exp form) and its gradient.
double ce_loss_grad(const TensorF& lg, const std::vector<int>& y, TensorF& dlg) {
    const int b = lg.dim(0), k = lg.dim(1);
    double loss = 0;
    for (int i = 0; i < b; ++i) {
        const float* row = lg.data() + static_cast<size_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double se = 0;
        for (int j = 0; j < k; ++j) se += std::exp(row[j] - mx);
        const double lse = mx + std::log(se);
        loss += lse - row[y[i]];
        float* drow = dlg.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j)
            drow[j] = static_cast<float>(std::exp(row[j] - lse) / b);
        drow[y[i]] -= 1.0f / static_cast<float>(b);
    }
    return loss / b;
}

}  // namespace

double accuracy(SourceClassifier& clf, const data::LabeledDataset& ds) {
    const size_t batch = 64;
    std::vector<size_t> order(ds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t hits = 0;
    for (size_t b = 0; b < ds.size(); b += batch) {
        const size_t e = std::min(ds.size(), b + batch);
        TensorF lg = clf.logits(gather_batch(ds, order, b, e));
        const int k = lg.dim(1);
        for (size_t i = b; i < e; ++i) {
            const float* row = lg.data() + (i - b) * k;
            const int pred = static_cast<int>(std::max_element(row, row + k) - row);
            hits += pred == ds.labels[i];
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

SourceClassifier train_classifier(const data::LabeledDataset& train,
                                  const data::LabeledDataset& val, const ClassifierArch& arch,
                                  const TrainConfig& cfg) {
    if (train.num_classes() != arch.num_classes || val.num_classes() != arch.num_classes)
        throw std::invalid_argument("train_classifier: class count mismatch");
    std::set<int> distinct(train.labels.begin(), train.labels.end());
    if (distinct.size() < 2)
        throw std::invalid_argument("train_classifier: degenerate labels (single class)");

    SourceClassifier clf(arch, derive_seed(cfg.seed, "clf-init", 0));
    nn::RmsProp opt(clf.params(), cfg.lr);

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        log << "epoch,train_loss,train_acc,val_acc\n";
    }

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_acc = -1;
    int best_epoch = -1;
    std::vector<TensorF> best;

    const auto snapshot = [&] {
        best.clear();
        for (nn::Param* p : clf.params()) best.push_back(p->value);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "clf-epoch", static_cast<uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());

        double loss_sum = 0;
        size_t batches = 0, hits = 0;
        for (size_t b = 0; b < train.size(); b += cfg.batch_size) {
            const size_t e = std::min(train.size(), b + cfg.batch_size);
            TensorF x = gather_batch(train, order, b, e);
            std::vector<int> y(e - b);
            for (size_t i = b; i < e; ++i) y[i - b] = train.labels[order[i]];

            TensorF lg = clf.logits(x);
            TensorF dlg(lg.shape());
            const double loss = ce_loss_grad(lg, y, dlg);
            if (!std::isfinite(loss))
                throw std::runtime_error("classifier training diverged at epoch " +
                                         std::to_string(epoch));
            loss_sum += loss;
            ++batches;
            const int k = lg.dim(1);
            for (size_t i = 0; i < y.size(); ++i) {
                const float* row = lg.data() + i * k;
                hits += static_cast<int>(std::max_element(row, row + k) - row) == y[i];
            }

            opt.zero_grad();
            clf.backward(dlg);
            opt.step();
        }

        const double val_acc = accuracy(clf, val);
        if (log.is_open())
            log << epoch << ',' << loss_sum / std::max<size_t>(batches, 1) << ','
                << static_cast<double>(hits) / train.size() << ',' << val_acc << '\n';

        if (val_acc > best_acc) {
            best_acc = val_acc;
            best_epoch = epoch;
            snapshot();
        }
        if (epoch - best_epoch >= cfg.patience) break;
    }

    if (!best.empty()) {
        auto ps = clf.params();
        for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = best[i];
    }
    return clf;
}

}  // namespace lsda::perceptual
