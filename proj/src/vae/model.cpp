#include "lsda/vae/model.hpp"

#include <cmath>
#include <stdexcept>

#include "lsda/core/rng.hpp"
#include "lsda/nn/checkpoint.hpp"

namespace lsda::vae {

int VaeArch::levels() const {
    int n = 0, s = img;
    while (s > 4) {
        s /= 2;
        ++n;
    }
    return n;
}

void VaeArch::validate() const {
    if (img < 8 || (img & (img - 1)) != 0)
        throw std::invalid_argument("vae: img must be a power of two >= 8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("vae: channels must be 1 or 3");
    if (latent < 1 || trunk < 1 || refine < 1 || fc < 1)
        throw std::invalid_argument("vae: widths must be positive");
}

VaeArch VaeArch::paper_preset() {
    VaeArch a;
    a.img = 128;
    a.channels = 3;
    a.latent = 64;
    a.trunk = 128;
    a.refine = 128;
    a.fc = 1024;
    return a;
}

TensorF PosteriorParams::sigma() const {
    TensorF s(log_sigma.shape());
    for (size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_sigma[i]);
    return s;
}

TensorF reparameterize(const PosteriorParams& p, uint64_t noise_seed) {
    Rng rng(noise_seed);
    TensorF z(p.mu.shape());
    for (size_t i = 0; i < z.size(); ++i)
        z[i] = p.mu[i] + std::exp(p.log_sigma[i]) * static_cast<float>(rng.normal(0.0, 1.0));
    return z;
}

namespace {

TensorF concat_channels(const TensorF& a, const TensorF& b) {
    const int batch = a.dim(0), h = a.dim(1), w = a.dim(2);
    const int ca = a.dim(3), cb = b.dim(3);
    TensorF out({batch, h, w, ca + cb});
    const size_t pixels = static_cast<size_t>(batch) * h * w;
    for (size_t p = 0; p < pixels; ++p) {
        std::copy(a.data() + p * ca, a.data() + (p + 1) * ca, out.data() + p * (ca + cb));
        std::copy(b.data() + p * cb, b.data() + (p + 1) * cb,
                  out.data() + p * (ca + cb) + ca);
    }
    return out;
}

TensorF take_channels(const TensorF& x, int first) {
    const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    TensorF out({batch, h, w, first});
    const size_t pixels = static_cast<size_t>(batch) * h * w;
    for (size_t p = 0; p < pixels; ++p)
        std::copy(x.data() + p * c, x.data() + p * c + first, out.data() + p * first);
    return out;
}

constexpr float kLogSigmaClamp = 6.0f;

}  // namespace

VaeModel::VaeModel(const VaeArch& arch, uint64_t seed)
    : arch_(arch),
      enc_fc_("enc_fc", 4 * 4 * arch.trunk, arch.fc),
      enc_fc_act_(0.2f),
      head_mu_("head_mu", arch.fc, arch.latent),
      head_ls_("head_ls", arch.fc, arch.latent),
      dec_fc1_("dec_fc1", arch.latent, arch.fc),
      dec_fc2_("dec_fc2", arch.fc, 4 * 4 * arch.trunk),
      dec_act1_(0.2f),
      dec_act2_(0.2f),
      ref_act1_(0.2f),
      ref_act2_(0.2f) {
    arch_.validate();
    const int lv = arch_.levels();

    enc_convs_.emplace_back("enc0", arch_.channels, arch_.trunk, 3, 1, 1);
    for (int i = 1; i <= lv; ++i)
        enc_convs_.emplace_back("enc" + std::to_string(i), arch_.trunk, arch_.trunk, 3, 2, 1);
    enc_acts_.assign(enc_convs_.size(), nn::LeakyRelu(0.2f));

    // Mirror of the encoder: one stride-1 stage at 4x4, stride-2 stages back
    // to full resolution, the last one emitting the image channels.
    dec_deconvs_.emplace_back("dec0", arch_.trunk, arch_.trunk, 3, 1, 1);
    for (int i = 1; i < lv; ++i)
        dec_deconvs_.emplace_back("dec" + std::to_string(i), arch_.trunk, arch_.trunk, 4, 2, 1);
    dec_deconvs_.emplace_back("dec" + std::to_string(lv), arch_.trunk, arch_.channels, 4, 2, 1);
    dec_acts_.assign(dec_deconvs_.size() - 1, nn::LeakyRelu(0.2f));

    ref_convs_.emplace_back("ref0", 3 * arch_.channels, arch_.refine, 3, 1, 1);
    ref_convs_.emplace_back("ref1", arch_.refine, arch_.refine, 3, 1, 1);
    ref_convs_.emplace_back("ref2", arch_.refine, arch_.channels, 3, 1, 1);

    Rng rng(seed);
    for (auto& c : enc_convs_) c.init(rng);
    enc_fc_.init(rng);
    head_mu_.init(rng);
    head_ls_.init(rng);
    // Start the posterior near N(mu, 1): a wide-spread log-sigma at init
    // stalls training with either vanishing or exploding KL.
    for (size_t i = 0; i < head_ls_.w.value.size(); ++i) head_ls_.w.value[i] *= 0.1f;
    dec_fc1_.init(rng);
    dec_fc2_.init(rng);
    for (auto& d : dec_deconvs_) d.init(rng);
    for (auto& c : ref_convs_) c.init(rng);
}

PosteriorParams VaeModel::encode(const TensorF& x) {
    if (x.ndim() != 4 || x.dim(1) != arch_.img || x.dim(2) != arch_.img ||
        x.dim(3) != arch_.channels)
        throw std::invalid_argument("vae encode: input shape does not match architecture");

    TensorF h = x;
    for (size_t i = 0; i < enc_convs_.size(); ++i)
        h = enc_acts_[i].forward(enc_convs_[i].forward(h));
    h.reshape({h.dim(0), 4 * 4 * arch_.trunk});
    h = enc_fc_act_.forward(enc_fc_.forward(h));

    PosteriorParams p;
    p.mu = head_mu_.forward(h);
    p.log_sigma = head_ls_.forward(h);
    ls_pass_ = TensorF(p.log_sigma.shape());
    for (size_t i = 0; i < p.log_sigma.size(); ++i) {
        const bool inside = std::fabs(p.log_sigma[i]) < kLogSigmaClamp;
        ls_pass_[i] = inside ? 1.0f : 0.0f;
        p.log_sigma[i] = std::clamp(p.log_sigma[i], -kLogSigmaClamp, kLogSigmaClamp);
    }
    return p;
}

void VaeModel::encoder_backward(const TensorF& dmu, const TensorF& dlog_sigma) {
    TensorF dls = dlog_sigma;
    for (size_t i = 0; i < dls.size(); ++i) dls[i] *= ls_pass_[i];

    // Both heads read the same bottleneck activation; their input gradients
    // fan in by summation before the shared trunk runs backward once.
    TensorF dh = head_mu_.backward(dmu);
    TensorF dh2 = head_ls_.backward(dls);
    for (size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];

    TensorF d = enc_fc_.backward(enc_fc_act_.backward(dh));
    d.reshape({d.dim(0), 4, 4, arch_.trunk});
    for (int i = static_cast<int>(enc_convs_.size()) - 1; i >= 0; --i)
        d = enc_convs_[i].backward(enc_acts_[i].backward(d));
}

TensorF VaeModel::decode(const TensorF& z, const TensorF& edges) {
    if (z.ndim() != 2 || z.dim(1) != arch_.latent)
        throw std::invalid_argument("vae decode: z must be (batch, latent)");
    if (edges.ndim() != 4 || edges.dim(0) != z.dim(0) || edges.dim(1) != arch_.img ||
        edges.dim(2) != arch_.img || edges.dim(3) != 2 * arch_.channels)
        throw std::invalid_argument("vae decode: edge map shape mismatch");

    TensorF h = dec_act1_.forward(dec_fc1_.forward(z));
    h = dec_act2_.forward(dec_fc2_.forward(h));
    h.reshape({h.dim(0), 4, 4, arch_.trunk});
    for (size_t i = 0; i + 1 < dec_deconvs_.size(); ++i)
        h = dec_acts_[i].forward(dec_deconvs_[i].forward(h));
    TensorF raw = dec_tanh_.forward(dec_deconvs_.back().forward(h));

    TensorF cat = concat_channels(raw, edges);
    TensorF r = ref_act1_.forward(ref_convs_[0].forward(cat));
    r = ref_act2_.forward(ref_convs_[1].forward(r));
    return ref_tanh_.forward(ref_convs_[2].forward(r));
}

TensorF VaeModel::decoder_backward(const TensorF& dxhat, bool want_param_grads) {
    TensorF d = ref_convs_[2].backward(ref_tanh_.backward(dxhat), want_param_grads);
    d = ref_convs_[1].backward(ref_act2_.backward(d), want_param_grads);
    d = ref_convs_[0].backward(ref_act1_.backward(d), want_param_grads);
    // Edge channels are an input, not a computed activation; only the tanh
    // image slice carries gradient back into the deconv stack.
    d = take_channels(d, arch_.channels);

    d = dec_deconvs_.back().backward(dec_tanh_.backward(d), want_param_grads);
    for (int i = static_cast<int>(dec_deconvs_.size()) - 2; i >= 0; --i)
        d = dec_deconvs_[i].backward(dec_acts_[i].backward(d), want_param_grads);
    d.reshape({d.dim(0), 4 * 4 * arch_.trunk});
    d = dec_fc2_.backward(dec_act2_.backward(d), want_param_grads);
    return dec_fc1_.backward(dec_act1_.backward(d), want_param_grads);
}

std::vector<nn::Param*> VaeModel::encoder_params() {
    std::vector<nn::Param*> out;
    for (auto& c : enc_convs_)
        for (auto* p : c.params()) out.push_back(p);
    for (auto* p : enc_fc_.params()) out.push_back(p);
    for (auto* p : head_mu_.params()) out.push_back(p);
    for (auto* p : head_ls_.params()) out.push_back(p);
    return out;
}

std::vector<nn::Param*> VaeModel::decoder_params() {
    std::vector<nn::Param*> out;
    for (auto* p : dec_fc1_.params()) out.push_back(p);
    for (auto* p : dec_fc2_.params()) out.push_back(p);
    for (auto& d : dec_deconvs_)
        for (auto* p : d.params()) out.push_back(p);
    for (auto& c : ref_convs_)
        for (auto* p : c.params()) out.push_back(p);
    return out;
}

std::vector<nn::Param*> VaeModel::params() {
    auto out = encoder_params();
    for (auto* p : decoder_params()) out.push_back(p);
    return out;
}

void VaeModel::save(const std::string& path,
                    const std::map<std::string, std::string>& extra_meta) {
    nn::Archive a;
    a.meta["kind"] = "vae";
    a.set_meta_int("img", arch_.img);
    a.set_meta_int("channels", arch_.channels);
    a.set_meta_int("latent", arch_.latent);
    a.set_meta_int("trunk", arch_.trunk);
    a.set_meta_int("refine", arch_.refine);
    a.set_meta_int("fc", arch_.fc);
    for (const auto& [k, v] : extra_meta) a.meta[k] = v;
    for (auto* p : params()) a.tensors[p->name] = p->value;
    a.save(path);
}

VaeModel VaeModel::load(const std::string& path,
                        std::map<std::string, std::string>* extra_meta) {
    nn::Archive a = nn::Archive::load(path);
    if (a.meta_str("kind") != "vae")
        throw std::runtime_error("not a vae checkpoint: " + path);
    VaeArch arch;
    arch.img = static_cast<int>(a.meta_int("img"));
    arch.channels = static_cast<int>(a.meta_int("channels"));
    arch.latent = static_cast<int>(a.meta_int("latent"));
    arch.trunk = static_cast<int>(a.meta_int("trunk"));
    arch.refine = static_cast<int>(a.meta_int("refine"));
    arch.fc = static_cast<int>(a.meta_int("fc"));
    VaeModel m(arch, 0);
    for (nn::Param* p : m.params()) {
        const TensorF& t = a.tensor(p->name);
        if (t.shape() != p->value.shape())
            throw std::runtime_error("checkpoint tensor shape mismatch for " + p->name);
        p->value = t;
    }
    if (extra_meta) *extra_meta = a.meta;
    return m;
}

}  // namespace lsda::vae
