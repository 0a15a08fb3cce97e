#include "lsda/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "lsda/core/rng.hpp"
#include "lsda/metrics/domain_metrics.hpp"

namespace fs = std::filesystem;

namespace lsda::cli {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + value + "' as " +
                                expected);
}

long long to_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "an integer");
    return x;
}

uint64_t to_seed(const std::string& key, const std::string& v) {
    char* end = nullptr;
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "an unsigned integer");
    return x;
}

double to_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') bad_value(key, v, "a number");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad_value(key, v, "a boolean (true/false)");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, v, "a comma-separated integer list");
        out.push_back(static_cast<int>(to_int(key, item)));
    }
    if (out.empty()) bad_value(key, v, "a comma-separated integer list");
    return out;
}

std::string real_str(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

const char* loss_name(ssim::LossKind k) {
    switch (k) {
        case ssim::LossKind::ssim: return "ssim";
        case ssim::LossKind::mse: return "mse";
        case ssim::LossKind::mae: return "mae";
    }
    return "ssim";
}

struct KeyDef {
    const char* name;
    const char* doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

// Every recognized non-shift key. Docs are surfaced verbatim by --help.
const std::vector<KeyDef>& key_table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<KeyDef> defs = {
        {"seed", "global RNG root; every stage derives an independent stream from it",
         [](C& c, S v) { c.seed = to_seed("seed", v); }},
        {"data.dir", "corpus root; gen-data writes here, the other commands read",
         [](C& c, S v) { c.data_dir = v; }},
        {"data.img_size", "square image resolution (4 times a power of two)",
         [](C& c, S v) { c.img_size = static_cast<int>(to_int("data.img_size", v)); }},
        {"data.channels", "image channels, 1 or 3",
         [](C& c, S v) { c.channels = static_cast<int>(to_int("data.channels", v)); }},
        {"data.per_class", "source images generated per class (train + test together)",
         [](C& c, S v) { c.per_class = static_cast<int>(to_int("data.per_class", v)); }},
        {"data.train_fraction", "fraction of per_class that becomes training data",
         [](C& c, S v) { c.train_fraction = to_real("data.train_fraction", v); }},
        {"data.shift", "shift preset naming the target corpus used by adapt/eval/ablate",
         [](C& c, S v) { c.shift_name = v; }},
        {"data.eval_limit", "cap on images per adaptation run; 0 means all",
         [](C& c, S v) { c.eval_limit = static_cast<int>(to_int("data.eval_limit", v)); }},
        {"classifier.width", "base channel width of the source classifier",
         [](C& c, S v) { c.clf_width = static_cast<int>(to_int("classifier.width", v)); }},
        {"classifier.feature_layer", "conv block index of the perceptual features; -1 penultimate",
         [](C& c, S v) { c.clf_feature_layer = static_cast<int>(to_int("classifier.feature_layer", v)); }},
        {"classifier.epochs", "classifier training epochs",
         [](C& c, S v) { c.clf_train.epochs = static_cast<int>(to_int("classifier.epochs", v)); }},
        {"classifier.batch_size", "classifier batch size",
         [](C& c, S v) { c.clf_train.batch_size = static_cast<int>(to_int("classifier.batch_size", v)); }},
        {"classifier.lr", "classifier learning rate",
         [](C& c, S v) { c.clf_train.lr = static_cast<float>(to_real("classifier.lr", v)); }},
        {"classifier.patience", "early-stop patience in epochs without validation gain",
         [](C& c, S v) { c.clf_train.patience = static_cast<int>(to_int("classifier.patience", v)); }},
        {"vae.latent", "latent dimension",
         [](C& c, S v) { c.vae_arch.latent = static_cast<int>(to_int("vae.latent", v)); }},
        {"vae.trunk", "encoder/decoder trunk channel width",
         [](C& c, S v) { c.vae_arch.trunk = static_cast<int>(to_int("vae.trunk", v)); }},
        {"vae.refine", "post-edge-concat refinement channel width",
         [](C& c, S v) { c.vae_arch.refine = static_cast<int>(to_int("vae.refine", v)); }},
        {"vae.fc", "bottleneck fully-connected width",
         [](C& c, S v) { c.vae_arch.fc = static_cast<int>(to_int("vae.fc", v)); }},
        {"vae.epochs", "VAE training epochs",
         [](C& c, S v) { c.vae_train.epochs = static_cast<int>(to_int("vae.epochs", v)); }},
        {"vae.batch_size", "VAE batch size",
         [](C& c, S v) { c.vae_train.batch_size = static_cast<int>(to_int("vae.batch_size", v)); }},
        {"vae.lr", "VAE learning rate (RMSprop)",
         [](C& c, S v) { c.vae_train.lr = static_cast<float>(to_real("vae.lr", v)); }},
        {"vae.perceptual_weight", "weight of the classifier-feature loss term; 0 disables it",
         [](C& c, S v) { c.vae_train.perceptual_weight = to_real("vae.perceptual_weight", v); }},
        {"vae.use_edges", "condition the decoder on the image's edge map",
         [](C& c, S v) { c.vae_train.use_edges = to_bool("vae.use_edges", v); }},
        {"ssim.window_size", "odd SSIM window side length",
         [](C& c, S v) { c.ssim.window_size = static_cast<int>(to_int("ssim.window_size", v)); }},
        {"ssim.window_sigma", "Gaussian window sigma",
         [](C& c, S v) { c.ssim.window_sigma = to_real("ssim.window_sigma", v); }},
        {"ssim.k1", "luminance stabilizer k1",
         [](C& c, S v) { c.ssim.k1 = to_real("ssim.k1", v); }},
        {"ssim.k2", "contrast/structure stabilizer k2",
         [](C& c, S v) { c.ssim.k2 = to_real("ssim.k2", v); }},
        {"search.iterations", "gradient iterations per restart",
         [](C& c, S v) { c.search.iterations = static_cast<int>(to_int("search.iterations", v)); }},
        {"search.step_size", "search step size; 0 evaluates the initial code only",
         [](C& c, S v) { c.search.step_size = static_cast<float>(to_real("search.step_size", v)); }},
        {"search.momentum", "Nesterov momentum in [0,1)",
         [](C& c, S v) { c.search.momentum = static_cast<float>(to_real("search.momentum", v)); }},
        {"search.loss", "search image loss: ssim, mse, or mae",
         [](C& c, S v) { c.search.loss = ssim::parse_loss_kind(v); }},
        {"search.convergence_tol", "early stop when consecutive losses differ by at most this; 0 disables",
         [](C& c, S v) { c.search.convergence_tol = to_real("search.convergence_tol", v); }},
        {"search.restarts", "independent restarts per image; best iterate wins",
         [](C& c, S v) { c.search.restarts = static_cast<int>(to_int("search.restarts", v)); }},
        {"search.init_from_encoder", "start from the encoder mean instead of the prior (ablation)",
         [](C& c, S v) { c.search.init_from_encoder = to_bool("search.init_from_encoder", v); }},
        {"metrics.folds", "cross-validation folds of the domain-discrepancy probe",
         [](C& c, S v) { c.metric_folds = static_cast<int>(to_int("metrics.folds", v)); }},
        {"metrics.embed_mode", "latents written by the embedding export: encode or search",
         [](C& c, S v) { c.embed_mode = v; }},
        {"metrics.lemma1_dim", "space dimension of the nearest-neighbor demo",
         [](C& c, S v) { c.lemma1_dim = static_cast<int>(to_int("metrics.lemma1_dim", v)); }},
        {"metrics.lemma1_trials", "Monte Carlo trials per sample count",
         [](C& c, S v) { c.lemma1_trials = static_cast<int>(to_int("metrics.lemma1_trials", v)); }},
        {"metrics.lemma1_n", "comma-separated sample counts",
         [](C& c, S v) { c.lemma1_n = to_int_list("metrics.lemma1_n", v); }},
        {"output.dir", "artifact directory (checkpoints, CSVs, resolved configs)",
         [](C& c, S v) { c.out_dir = v; }},
        {"output.dump_clones", "also write every clone image as PNG during adapt",
         [](C& c, S v) { c.dump_clones = to_bool("output.dump_clones", v); }},
    };
    return defs;
}

// shift.<preset>.<field> keys; preset names are free-form.
bool apply_shift_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key.rfind("shift.", 0) != 0) return false;
    size_t dot = key.find('.', 6);
    if (dot == std::string::npos || dot == 6 || dot + 1 >= key.size())
        throw std::invalid_argument("config key '" + key + "': expected shift.<preset>.<field>");
    const std::string preset = key.substr(6, dot - 6);
    const std::string field = key.substr(dot + 1);
    data::ShiftConfig& s = cfg.shifts[preset];
    if (field == "hue_rotation") s.hue_rotation = to_real(key, value);
    else if (field == "brightness_scale") s.brightness_scale = to_real(key, value);
    else if (field == "contrast_scale") s.contrast_scale = to_real(key, value);
    else if (field == "gain_r") s.channel_gain[0] = to_real(key, value);
    else if (field == "gain_g") s.channel_gain[1] = to_real(key, value);
    else if (field == "gain_b") s.channel_gain[2] = to_real(key, value);
    else if (field == "noise_sigma") s.noise_sigma = to_real(key, value);
    else if (field == "blur_sigma") s.blur_sigma = to_real(key, value);
    else
        throw std::invalid_argument("config key '" + key + "': unknown shift field '" + field +
                                    "'");
    return true;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const KeyDef& d : key_table()) {
        if (key == d.name) {
            d.set(cfg, value);
            return;
        }
    }
    if (apply_shift_key(cfg, key, value)) return;
    throw std::invalid_argument("unknown config key '" + key + "' (see --help for the key list)");
}

}  // namespace

KeyValues parse_ini(const std::string& text) {
    KeyValues kv;
    std::string prefix;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": malformed section header '" + s + "'");
            prefix = trim(s.substr(1, s.size() - 2)) + ".";
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value, got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        kv[prefix + key] = value;
    }
    return kv;
}

KeyValues load_ini_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ini(ss.str());
}

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;

    c.clf_train.epochs = 30;
    c.clf_train.batch_size = 32;
    c.clf_train.lr = 1e-3f;
    c.clf_train.patience = 8;

    c.vae_train.epochs = 200;
    c.vae_train.batch_size = 16;
    c.vae_train.lr = 1e-3f;
    c.vae_train.perceptual_weight = 0.25;
    c.vae_train.use_edges = true;

    c.search.step_size = 1.0f;

    data::ShiftConfig a;
    a.hue_rotation = 10.0;
    a.brightness_scale = 1.05;
    a.contrast_scale = 0.95;
    a.channel_gain = {1.05, 1.0, 0.95};
    a.noise_sigma = 0.01;
    c.shifts["domain-A"] = a;

    data::ShiftConfig b;
    b.hue_rotation = 30.0;
    b.brightness_scale = 0.78;
    b.contrast_scale = 0.72;
    b.channel_gain = {1.18, 0.95, 0.78};
    b.noise_sigma = 0.03;
    b.blur_sigma = 0.7;
    c.shifts["domain-B"] = b;

    data::ShiftConfig d;
    d.hue_rotation = 55.0;
    d.brightness_scale = 0.6;
    d.contrast_scale = 0.5;
    d.channel_gain = {1.35, 0.85, 0.6};
    d.noise_sigma = 0.06;
    d.blur_sigma = 1.2;
    c.shifts["domain-C"] = d;

    return c;
}

uint64_t ExperimentConfig::data_seed(const std::string& which) const {
    return derive_seed(seed, "data-" + which);
}

uint64_t ExperimentConfig::stage_seed(const std::string& stage) const {
    return derive_seed(seed, stage);
}

void ExperimentConfig::validate() const {
    if (img_size < 8) throw std::invalid_argument("data.img_size must be at least 8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("data.channels must be 1 or 3");
    if (per_class < 2) throw std::invalid_argument("data.per_class must be at least 2");
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::invalid_argument("data.train_fraction must lie strictly between 0 and 1");
    if (eval_limit < 0) throw std::invalid_argument("data.eval_limit must be nonnegative");
    if (!shifts.count(shift_name))
        throw std::invalid_argument("data.shift names unknown preset '" + shift_name +
                                    "' (no [shift." + shift_name + "] section)");
    for (const auto& [name, s] : shifts) {
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("shift." + name + ": " + e.what());
        }
    }
    if (clf_width < 1) throw std::invalid_argument("classifier.width must be positive");
    if (clf_train.epochs < 1) throw std::invalid_argument("classifier.epochs must be positive");
    if (clf_train.batch_size < 1)
        throw std::invalid_argument("classifier.batch_size must be positive");
    if (!(clf_train.lr > 0)) throw std::invalid_argument("classifier.lr must be positive");
    vae_arch.validate();
    if (vae_train.epochs < 0) throw std::invalid_argument("vae.epochs must be nonnegative");
    if (vae_train.batch_size < 1) throw std::invalid_argument("vae.batch_size must be positive");
    if (!(vae_train.lr > 0)) throw std::invalid_argument("vae.lr must be positive");
    if (vae_train.perceptual_weight < 0)
        throw std::invalid_argument("vae.perceptual_weight must be nonnegative");
    ssim.validate();
    search.validate();
    if (metric_folds < 2) throw std::invalid_argument("metrics.folds must be at least 2");
    metrics::parse_embed_mode(embed_mode);
    if (lemma1_dim < 1) throw std::invalid_argument("metrics.lemma1_dim must be positive");
    if (lemma1_trials < 2) throw std::invalid_argument("metrics.lemma1_trials must be at least 2");
    for (int n : lemma1_n)
        if (n < 1) throw std::invalid_argument("metrics.lemma1_n entries must be positive");
    if (out_dir.empty()) throw std::invalid_argument("output.dir must not be empty");
    if (data_dir.empty()) throw std::invalid_argument("data.dir must not be empty");
}

std::string ExperimentConfig::classifier_path() const {
    return (fs::path(out_dir) / "classifier.ckpt").string();
}

std::string ExperimentConfig::vae_path() const {
    return (fs::path(out_dir) / "vae.ckpt").string();
}

std::string ExperimentConfig::source_root() const {
    return (fs::path(data_dir) / "source").string();
}

std::string ExperimentConfig::target_root(const std::string& name) const {
    return (fs::path(data_dir) / "target" / name).string();
}

ExperimentConfig resolve_config(const KeyValues& file, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg = ExperimentConfig::defaults();
    for (const auto& [k, v] : file) apply_key(cfg, k, v);
    for (const std::string& ov : overrides) {
        size_t eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("override '" + ov + "': expected key=value");
        apply_key(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }
    // Derived fields come last so key order can never matter.
    cfg.vae_arch.img = cfg.img_size;
    cfg.vae_arch.channels = cfg.channels;
    cfg.search.ssim_cfg = cfg.ssim;
    cfg.clf_train.seed = cfg.stage_seed("classifier");
    cfg.vae_train.seed = cfg.stage_seed("vae");
    cfg.search.init_seed = cfg.stage_seed("search");
    for (auto& [name, s] : cfg.shifts) s.seed = derive_seed(cfg.seed, "shift-" + name);
    cfg.validate();
    return cfg;
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "seed = " << c.seed << "\n\n";
    o << "[data]\n";
    o << "dir = " << c.data_dir << "\n";
    o << "img_size = " << c.img_size << "\n";
    o << "channels = " << c.channels << "\n";
    o << "per_class = " << c.per_class << "\n";
    o << "train_fraction = " << real_str(c.train_fraction) << "\n";
    o << "shift = " << c.shift_name << "\n";
    o << "eval_limit = " << c.eval_limit << "\n";
    for (const auto& [name, s] : c.shifts) {
        o << "\n[shift." << name << "]\n";
        o << "hue_rotation = " << real_str(s.hue_rotation) << "\n";
        o << "brightness_scale = " << real_str(s.brightness_scale) << "\n";
        o << "contrast_scale = " << real_str(s.contrast_scale) << "\n";
        o << "gain_r = " << real_str(s.channel_gain[0]) << "\n";
        o << "gain_g = " << real_str(s.channel_gain[1]) << "\n";
        o << "gain_b = " << real_str(s.channel_gain[2]) << "\n";
        o << "noise_sigma = " << real_str(s.noise_sigma) << "\n";
        o << "blur_sigma = " << real_str(s.blur_sigma) << "\n";
    }
    o << "\n[classifier]\n";
    o << "width = " << c.clf_width << "\n";
    o << "feature_layer = " << c.clf_feature_layer << "\n";
    o << "epochs = " << c.clf_train.epochs << "\n";
    o << "batch_size = " << c.clf_train.batch_size << "\n";
    o << "lr = " << real_str(c.clf_train.lr) << "\n";
    o << "patience = " << c.clf_train.patience << "\n";
    o << "\n[vae]\n";
    o << "latent = " << c.vae_arch.latent << "\n";
    o << "trunk = " << c.vae_arch.trunk << "\n";
    o << "refine = " << c.vae_arch.refine << "\n";
    o << "fc = " << c.vae_arch.fc << "\n";
    o << "epochs = " << c.vae_train.epochs << "\n";
    o << "batch_size = " << c.vae_train.batch_size << "\n";
    o << "lr = " << real_str(c.vae_train.lr) << "\n";
    o << "perceptual_weight = " << real_str(c.vae_train.perceptual_weight) << "\n";
    o << "use_edges = " << (c.vae_train.use_edges ? "true" : "false") << "\n";
    o << "\n[ssim]\n";
    o << "window_size = " << c.ssim.window_size << "\n";
    o << "window_sigma = " << real_str(c.ssim.window_sigma) << "\n";
    o << "k1 = " << real_str(c.ssim.k1) << "\n";
    o << "k2 = " << real_str(c.ssim.k2) << "\n";
    o << "\n[search]\n";
    o << "iterations = " << c.search.iterations << "\n";
    o << "step_size = " << real_str(c.search.step_size) << "\n";
    o << "momentum = " << real_str(c.search.momentum) << "\n";
    o << "loss = " << loss_name(c.search.loss) << "\n";
    o << "convergence_tol = " << real_str(c.search.convergence_tol) << "\n";
    o << "restarts = " << c.search.restarts << "\n";
    o << "init_from_encoder = " << (c.search.init_from_encoder ? "true" : "false") << "\n";
    o << "\n[metrics]\n";
    o << "folds = " << c.metric_folds << "\n";
    o << "embed_mode = " << c.embed_mode << "\n";
    o << "lemma1_dim = " << c.lemma1_dim << "\n";
    o << "lemma1_trials = " << c.lemma1_trials << "\n";
    o << "lemma1_n = ";
    for (size_t i = 0; i < c.lemma1_n.size(); ++i) o << (i ? "," : "") << c.lemma1_n[i];
    o << "\n";
    o << "\n[output]\n";
    o << "dir = " << c.out_dir << "\n";
    o << "dump_clones = " << (c.dump_clones ? "true" : "false") << "\n";
    return o.str();
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / ("config-" + command + ".ini")).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write resolved config: " + path);
    out << serialize_config(cfg);
}

std::string config_key_help() {
    std::ostringstream o;
    o << "Config keys (INI sections map to dotted names; overrides use key=value):\n";
    for (const KeyDef& d : key_table()) o << "  " << d.name << "\n      " << d.doc << "\n";
    o << "  shift.<preset>.{hue_rotation,brightness_scale,contrast_scale,gain_r,gain_g,\n"
         "                  gain_b,noise_sigma,blur_sigma}\n"
         "      photometric shift preset fields; presets beyond the built-in\n"
         "      domain-A/B/C appear by assigning any of their fields\n";
    return o.str();
}

}  // namespace lsda::cli
