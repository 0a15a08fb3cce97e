#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lsda/data/shift.hpp"
#include "lsda/perceptual/classifier.hpp"
#include "lsda/search/latent_search.hpp"
#include "lsda/ssim/ssim.hpp"
#include "lsda/vae/model.hpp"
#include "lsda/vae/train.hpp"

namespace lsda::cli {

// Flat view of an INI file: "section.key" -> raw value string. Keys before
// any [section] header carry no prefix. Later assignments win.
using KeyValues = std::map<std::string, std::string>;

// Parses INI text: [section] headers, key = value lines, # or ; comments,
// whitespace trimmed. Throws std::invalid_argument with the line number on
// malformed input. Does not check key names; resolve_config does.
KeyValues parse_ini(const std::string& text);

// Reads and parses a config file. Missing file -> std::runtime_error naming
// the path.
KeyValues load_ini_file(const std::string& path);

// Everything a run needs. Stage seeds are derived from the one global seed,
// so two configs that serialize identically produce identical runs.
struct ExperimentConfig {
    uint64_t seed = 0;

    // [data]
    std::string data_dir = "data";
    int img_size = 32;
    int channels = 3;
    int per_class = 100;
    double train_fraction = 0.8;
    std::string shift_name = "domain-B";  // preset the adapt/eval target uses
    int eval_limit = 0;                   // cap on adapted images; 0 = all

    // [shift.<name>] presets; gen-data materializes a target corpus per entry
    std::map<std::string, data::ShiftConfig> shifts;

    // [classifier]
    int clf_width = 16;
    int clf_feature_layer = -1;
    perceptual::TrainConfig clf_train;

    // [vae]
    vae::VaeArch vae_arch;
    vae::TrainVaeConfig vae_train;

    // [ssim]
    ssim::SsimConfig ssim;

    // [search]
    search::SearchConfig search;

    // [metrics]
    int metric_folds = 5;
    std::string embed_mode = "encode";
    int lemma1_dim = 2;
    int lemma1_trials = 100;
    std::vector<int> lemma1_n = {10, 100, 1000, 10000};

    // [output]
    std::string out_dir = "out";
    bool dump_clones = false;

    static ExperimentConfig defaults();

    // Derived per-stage seed streams.
    uint64_t data_seed(const std::string& which) const;
    uint64_t stage_seed(const std::string& stage) const;

    // Cross-field checks plus the sub-configs' own validate(). Throws
    // std::invalid_argument.
    void validate() const;

    // Artifact paths fixed for downstream tooling.
    std::string classifier_path() const;
    std::string vae_path() const;
    std::string source_root() const;                        // <data>/source
    std::string target_root(const std::string& name) const; // <data>/target/<name>
};

// Defaults, then file keys, then override keys ("vae.lr=1e-4"). Unknown keys
// and unparseable values throw std::invalid_argument naming the key.
ExperimentConfig resolve_config(const KeyValues& file, const std::vector<std::string>& overrides);

// Canonical INI dump: fixed section and key order, %.9g reals. Feeding the
// output back through resolve_config reproduces the config exactly.
std::string serialize_config(const ExperimentConfig& cfg);

// serialize_config to <out>/config-<command>.ini, creating out_dir.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& command);

// One line per recognized config key: "key  default  description". Shown by
// --help so the key set is discoverable without reading sources.
std::string config_key_help();

}  // namespace lsda::cli
