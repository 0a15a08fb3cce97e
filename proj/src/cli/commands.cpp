#include "lsda/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsda/core/rng.hpp"
#include "lsda/data/png_io.hpp"
#include "lsda/data/shift.hpp"
#include "lsda/data/synth.hpp"
#include "lsda/edge/sobel.hpp"
#include "lsda/metrics/domain_metrics.hpp"
#include "lsda/search/latent_search.hpp"
#include "lsda/vae/train.hpp"

namespace fs = std::filesystem;

namespace lsda::cli {

namespace {

// Deviation note required on every file that reports feature-space distances.
const char* kFeatureNote =
    "# note: feature-space distances use classifier feature maps pooled over space "
    "(one value per channel)\n";

std::string fmt_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

void require_dir(const std::string& path, const std::string& what, const std::string& producer) {
    if (!fs::is_directory(path))
        throw std::runtime_error("missing " + what + ": " + path + " (run `lsda " + producer +
                                 "` first)");
}

void require_file(const std::string& path, const std::string& what, const std::string& producer) {
    if (!fs::is_regular_file(path))
        throw std::runtime_error("missing " + what + ": " + path + " (run `lsda " + producer +
                                 "` first)");
}

data::LabeledDataset load_split(const ExperimentConfig& cfg, const std::string& root,
                                const std::string& split) {
    require_dir((fs::path(root) / split).string(), "corpus split", "gen-data");
    return data::load_dataset(root, split, cfg.img_size, cfg.channels);
}

// Class-stratified cap: round-robin over per-class index lists so a small
// eval_limit still sees every class, then restore dataset order.
data::LabeledDataset limited(const ExperimentConfig& cfg, data::LabeledDataset ds) {
    size_t limit = static_cast<size_t>(cfg.eval_limit);
    if (cfg.eval_limit <= 0 || limit >= ds.size()) return ds;
    std::vector<std::vector<size_t>> per_class(ds.class_names.size());
    for (size_t i = 0; i < ds.size(); ++i) per_class[ds.labels[i]].push_back(i);
    std::vector<size_t> picked;
    for (size_t round = 0; picked.size() < limit; ++round) {
        bool any = false;
        for (const auto& bucket : per_class) {
            if (round < bucket.size()) {
                any = true;
                picked.push_back(bucket[round]);
                if (picked.size() == limit) break;
            }
        }
        if (!any) break;
    }
    std::sort(picked.begin(), picked.end());
    return data::take_subset(ds, picked);
}

std::ofstream open_csv(const std::string& path) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    return out;
}

// PNG tree mirroring the synth corpus layout so load_dataset reads it back.
void write_dataset_tree(const std::string& root, const std::string& split,
                        const data::LabeledDataset& ds) {
    char name[32];
    for (int c = 0; c < ds.num_classes(); ++c) {
        const fs::path dir = fs::path(root) / split / ds.class_names[static_cast<size_t>(c)];
        fs::create_directories(dir);
        int serial = 0;
        for (size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] != c) continue;
            std::snprintf(name, sizeof name, "%04d.png", serial++);
            data::write_png((dir / name).string(), ds.image(i));
        }
    }
}

perceptual::SourceClassifier load_classifier(const ExperimentConfig& cfg) {
    require_file(cfg.classifier_path(), "classifier checkpoint", "train-classifier");
    return perceptual::SourceClassifier::load(cfg.classifier_path());
}

vae::VaeModel load_vae(const ExperimentConfig& cfg) {
    require_file(cfg.vae_path(), "VAE checkpoint", "train-vae");
    return vae::VaeModel::load(cfg.vae_path());
}

metrics::FeatureSet latent_set(const std::vector<search::AdaptationResult>& results,
                               const std::string& tag) {
    metrics::FeatureSet fs;
    fs.domain_tag = tag;
    for (const auto& r : results) {
        if (r.failed) continue;
        fs.vectors.emplace_back(r.z_final.data(), r.z_final.data() + r.z_final.size());
    }
    return fs;
}

data::LabeledDataset clone_set(const std::vector<search::AdaptationResult>& results,
                               const data::LabeledDataset& like, const std::string& tag) {
    size_t n = 0;
    for (const auto& r : results)
        if (!r.failed) ++n;
    data::LabeledDataset out;
    out.class_names = like.class_names;
    out.domain_tag = tag;
    out.images = TensorF({static_cast<int>(n), like.height(), like.width(), like.channels()});
    out.labels.reserve(n);
    size_t j = 0;
    for (const auto& r : results) {
        if (r.failed) continue;
        out.labels.push_back(r.true_class);
        out.set_image(j++, r.clone);
    }
    return out;
}

void write_latents_csv(const metrics::FeatureSet& set, const std::vector<int>& labels,
                       std::ofstream& out) {
    size_t j = 0;
    for (const auto& v : set.vectors) {
        for (float x : v) out << fmt_real(x) << ",";
        out << (j < labels.size() ? labels[j] : -1) << "," << set.domain_tag << "\n";
        ++j;
    }
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& cfg) {
    const int n_train = static_cast<int>(std::lround(cfg.per_class * cfg.train_fraction));
    const int n_test = cfg.per_class - n_train;
    if (n_train < 1 || n_test < 1)
        throw std::invalid_argument("data.per_class and data.train_fraction leave an empty split");

    data::SynthConfig sc;
    sc.img_size = cfg.img_size;
    sc.channels = cfg.channels;

    sc.per_class = n_train;
    sc.seed = cfg.data_seed("source-train");
    data::write_corpus(cfg.source_root(), "train", sc);

    sc.per_class = n_test;
    sc.seed = cfg.data_seed("source-test");
    data::write_corpus(cfg.source_root(), "test", sc);
    std::printf("source corpus: %d train + %d test per class -> %s\n", n_train, n_test,
                cfg.source_root().c_str());

    // Target content is drawn fresh (not re-shifted source images), then each
    // preset's photometric shift is applied to the same underlying samples.
    sc.per_class = n_test;
    sc.seed = cfg.data_seed("target-content");
    const data::LabeledDataset content = data::synth_dataset(sc, "target");
    for (const auto& [name, shift] : cfg.shifts) {
        data::LabeledDataset shifted = data::apply_shift(content, shift, name);
        write_dataset_tree(cfg.target_root(name), "test", shifted);
        std::printf("target corpus '%s': %d per class -> %s\n", name.c_str(), n_test,
                    cfg.target_root(name).c_str());
    }
    write_resolved_config(cfg, "gen-data");
}

void cmd_train_classifier(const ExperimentConfig& cfg) {
    const data::LabeledDataset train = load_split(cfg, cfg.source_root(), "train");
    const data::LabeledDataset test = load_split(cfg, cfg.source_root(), "test");

    perceptual::ClassifierArch arch;
    arch.img = cfg.img_size;
    arch.channels = cfg.channels;
    arch.num_classes = train.num_classes();
    arch.width = cfg.clf_width;
    arch.feature_layer_index = cfg.clf_feature_layer;

    perceptual::TrainConfig tc = cfg.clf_train;
    fs::create_directories(cfg.out_dir);
    tc.log_path = (fs::path(cfg.out_dir) / "classifier-train.csv").string();

    perceptual::SourceClassifier clf = perceptual::train_classifier(train, test, arch, tc);
    clf.save(cfg.classifier_path());
    std::printf("classifier: train acc %.4f, test acc %.4f -> %s\n",
                perceptual::accuracy(clf, train), perceptual::accuracy(clf, test),
                cfg.classifier_path().c_str());
    write_resolved_config(cfg, "train-classifier");
}

void cmd_train_vae(const ExperimentConfig& cfg) {
    const data::LabeledDataset train = load_split(cfg, cfg.source_root(), "train");

    std::optional<perceptual::SourceClassifier> clf;
    if (cfg.vae_train.perceptual_weight > 0) clf.emplace(load_classifier(cfg));

    vae::TrainVaeConfig vc = cfg.vae_train;
    fs::create_directories(cfg.out_dir);
    vc.log_path = (fs::path(cfg.out_dir) / "vae-train.csv").string();

    vae::VaeModel model = vae::train_vae(train, clf ? &*clf : nullptr, cfg.vae_arch, vc);
    model.save(cfg.vae_path());
    std::printf("vae: %d epochs on %zu images -> %s\n", vc.epochs, train.size(),
                cfg.vae_path().c_str());
    write_resolved_config(cfg, "train-vae");
}

void cmd_adapt(const ExperimentConfig& cfg, const std::string& target) {
    const std::string name = target.empty() ? cfg.shift_name : target;
    perceptual::SourceClassifier clf = load_classifier(cfg);
    vae::VaeModel model = load_vae(cfg);

    data::LabeledDataset targets =
        name == "source-test" ? load_split(cfg, cfg.source_root(), "test")
                              : load_split(cfg, cfg.target_root(name), "test");
    targets = limited(cfg, std::move(targets));

    const search::AdaptationSummary summary =
        search::adapt_and_classify(model, clf, targets, cfg.search);

    fs::create_directories(fs::path(cfg.out_dir) / "adapt");
    const std::string csv = (fs::path(cfg.out_dir) / "adapt" / (name + ".csv")).string();
    search::write_adaptation_report(summary, csv);
    if (cfg.dump_clones)
        search::dump_clones(summary, (fs::path(cfg.out_dir) / "adapt" / ("clones-" + name)).string());

    std::printf("adapt '%s': %zu images, source-only acc %.4f, adapted acc %.4f, %zu failures -> %s\n",
                name.c_str(), targets.size(), summary.source_only_accuracy,
                summary.adapted_accuracy, summary.failures, csv.c_str());
    write_resolved_config(cfg, "adapt");
}

void cmd_eval(const ExperimentConfig& cfg) {
    perceptual::SourceClassifier clf = load_classifier(cfg);
    vae::VaeModel model = load_vae(cfg);

    data::LabeledDataset src_test = limited(cfg, load_split(cfg, cfg.source_root(), "test"));
    data::LabeledDataset tgt_test =
        limited(cfg, load_split(cfg, cfg.target_root(cfg.shift_name), "test"));

    const double only_src = perceptual::accuracy(clf, src_test);
    const double only_tgt = perceptual::accuracy(clf, tgt_test);

    const search::AdaptationSummary on_src =
        search::adapt_and_classify(model, clf, src_test, cfg.search);
    const search::AdaptationSummary on_tgt =
        search::adapt_and_classify(model, clf, tgt_test, cfg.search);

    const fs::path dir = fs::path(cfg.out_dir) / "eval";
    fs::create_directories(dir);
    search::write_adaptation_report(on_src, (dir / "adapt-source-test.csv").string());
    search::write_adaptation_report(on_tgt, (dir / ("adapt-" + cfg.shift_name + ".csv")).string());

    // Latent-space discrepancy: encodings vs searched codes, both against the
    // source encodings.
    const metrics::FeatureSet src_enc = metrics::encode_features(model, src_test, "source");
    const metrics::FeatureSet tgt_enc = metrics::encode_features(model, tgt_test, "target-raw");
    const metrics::FeatureSet src_z = latent_set(on_src.results, "source-clone");
    const metrics::FeatureSet tgt_z = latent_set(on_tgt.results, "target-clone");

    const double da_src_raw = metrics::a_distance(src_enc, src_enc, cfg.metric_folds);
    const double da_src_clone = metrics::a_distance(src_enc, src_z, cfg.metric_folds);
    const double da_tgt_raw = metrics::a_distance(src_enc, tgt_enc, cfg.metric_folds);
    const double da_tgt_clone = metrics::a_distance(src_enc, tgt_z, cfg.metric_folds);

    // Image-quality distance in classifier feature space.
    const metrics::FeatureSet src_feat = metrics::classifier_features(clf, src_test, "source");
    const data::LabeledDataset src_clones = clone_set(on_src.results, src_test, "source-clone");
    const data::LabeledDataset tgt_clones = clone_set(on_tgt.results, tgt_test, "target-clone");
    const double fr_src_raw = 0.0;  // distance of the source features to themselves
    const double fr_src_clone = metrics::frechet_feature_distance(
        src_feat, metrics::classifier_features(clf, src_clones, "source-clone"));
    const double fr_tgt_raw = metrics::frechet_feature_distance(
        src_feat, metrics::classifier_features(clf, tgt_test, "target-raw"));
    const double fr_tgt_clone = metrics::frechet_feature_distance(
        src_feat, metrics::classifier_features(clf, tgt_clones, "target-clone"));

    std::ofstream out = open_csv((dir / "summary.csv").string());
    out << kFeatureNote;
    out << "domain,source_only_accuracy,adapted_accuracy,a_distance_raw,a_distance_clone,"
           "frechet_raw,frechet_clone\n";
    out << "source-test," << fmt_real(only_src) << "," << fmt_real(on_src.adapted_accuracy) << ","
        << fmt_real(da_src_raw) << "," << fmt_real(da_src_clone) << "," << fmt_real(fr_src_raw)
        << "," << fmt_real(fr_src_clone) << "\n";
    out << cfg.shift_name << "," << fmt_real(only_tgt) << ","
        << fmt_real(on_tgt.adapted_accuracy) << "," << fmt_real(da_tgt_raw) << ","
        << fmt_real(da_tgt_clone) << "," << fmt_real(fr_tgt_raw) << "," << fmt_real(fr_tgt_clone)
        << "\n";
    out.close();

    // Embedding exports: configured mode for the raw corpora, plus the
    // searched codes the adaptation actually used.
    const metrics::EmbedMode mode = metrics::parse_embed_mode(cfg.embed_mode);
    metrics::export_embeddings(model, src_test, mode, cfg.search,
                               (dir / "embeddings-source.csv").string());
    metrics::export_embeddings(model, tgt_test, mode, cfg.search,
                               (dir / ("embeddings-" + cfg.shift_name + ".csv")).string());
    {
        std::ofstream ez = open_csv((dir / "embeddings-clones.csv").string());
        for (int i = 0; i < model.arch().latent; ++i) ez << "z" << i << ",";
        ez << "class_id,domain\n";
        std::vector<int> src_labels, tgt_labels;
        for (const auto& r : on_src.results)
            if (!r.failed) src_labels.push_back(r.true_class);
        for (const auto& r : on_tgt.results)
            if (!r.failed) tgt_labels.push_back(r.true_class);
        write_latents_csv(src_z, src_labels, ez);
        write_latents_csv(tgt_z, tgt_labels, ez);
    }

    std::printf("eval source-test: source-only %.4f, adapted %.4f\n", only_src,
                on_src.adapted_accuracy);
    std::printf("eval %s: source-only %.4f, adapted %.4f\n", cfg.shift_name.c_str(), only_tgt,
                on_tgt.adapted_accuracy);
    std::printf("a-distance to source encodings: raw %.4f, clone %.4f\n", da_tgt_raw,
                da_tgt_clone);
    std::printf("feature distance to source: raw %.4f, clone %.4f\n", fr_tgt_raw, fr_tgt_clone);
    std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
    write_resolved_config(cfg, "eval");
}

namespace {

// One grid cell of the ablation. Decoding feeds either the target's edge map
// or a zero map, matching how the cell's VAE variant was trained.
class EdgeOptionalDecoder : public search::FrozenDecoder {
  public:
    EdgeOptionalDecoder(vae::VaeModel& m, const TensorF& target, bool use_edges) : model_(m) {
        const vae::VaeArch& a = m.arch();
        if (use_edges) {
            edges_ = edge::sobel_edges(target);
            edges_.reshape({1, a.img, a.img, 2 * a.channels});
        } else {
            edges_ = TensorF({1, a.img, a.img, 2 * a.channels});
        }
    }
    int latent_dim() const override { return model_.arch().latent; }
    TensorF decode(const TensorF& z) override {
        TensorF zb = z;
        zb.reshape({1, latent_dim()});
        TensorF out = model_.decode(zb, edges_);
        const vae::VaeArch& a = model_.arch();
        out.reshape({a.img, a.img, a.channels});
        return out;
    }
    TensorF backward(const TensorF& dxhat) override {
        const vae::VaeArch& a = model_.arch();
        TensorF d = dxhat;
        d.reshape({1, a.img, a.img, a.channels});
        TensorF dz = model_.decoder_backward(d, /*want_param_grads=*/false);
        dz.reshape({a.latent});
        return dz;
    }

  private:
    vae::VaeModel& model_;
    TensorF edges_;
};

struct AblationCell {
    double adapted_accuracy = 0.0;
    size_t failures = 0;
};

// Adapted accuracy of one grid cell. With latent search off, the clone is the
// model's own reconstruction of the target.
AblationCell run_cell(vae::VaeModel& m, perceptual::SourceClassifier& clf,
                      const data::LabeledDataset& targets, const ExperimentConfig& cfg,
                      bool use_edges, bool latent_search_on, ssim::LossKind loss, int window) {
    AblationCell cell;
    size_t correct = 0, counted = 0;
    search::SearchConfig sc = cfg.search;
    sc.loss = loss;
    sc.ssim_cfg.window_size = window;
    for (size_t i = 0; i < targets.size(); ++i) {
        const TensorF img = targets.image(i);
        TensorF clone;
        if (latent_search_on) {
            EdgeOptionalDecoder dec(m, img, use_edges);
            search::SearchConfig per = sc;
            per.init_seed = derive_seed(sc.init_seed, "search-init", i);
            TensorF init_z;
            const TensorF* init = nullptr;
            if (per.init_from_encoder) {
                TensorF b = img;
                b.reshape({1, targets.height(), targets.width(), targets.channels()});
                init_z = m.encode(b).mu;
                init_z.reshape({m.arch().latent});
                init = &init_z;
            }
            try {
                clone = search::latent_search(dec, img, per, init).clone;
            } catch (const std::runtime_error&) {
                ++cell.failures;
                continue;
            }
        } else {
            TensorF b = img;
            b.reshape({1, targets.height(), targets.width(), targets.channels()});
            const vae::PosteriorParams p = m.encode(b);
            EdgeOptionalDecoder dec(m, img, use_edges);
            TensorF mu = p.mu;
            mu.reshape({m.arch().latent});
            clone = dec.decode(mu);
        }
        const auto [pred, probs] = clf.predict(clone);
        correct += pred == targets.labels[i] ? 1u : 0u;
        ++counted;
    }
    cell.adapted_accuracy = counted ? static_cast<double>(correct) / counted : 0.0;
    return cell;
}

}  // namespace

void cmd_ablate(const ExperimentConfig& cfg) {
    perceptual::SourceClassifier clf = load_classifier(cfg);
    const data::LabeledDataset train = load_split(cfg, cfg.source_root(), "train");
    const data::LabeledDataset targets =
        limited(cfg, load_split(cfg, cfg.target_root(cfg.shift_name), "test"));
    const double source_only = perceptual::accuracy(clf, targets);

    // One VAE per (edge, perceptual) combination; search settings reuse them.
    std::map<std::pair<bool, bool>, vae::VaeModel> models;
    for (bool edge : {true, false})
        for (bool perc : {true, false}) {
            vae::TrainVaeConfig vc = cfg.vae_train;
            vc.use_edges = edge;
            vc.perceptual_weight = perc ? cfg.vae_train.perceptual_weight : 0.0;
            vc.log_path.clear();
            std::printf("ablate: training VAE variant edge=%d perceptual=%d\n", edge, perc);
            std::fflush(stdout);
            models.emplace(std::make_pair(edge, perc),
                           vae::train_vae(train, vc.perceptual_weight > 0 ? &clf : nullptr,
                                          cfg.vae_arch, vc));
        }

    struct Row {
        std::string group;
        bool edge, perc, ls;
        ssim::LossKind loss;
        int window;
    };
    const ssim::LossKind base_loss = cfg.search.loss;
    const int base_window = cfg.ssim.window_size;
    std::vector<Row> rows;
    for (bool edge : {true, false})
        for (bool perc : {true, false})
            for (bool ls : {true, false})
                rows.push_back({"component", edge, perc, ls, base_loss, base_window});
    for (ssim::LossKind k : {ssim::LossKind::ssim, ssim::LossKind::mse, ssim::LossKind::mae})
        rows.push_back({"loss", true, true, true, k, base_window});
    for (int w : {3, 7, 11, 15}) rows.push_back({"window", true, true, true, base_loss, w});

    const char* loss_names[] = {"ssim", "mse", "mae"};
    std::map<std::tuple<bool, bool, bool, int, int>, AblationCell> cache;
    std::ofstream out = open_csv((fs::path(cfg.out_dir) / "ablate" / "summary.csv").string());
    out << "group,edge,perceptual,latent_search,loss,window,source_only_accuracy,"
           "adapted_accuracy,failures\n";
    for (const Row& r : rows) {
        const auto key = std::make_tuple(r.edge, r.perc, r.ls, static_cast<int>(r.loss), r.window);
        auto it = cache.find(key);
        if (it == cache.end()) {
            std::printf("ablate: cell edge=%d perceptual=%d ls=%d loss=%s window=%d\n", r.edge,
                        r.perc, r.ls, loss_names[static_cast<int>(r.loss)], r.window);
            std::fflush(stdout);
            AblationCell cell = run_cell(models.at({r.edge, r.perc}), clf, targets, cfg, r.edge,
                                         r.ls, r.loss, r.window);
            it = cache.emplace(key, cell).first;
        }
        out << r.group << "," << (r.edge ? 1 : 0) << "," << (r.perc ? 1 : 0) << ","
            << (r.ls ? 1 : 0) << "," << loss_names[static_cast<int>(r.loss)] << "," << r.window
            << "," << fmt_real(source_only) << "," << fmt_real(it->second.adapted_accuracy) << ","
            << it->second.failures << "\n";
    }
    out.close();
    std::printf("wrote %s\n", (fs::path(cfg.out_dir) / "ablate" / "summary.csv").string().c_str());
    write_resolved_config(cfg, "ablate");
}

void cmd_lemma1(const ExperimentConfig& cfg) {
    const std::vector<metrics::Lemma1Row> rows =
        metrics::lemma1_demo(cfg.lemma1_dim, cfg.lemma1_n, cfg.lemma1_trials,
                             cfg.stage_seed("lemma1"));
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "lemma1.csv").string();
    metrics::write_lemma1_table(rows, path);
    for (const auto& r : rows)
        std::printf("n=%d mean_nn_distance=%.6f std=%.6f\n", r.n, r.mean_nn_distance, r.std_dev);
    std::printf("wrote %s\n", path.c_str());
    write_resolved_config(cfg, "lemma1");
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

void cmd_report(const ExperimentConfig& cfg) {
    const fs::path out_root(cfg.out_dir);
    std::vector<std::string> lines;  // series,x,value

    const fs::path eval_csv = out_root / "eval" / "summary.csv";
    if (fs::is_regular_file(eval_csv)) {
        const auto rows = read_csv_rows(eval_csv.string());
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            for (size_t c = 1; c < r.size() && c < rows[0].size(); ++c)
                lines.push_back("eval." + rows[0][c] + "," + r[0] + "," + r[c]);
        }
    }

    const fs::path ablate_csv = out_root / "ablate" / "summary.csv";
    if (fs::is_regular_file(ablate_csv)) {
        const auto rows = read_csv_rows(ablate_csv.string());
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 9) continue;
            const std::string label = r[0] + ":edge" + r[1] + "-perc" + r[2] + "-ls" + r[3] +
                                      "-" + r[4] + "-w" + r[5];
            lines.push_back("ablate.adapted_accuracy," + label + "," + r[7]);
            lines.push_back("ablate.source_only_accuracy," + label + "," + r[6]);
        }
    }

    const fs::path lemma_csv = out_root / "lemma1.csv";
    if (fs::is_regular_file(lemma_csv)) {
        const auto rows = read_csv_rows(lemma_csv.string());
        for (size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].size() < 3) continue;
            lines.push_back("lemma1.mean_nn_distance," + rows[i][0] + "," + rows[i][1]);
            lines.push_back("lemma1.std," + rows[i][0] + "," + rows[i][2]);
        }
    }

    const fs::path adapt_dir = out_root / "adapt";
    if (fs::is_directory(adapt_dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(adapt_dir))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            const auto rows = read_csv_rows(f.string());
            size_t ok = 0, src_hit = 0, ad_hit = 0;
            double loss_sum = 0;
            for (size_t i = 1; i < rows.size(); ++i) {
                const auto& r = rows[i];
                if (r.size() < 6) continue;
                const int truth = std::atoi(r[1].c_str());
                const int src = std::atoi(r[2].c_str());
                const int ad = std::atoi(r[3].c_str());
                if (ad < 0) continue;  // failed search rows carry no clone
                ++ok;
                src_hit += src == truth ? 1u : 0u;
                ad_hit += ad == truth ? 1u : 0u;
                loss_sum += std::atof(r[4].c_str());
            }
            if (!ok) continue;
            const std::string name = f.stem().string();
            lines.push_back("adapt.source_only_accuracy," + name + "," +
                            fmt_real(static_cast<double>(src_hit) / ok));
            lines.push_back("adapt.adapted_accuracy," + name + "," +
                            fmt_real(static_cast<double>(ad_hit) / ok));
            lines.push_back("adapt.mean_final_loss," + name + "," + fmt_real(loss_sum / ok));
        }
    }

    if (lines.empty())
        throw std::runtime_error("nothing to report: no eval, ablate, lemma1, or adapt CSVs under " +
                                 cfg.out_dir);

    std::ofstream out = open_csv((out_root / "report" / "long.csv").string());
    out << kFeatureNote;
    out << "series,x,value\n";
    for (const std::string& l : lines) out << l << "\n";
    out.close();
    std::printf("wrote %s (%zu rows)\n", (out_root / "report" / "long.csv").string().c_str(),
                lines.size());
    write_resolved_config(cfg, "report");
}

}  // namespace lsda::cli
