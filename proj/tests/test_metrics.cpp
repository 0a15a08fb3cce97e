#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "lsda/data/synth.hpp"
#include "lsda/metrics/domain_metrics.hpp"

using namespace lsda;

namespace {

metrics::FeatureSet gaussian_set(int n, int d, double mean, double sd, uint64_t seed,
                                 const std::string& tag) {
    metrics::FeatureSet s;
    s.domain_tag = tag;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        std::vector<float> v(static_cast<size_t>(d));
        for (float& x : v) x = static_cast<float>(rng.normal(mean, sd));
        s.vectors.push_back(std::move(v));
    }
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("a-distance hits the formula endpoints") {
    // Far-apart blobs: every fold separates perfectly, eps = 0, distance = 2.
    auto a = gaussian_set(60, 4, +5.0, 0.3, 11, "a");
    auto b = gaussian_set(60, 4, -5.0, 0.3, 12, "b");
    CHECK(metrics::a_distance(a, b, 5) == 2.0);

    // Identical sets: the hinge gradients of mirrored pairs cancel, the probe
    // stays at zero, and every fold errs on exactly the first set's half.
    auto c = gaussian_set(50, 4, 0.0, 1.0, 13, "c");
    auto c2 = c;
    c2.domain_tag = "c2";
    CHECK(metrics::a_distance(c, c2, 5) == 0.0);
}

TEST_CASE("a-distance calibration on same-distribution gaussians") {
    auto a = gaussian_set(500, 8, 0.0, 1.0, 21, "a");
    auto b = gaussian_set(500, 8, 0.0, 1.0, 22, "b");
    const double d = metrics::a_distance(a, b, 5);
    CHECK(d >= 0.0);
    CHECK(d <= 0.3);
}

TEST_CASE("a-distance grows with separation and stays in range") {
    auto base = gaussian_set(120, 6, 0.0, 1.0, 31, "a");
    const double weak = metrics::a_distance(base, gaussian_set(120, 6, 0.5, 1.0, 32, "b"), 5);
    const double strong = metrics::a_distance(base, gaussian_set(120, 6, 3.0, 1.0, 33, "b"), 5);
    CHECK(weak >= 0.0);
    CHECK(weak <= 2.0);
    CHECK(strong >= 0.0);
    CHECK(strong <= 2.0);
    CHECK(strong > weak);
}

TEST_CASE("a-distance rejects malformed inputs") {
    auto a = gaussian_set(20, 4, 0.0, 1.0, 41, "a");
    auto b = gaussian_set(20, 5, 0.0, 1.0, 42, "b");
    CHECK_THROWS_AS(metrics::a_distance(a, b, 5), std::invalid_argument);

    auto small = gaussian_set(9, 4, 0.0, 1.0, 43, "s");  // < 2*folds
    auto big = gaussian_set(20, 4, 0.0, 1.0, 44, "b");
    CHECK_THROWS_AS(metrics::a_distance(small, big, 5), std::invalid_argument);
    CHECK_THROWS_AS(metrics::a_distance(big, small, 5), std::invalid_argument);
    CHECK_THROWS_AS(metrics::a_distance(big, big, 1), std::invalid_argument);

    metrics::FeatureSet empty;
    CHECK_THROWS_AS(metrics::a_distance(empty, big, 5), std::invalid_argument);
}

TEST_CASE("frechet distance is zero on itself and symmetric") {
    auto a = gaussian_set(200, 5, 0.3, 1.4, 51, "a");
    CHECK(metrics::frechet_feature_distance(a, a) <= 1e-6);

    auto b = gaussian_set(220, 5, -0.2, 0.9, 52, "b");
    const double ab = metrics::frechet_feature_distance(a, b);
    const double ba = metrics::frechet_feature_distance(b, a);
    CHECK(ab > 0.0);
    CHECK(std::abs(ab - ba) < 1e-9);

    // A permutation shares both moments exactly.
    auto p = a;
    std::reverse(p.vectors.begin(), p.vectors.end());
    CHECK(metrics::frechet_feature_distance(a, p) <= 1e-6);
}

TEST_CASE("frechet distance matches the closed form for shifted gaussians") {
    // Equal covariances cancel: the distance reduces to the squared mean gap.
    auto a = gaussian_set(10000, 1, 0.0, 1.0, 61, "a");
    auto b = gaussian_set(10000, 1, 1.0, 1.0, 62, "b");
    const double d = metrics::frechet_feature_distance(a, b);
    CHECK(d == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("frechet distance needs dim + 1 samples per side") {
    auto a = gaussian_set(4, 4, 0.0, 1.0, 71, "a");  // n == dim: rank-deficient
    auto b = gaussian_set(50, 4, 0.0, 1.0, 72, "b");
    CHECK_THROWS_AS(metrics::frechet_feature_distance(a, b), std::invalid_argument);
    CHECK_THROWS_AS(metrics::frechet_feature_distance(b, a), std::invalid_argument);
}

TEST_CASE("nearest-neighbor distance shrinks as the sample grows") {
    const auto rows = metrics::lemma1_demo(2, {10, 100, 1000, 10000}, 100, 9);
    REQUIRE(rows.size() == 4);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].mean_nn_distance > 0.0);
        CHECK(rows[i].std_dev >= 0.0);
        if (i > 0) CHECK(rows[i].mean_nn_distance < rows[i - 1].mean_nn_distance);
    }
}

TEST_CASE("single-sample distances match the analytic uniform moments") {
    // n=1, dim=1: the distance is |U - V| with E = 1/3, E^2 = 1/6,
    // E^4 = 1/15. Both sample moments must sit within 3 standard errors.
    const int trials = 4000;
    const auto rows = metrics::lemma1_demo(1, {1}, trials, 17);
    REQUIRE(rows.size() == 1);

    const double se_mean = std::sqrt((1.0 / 18.0) / trials);
    CHECK(std::abs(rows[0].mean_nn_distance - 1.0 / 3.0) <= 3.0 * se_mean);

    const double m2 = rows[0].std_dev * rows[0].std_dev +
                      rows[0].mean_nn_distance * rows[0].mean_nn_distance;
    const double se_m2 = std::sqrt((7.0 / 180.0) / trials);
    CHECK(std::abs(m2 - 1.0 / 6.0) <= 3.0 * se_m2);
}

TEST_CASE("lemma table is deterministic and validated") {
    const auto r1 = metrics::lemma1_demo(2, {10, 50}, 30, 123);
    const auto r2 = metrics::lemma1_demo(2, {10, 50}, 30, 123);
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].mean_nn_distance == r2[i].mean_nn_distance);
        CHECK(r1[i].std_dev == r2[i].std_dev);
    }

    CHECK_THROWS_AS(metrics::lemma1_demo(0, {10}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(metrics::lemma1_demo(2, {}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(metrics::lemma1_demo(2, {10, 10}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(metrics::lemma1_demo(2, {10, 5}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(metrics::lemma1_demo(2, {10}, 0, 1), std::invalid_argument);

    const std::string path = "/tmp/lsda-lemma1.csv";
    metrics::write_lemma1_table(r1, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "n,mean_nn_distance,std");
    int data_rows = 0;
    for (std::string line; std::getline(in, line) && !line.empty();) ++data_rows;
    CHECK(data_rows == 2);
}

TEST_CASE("embedding export writes latent + class + domain columns") {
    data::SynthConfig sc;
    sc.per_class = 3;
    sc.img_size = 8;
    sc.seed = 5;
    auto ds = data::synth_dataset(sc, "deskA");

    vae::VaeArch a;
    a.img = 8;
    a.latent = 4;
    a.trunk = 4;
    a.refine = 4;
    a.fc = 16;
    vae::VaeModel m(a, 77);

    const std::string path = "/tmp/lsda-embed.csv";
    metrics::export_embeddings(m, ds, metrics::EmbedMode::encode, {}, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "z0,z1,z2,z3,class_id,domain");

    int rows = 0;
    for (std::string line; std::getline(in, line) && !line.empty(); ++rows) {
        size_t commas = 0;
        for (char c : line) commas += c == ',';
        CHECK(commas == 5);  // d_z + 2 columns
        const size_t tag_at = line.rfind(",deskA");
        REQUIRE(tag_at != std::string::npos);
        const size_t cls_at = line.rfind(',', tag_at - 1);
        CHECK(std::stoi(line.substr(cls_at + 1, tag_at - cls_at - 1)) == ds.labels[rows]);
    }
    CHECK(rows == static_cast<int>(ds.size()));

    const std::string again = "/tmp/lsda-embed2.csv";
    metrics::export_embeddings(m, ds, metrics::EmbedMode::encode, {}, again);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("search-mode embedding export is deterministic") {
    data::SynthConfig sc;
    sc.per_class = 2;
    sc.img_size = 16;
    sc.seed = 6;
    auto ds = data::synth_dataset(sc, "deskB");

    vae::VaeArch a;
    a.img = 16;
    a.latent = 4;
    a.trunk = 4;
    a.refine = 4;
    a.fc = 16;
    vae::VaeModel m(a, 78);

    search::SearchConfig cfg;
    cfg.iterations = 3;
    cfg.init_seed = 40;

    const std::string p1 = "/tmp/lsda-embed-s1.csv";
    const std::string p2 = "/tmp/lsda-embed-s2.csv";
    metrics::export_embeddings(m, ds, metrics::EmbedMode::search, cfg, p1);
    metrics::export_embeddings(m, ds, metrics::EmbedMode::search, cfg, p2);
    CHECK(slurp(p1) == slurp(p2));

    std::ifstream in(p1);
    int lines = 0;
    for (std::string line; std::getline(in, line) && !line.empty();) ++lines;
    CHECK(lines == 1 + static_cast<int>(ds.size()));

    CHECK_THROWS_AS(metrics::parse_embed_mode("latent"), std::invalid_argument);
    CHECK(metrics::parse_embed_mode("encode") == metrics::EmbedMode::encode);
    CHECK(metrics::parse_embed_mode("search") == metrics::EmbedMode::search);
}

TEST_CASE("classifier features pool to one channel vector per image") {
    data::SynthConfig sc;
    sc.per_class = 2;
    sc.img_size = 8;
    sc.seed = 7;
    auto ds = data::synth_dataset(sc, "src");

    perceptual::ClassifierArch ca;
    ca.img = 8;
    ca.width = 4;
    perceptual::SourceClassifier clf(ca, 3);

    auto fs = metrics::classifier_features(clf, ds, "src");
    CHECK(fs.vectors.size() == ds.size());
    CHECK(fs.dim() == clf.feature_shape()[2]);
    CHECK(fs.domain_tag == "src");

    // Pooling preserves the feature block's per-channel mean.
    auto [fh, fw, fc] = clf.feature_shape();
    TensorF one = ds.image(0);
    one.reshape({1, 8, 8, 3});
    TensorF feat = clf.features(one);
    double want = 0;
    for (int p = 0; p < fh * fw; ++p) want += feat[static_cast<size_t>(p * fc)];
    want /= fh * fw;
    CHECK(fs.vectors[0][0] == doctest::Approx(want).epsilon(1e-5));
}
