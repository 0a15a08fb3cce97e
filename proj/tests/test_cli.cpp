#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string output;  // stdout and stderr merged
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(LSDA_CLI_PATH) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    RunResult r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lsda-cli-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Seconds-scale settings: 16 px, 8 images per class, token training runs.
std::string tiny(const fs::path& dir) {
    return "seed=3 data.dir=" + (dir / "data").string() + " output.dir=" + (dir / "out").string() +
           " data.per_class=8 data.img_size=16 data.train_fraction=0.75"
           " classifier.width=4 classifier.epochs=3 classifier.batch_size=8"
           " vae.latent=8 vae.trunk=6 vae.refine=4 vae.fc=32 vae.epochs=2 vae.batch_size=8"
           " search.iterations=3 metrics.folds=2 metrics.lemma1_trials=5 metrics.lemma1_n=10,30";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

size_t count_lines(const std::string& s) {
    size_t n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("help lists subcommands and every config key group") {
    RunResult r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* cmd : {"gen-data", "train-classifier", "train-vae", "adapt", "eval",
                            "ablate", "lemma1", "report"})
        CHECK(contains(r.output, cmd));
    for (const char* key : {"seed", "data.per_class", "vae.lr", "search.step_size",
                            "metrics.lemma1_n", "output.dir", "shift.<preset>"})
        CHECK(contains(r.output, key));
}

TEST_CASE("unknown subcommands and bad settings exit nonzero with a diagnostic") {
    CHECK(run_cli("frobnicate").code != 0);

    RunResult bad_key = run_cli("lemma1 not.a.key=1");
    CHECK(bad_key.code != 0);
    CHECK(contains(bad_key.output, "not.a.key"));

    RunResult bad_value = run_cli("lemma1 vae.lr=abc");
    CHECK(bad_value.code != 0);
    CHECK(contains(bad_value.output, "vae.lr"));
    CHECK(contains(bad_value.output, "abc"));

    RunResult no_file = run_cli("lemma1 -c /nonexistent/agents.ini");
    CHECK(no_file.code != 0);
    CHECK(contains(no_file.output, "/nonexistent/agents.ini"));

    const fs::path dir = fresh_dir("badconfig");
    std::ofstream(dir / "broken.ini") << "[data\n";
    RunResult bad_ini = run_cli("lemma1 -c " + (dir / "broken.ini").string());
    CHECK(bad_ini.code != 0);
    CHECK(contains(bad_ini.output, "line 1"));
}

TEST_CASE("pipeline stages fail fast naming the missing artifact") {
    const fs::path dir = fresh_dir("failfast");
    const std::string base = tiny(dir);

    RunResult no_corpus = run_cli("train-classifier " + base);
    CHECK(no_corpus.code != 0);
    CHECK(contains(no_corpus.output, (dir / "data").string()));
    CHECK(contains(no_corpus.output, "gen-data"));

    REQUIRE(run_cli("gen-data " + base).code == 0);

    RunResult no_clf = run_cli("eval " + base);
    CHECK(no_clf.code != 0);
    CHECK(contains(no_clf.output, (dir / "out" / "classifier.ckpt").string()));

    REQUIRE(run_cli("train-classifier " + base).code == 0);

    RunResult no_vae = run_cli("adapt " + base);
    CHECK(no_vae.code != 0);
    CHECK(contains(no_vae.output, (dir / "out" / "vae.ckpt").string()));

    RunResult no_report = run_cli("report " + base);
    CHECK(no_report.code != 0);
    CHECK(contains(no_report.output, "nothing to report"));
}

TEST_CASE("full pipeline writes the pinned artifact layout") {
    const fs::path dir = fresh_dir("pipeline");
    const std::string base = tiny(dir);
    const fs::path out = dir / "out";

    RunResult gen = run_cli("gen-data " + base);
    REQUIRE(gen.code == 0);
    CHECK(fs::is_directory(dir / "data" / "source" / "train"));
    CHECK(fs::is_directory(dir / "data" / "source" / "test"));
    for (const char* preset : {"domain-A", "domain-B", "domain-C"})
        CHECK(fs::is_directory(dir / "data" / "target" / preset / "test"));
    CHECK(fs::is_regular_file(out / "config-gen-data.ini"));

    REQUIRE(run_cli("train-classifier " + base).code == 0);
    CHECK(fs::is_regular_file(out / "classifier.ckpt"));
    CHECK(fs::is_regular_file(out / "classifier-train.csv"));

    REQUIRE(run_cli("train-vae " + base + " vae.perceptual_weight=0.25").code == 0);
    CHECK(fs::is_regular_file(out / "vae.ckpt"));
    CHECK(fs::is_regular_file(out / "vae-train.csv"));

    RunResult adapt = run_cli("adapt " + base + " output.dump_clones=true");
    REQUIRE(adapt.code == 0);
    const std::string adapt_csv = slurp(out / "adapt" / "domain-B.csv");
    CHECK(contains(adapt_csv,
                   "image_id,true_class,source_only_pred,adapted_pred,final_loss,iterations_used"));
    CHECK(count_lines(adapt_csv) == 1 + 8);  // header + 2 test images x 4 classes
    CHECK(fs::is_regular_file(out / "adapt" / "clones-domain-B" / "clone_0000.png"));

    RunResult adapt_src = run_cli("adapt --target source-test " + base);
    REQUIRE(adapt_src.code == 0);
    CHECK(fs::is_regular_file(out / "adapt" / "source-test.csv"));

    RunResult eval = run_cli("eval " + base);
    REQUIRE(eval.code == 0);
    const std::string summary = slurp(out / "eval" / "summary.csv");
    CHECK(summary.rfind("# note:", 0) == 0);  // deviation note leads the report
    CHECK(contains(summary, "domain,source_only_accuracy,adapted_accuracy,a_distance_raw,"
                            "a_distance_clone,frechet_raw,frechet_clone"));
    CHECK(contains(summary, "\nsource-test,"));
    CHECK(contains(summary, "\ndomain-B,"));
    CHECK(fs::is_regular_file(out / "eval" / "embeddings-source.csv"));
    CHECK(fs::is_regular_file(out / "eval" / "embeddings-domain-B.csv"));
    CHECK(fs::is_regular_file(out / "eval" / "embeddings-clones.csv"));

    REQUIRE(run_cli("lemma1 " + base).code == 0);
    const std::string lemma = slurp(out / "lemma1.csv");
    CHECK(contains(lemma, "n,mean_nn_distance,std"));
    CHECK(count_lines(lemma) == 1 + 2);  // two sample counts configured

    RunResult ablate = run_cli("ablate " + base);
    REQUIRE(ablate.code == 0);
    const std::string grid = slurp(out / "ablate" / "summary.csv");
    CHECK(contains(grid, "group,edge,perceptual,latent_search,loss,window,"
                         "source_only_accuracy,adapted_accuracy,failures"));
    CHECK(count_lines(grid) == 1 + 8 + 3 + 4);  // component grid + loss sweep + window sweep
    CHECK(contains(grid, "component,1,1,1,ssim,11"));
    CHECK(contains(grid, "loss,1,1,1,mae,11"));
    CHECK(contains(grid, "window,1,1,1,ssim,15"));

    RunResult report = run_cli("report " + base);
    REQUIRE(report.code == 0);
    const std::string lng = slurp(out / "report" / "long.csv");
    CHECK(lng.rfind("# note:", 0) == 0);
    CHECK(contains(lng, "series,x,value"));
    CHECK(contains(lng, "eval.adapted_accuracy,domain-B,"));
    CHECK(contains(lng, "ablate.adapted_accuracy,component:edge1-perc1-ls1-ssim-w11,"));
    CHECK(contains(lng, "lemma1.mean_nn_distance,10,"));
    CHECK(contains(lng, "adapt.adapted_accuracy,domain-B,"));
    CHECK(contains(lng, "adapt.adapted_accuracy,source-test,"));
}

TEST_CASE("identical config and seed reproduce result CSVs byte for byte") {
    const fs::path dir = fresh_dir("determinism");
    const std::string base = tiny(dir);
    REQUIRE(run_cli("gen-data " + base).code == 0);
    REQUIRE(run_cli("train-classifier " + base).code == 0);
    REQUIRE(run_cli("train-vae " + base).code == 0);
    REQUIRE(run_cli("adapt " + base).code == 0);
    REQUIRE(run_cli("lemma1 " + base).code == 0);
    const fs::path out = dir / "out";
    const std::string adapt1 = slurp(out / "adapt" / "domain-B.csv");
    const std::string lemma1 = slurp(out / "lemma1.csv");

    // Same commands, same config: every artifact must come back identical.
    REQUIRE(run_cli("adapt " + base).code == 0);
    REQUIRE(run_cli("lemma1 " + base).code == 0);
    CHECK(slurp(out / "adapt" / "domain-B.csv") == adapt1);
    CHECK(slurp(out / "lemma1.csv") == lemma1);

    // Full retrain from scratch in a sibling tree reproduces the same bytes.
    const fs::path dir2 = fresh_dir("determinism2");
    const std::string base2 = tiny(dir2);
    REQUIRE(run_cli("gen-data " + base2).code == 0);
    REQUIRE(run_cli("train-classifier " + base2).code == 0);
    REQUIRE(run_cli("train-vae " + base2).code == 0);
    REQUIRE(run_cli("adapt " + base2).code == 0);
    REQUIRE(run_cli("lemma1 " + base2).code == 0);
    CHECK(slurp(dir2 / "out" / "adapt" / "domain-B.csv") == adapt1);
    CHECK(slurp(dir2 / "out" / "lemma1.csv") == lemma1);
}

TEST_CASE("the resolved config reproduces itself through a rerun") {
    const fs::path dir = fresh_dir("roundtrip");
    const std::string base = tiny(dir);
    REQUIRE(run_cli("gen-data " + base +
                    " vae.lr=0.0005 data.shift=custom shift.custom.noise_sigma=0.02")
                .code == 0);
    const fs::path resolved = dir / "out" / "config-gen-data.ini";
    const std::string first = slurp(resolved);
    CHECK(contains(first, "shift = custom"));
    CHECK(contains(first, "[shift.custom]"));
    CHECK(fs::is_directory(dir / "data" / "target" / "custom" / "test"));

    // Feeding the resolved file back, with no overrides, must resolve to the
    // same bytes again.
    REQUIRE(run_cli("gen-data -c " + resolved.string()).code == 0);
    CHECK(slurp(resolved) == first);
}
