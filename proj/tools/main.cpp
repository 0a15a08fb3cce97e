#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsda/cli/commands.hpp"
#include "lsda/cli/config.hpp"
#include "lsda/core/parallel.hpp"

namespace {

struct Args {
    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 0;
    std::string adapt_target;
};

lsda::cli::ExperimentConfig make_config(const Args& a) {
    lsda::cli::KeyValues kv;
    if (!a.config_path.empty()) kv = lsda::cli::load_ini_file(a.config_path);
    return lsda::cli::resolve_config(kv, a.overrides);
}

void add_common(CLI::App* cmd, Args& a) {
    cmd->add_option("-c,--config", a.config_path, "INI config file; defaults apply without one");
    cmd->add_option("--jobs", a.jobs, "cap OpenMP worker threads (latent search and kernels)");
    cmd->add_option("overrides", a.overrides, "key=value config overrides, e.g. vae.lr=1e-4");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Domain adaptation by latent search over an edge-conditioned VAE.\n"
        "Pipeline: gen-data -> train-classifier -> train-vae -> adapt/eval/ablate -> report."};
    app.require_subcommand(1);
    app.footer(lsda::cli::config_key_help());

    Args args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate source and shifted target corpora");
    CLI::App* clf = app.add_subcommand("train-classifier", "train the source classifier");
    CLI::App* vae = app.add_subcommand("train-vae", "train the edge-conditioned VAE");
    CLI::App* adapt = app.add_subcommand("adapt", "latent search + classification on one target set");
    adapt->add_option("--target", args.adapt_target,
                      "shift preset name or 'source-test' (default: data.shift)");
    CLI::App* eval = app.add_subcommand("eval", "accuracy, discrepancy, and distance summary");
    CLI::App* ablate = app.add_subcommand("ablate", "component / loss / window ablation grid");
    CLI::App* lemma1 = app.add_subcommand("lemma1", "nearest-neighbor Monte Carlo table");
    CLI::App* report = app.add_subcommand("report", "aggregate result CSVs into one long table");
    for (CLI::App* c : {gen, clf, vae, adapt, eval, ablate, lemma1, report}) add_common(c, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (args.jobs > 0) lsda::parallel::set_threads(args.jobs);
        const lsda::cli::ExperimentConfig cfg = make_config(args);
        if (gen->parsed()) lsda::cli::cmd_gen_data(cfg);
        else if (clf->parsed()) lsda::cli::cmd_train_classifier(cfg);
        else if (vae->parsed()) lsda::cli::cmd_train_vae(cfg);
        else if (adapt->parsed()) lsda::cli::cmd_adapt(cfg, args.adapt_target);
        else if (eval->parsed()) lsda::cli::cmd_eval(cfg);
        else if (ablate->parsed()) lsda::cli::cmd_ablate(cfg);
        else if (lemma1->parsed()) lsda::cli::cmd_lemma1(cfg);
        else if (report->parsed()) lsda::cli::cmd_report(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
