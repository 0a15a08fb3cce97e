#pragma once

#include <string>

#include "lsda/cli/config.hpp"

namespace lsda::cli {

// Pipeline stages. Each returns normally on success and throws on failure:
// std::runtime_error for missing upstream artifacts or IO (message names the
// artifact), std::invalid_argument for bad settings. Every stage writes the
// resolved config to <out>/config-<command>.ini next to its outputs.

// Source corpus (train + test trees) plus one shifted target corpus per
// [shift.*] preset, all under data.dir.
void cmd_gen_data(const ExperimentConfig& cfg);

// Trains the source classifier; saves <out>/classifier.ckpt.
void cmd_train_classifier(const ExperimentConfig& cfg);

// Trains the edge-conditioned VAE; saves <out>/vae.ckpt. Needs the
// classifier checkpoint when the perceptual weight is nonzero.
void cmd_train_vae(const ExperimentConfig& cfg);

// Latent search + classification over one target set: a shift preset name,
// or "source-test" for the untouched source test split. Empty picks the
// configured data.shift. Writes <out>/adapt/<target>.csv and optionally the
// clone PNGs.
void cmd_adapt(const ExperimentConfig& cfg, const std::string& target = "");

// Source-only vs adapted accuracy on the source test split and the
// configured target, domain-discrepancy and feature-distance numbers, and
// latent embedding CSVs, all under <out>/eval/.
void cmd_eval(const ExperimentConfig& cfg);

// Component grid {edge} x {perceptual} x {latent search} plus search-loss and
// SSIM-window sweeps; one row each in <out>/ablate/summary.csv.
void cmd_ablate(const ExperimentConfig& cfg);

// Monte Carlo nearest-neighbor table to <out>/lemma1.csv.
void cmd_lemma1(const ExperimentConfig& cfg);

// Aggregates the CSVs present under <out> into one plot-ready long-format
// table <out>/report/long.csv.
void cmd_report(const ExperimentConfig& cfg);

}  // namespace lsda::cli
