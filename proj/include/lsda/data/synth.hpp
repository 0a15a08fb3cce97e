#pragma once

#include <cstdint>
#include <string>

#include "lsda/data/dataset.hpp"

namespace lsda::data {

// Procedural four-class shape corpus (disk, ring, square, triangle) used as
// the desk-scale stand-in for a real labeled image set. The class signal is
// geometry only: foreground/background colors are drawn from the same
// palette for every class, so photometric domain shifts cannot leak label
// information, while shape outlines survive them.
struct SynthConfig {
    int per_class = 250;
    int img_size = 32;
    int channels = 3;
    uint64_t seed = 0;
};

// Item i of a given config is a pure function of (seed, class, i): corpora of
// different sizes share a common prefix per class.
LabeledDataset synth_dataset(const SynthConfig& cfg, const std::string& domain_tag);

// Render one sample (used by tests to probe individual classes).
TensorF synth_image(int class_id, int img_size, int channels, uint64_t seed);

// Write a corpus as a PNG tree `root/<split>/<class>/%04d.png`.
void write_corpus(const std::string& root, const std::string& split, const SynthConfig& cfg);

}  // namespace lsda::data
