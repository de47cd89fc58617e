#pragma once

#include <optional>

#include "facemotion/data/annotation.hpp"
#include "facemotion/data/audio.hpp"
#include "facemotion/data/manifest.hpp"
#include "facemotion/data/motion.hpp"

namespace facemotion::data {

// Named parametric motion motifs. Expression motifs are attack-sustain-release
// envelopes on designated channels (each tied to an action-unit id for the
// derived AU tracks); head-pose motifs are half-sine arcs on one neck axis;
// lip bursts follow the speech envelope of talking/singing entries.
struct MotifCatalog {
    static const std::vector<std::string>& expression_motifs();
    static const std::vector<std::string>& headpose_motifs();
    static const std::vector<std::string>& all_motifs();  // includes "neutral still"
};

struct SyntheticSpec {
    uint64_t seed = 7;
    int n_sequences = 100;
    // Enabled motif names; empty selects the full catalog. Unknown names are
    // a spec error.
    std::vector<std::string> motifs;
    std::array<double, 3> split_ratios{0.8, 0.05, 0.15};
};

// Generates motions, paired audio for talking/singing entries, ground-truth
// annotations, per-entry AU tracks and action/emotion labels, and the corpus
// manifest, all under out_dir. Pure function of (spec, out_dir contents).
CorpusManifest generate_synthetic_corpus(const SyntheticSpec& spec,
                                         const std::filesystem::path& out_dir);

}  // namespace facemotion::data
