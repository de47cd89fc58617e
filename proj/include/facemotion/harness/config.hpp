#pragma once

#include <filesystem>

#include "facemotion/codec/train.hpp"
#include "facemotion/curation/annotate.hpp"
#include "facemotion/curation/outliers.hpp"
#include "facemotion/curation/smoothing.hpp"
#include "facemotion/data/synthetic.hpp"
#include "facemotion/eval/retrieval.hpp"
#include "facemotion/gen/train.hpp"

namespace facemotion::harness {

// Whole-run configuration: one section per stage, every default from the
// module contracts, a single global seed. Unknown keys are rejected.
struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "runs/out";
    int verbosity = 1;
    int workers = 0;

    data::SyntheticSpec data;

    struct CurationSection {
        curation::OutlierConfig outliers;
        curation::SmoothingConfig smoothing;
        double pose_threshold = 0.05;
        double au_threshold = 0.25;
        int au_min_duration = 2;
        int retries = 2;
        int max_in_flight = 4;
        double min_request_interval_s = 0.0;
    } curation;

    struct CodecSection {
        codec::CodecConfig model;
        codec::CodecTrainConfig train;
    } codec;

    struct GeneratorSection {
        gen::GeneratorConfig model;
        gen::GenTrainConfig train;
        size_t vocab_words = 2000;
    } generator;

    struct EvalSection {
        eval::RetrievalConfig retrieval;
        eval::RetrievalTrainConfig retrieval_train;
        int rp_batches = 100;
        int diversity_pairs = 300;
        uint64_t vertex_seed = 2024;
    } eval;

    // "small" (acceptance, <= 30 min CPU) or "paper" (accelerator-sized).
    void apply_profile(const std::string& name);

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& path);
};

}  // namespace facemotion::harness
