#pragma once

#include <map>
#include <optional>

#include "facemotion/eval/retrieval.hpp"
#include "facemotion/gen/model.hpp"

namespace facemotion::eval {

enum class BenchmarkMode { bench1, bench2 };  // audio+text vs text-only

std::string to_string(BenchmarkMode mode);
BenchmarkMode benchmark_mode_from_string(const std::string& s);

struct MetricRow {
    RPrecision r_precision;
    double fid = 0.0;
    double matching = 0.0;  // audio matching in bench1, text matching in bench2
    double diversity = 0.0;
    std::optional<double> lve_mm;  // bench1 only
    std::optional<double> fve_mm;

    nlohmann::json to_json() const;
};

struct MetricReport {
    std::string mode;
    std::map<std::string, MetricRow> rows;  // "real", "reconstruction", "generated"
    size_t n_test = 0;
    uint64_t seed = 0;
    nlohmann::json config_echo;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
    std::string render_table() const;  // human-readable summary
};

struct BenchmarkConfig {
    int rp_batches = 100;
    int diversity_pairs = 300;
    int workers = 0;
    bool include_generated = true;  // off for retrieval-only sanity reports
};

// Full benchmark over the manifest's test split, with Real and VQ
// reconstruction control rows next to the generated row. bench1 conditions on
// audio+text and reports audio matching, LVE, FVE over audio-paired entries;
// bench2 conditions on text alone and reports text matching.
MetricReport evaluate_benchmark(BenchmarkMode mode, const gen::MotionTokenGenerator& generator,
                                const codec::MotionCodec& codec,
                                const RetrievalModel& text_retrieval,
                                const RetrievalModel* audio_retrieval,
                                const data::CorpusManifest& manifest, const VertexModel& vm,
                                uint64_t seed, const BenchmarkConfig& cfg = {});

}  // namespace facemotion::eval
