#pragma once

#include "facemotion/eval/benchmark.hpp"
#include "facemotion/harness/checkpoint.hpp"
#include "facemotion/harness/config.hpp"

namespace facemotion::harness {

// Stage entry points shared by the CLI and the acceptance harness. Every
// artifact embeds the exact config and seed that produced it; no stage
// mutates another stage's inputs.

std::filesystem::path run_synth(const RunConfig& cfg, const std::filesystem::path& corpus_dir);

// Outlier repair + smoothing into motion_curated/ plus manifest_curated.json
// (the original corpus stays untouched). Returns the curated manifest path.
std::filesystem::path run_curate(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
                                 const std::string& manifest_name = "manifest.json");

curation::AnnotateOutcome run_annotate(const RunConfig& cfg,
                                       const std::filesystem::path& corpus_dir,
                                       const std::string& client_kind,
                                       const std::string& manifest_name = "manifest.json");

std::filesystem::path run_train_codec(const RunConfig& cfg,
                                      const std::filesystem::path& manifest_path,
                                      const std::filesystem::path& ckpt_dir,
                                      codec::CodecTrainResult* result_out = nullptr);

std::filesystem::path run_train_generator(const RunConfig& cfg,
                                          const std::filesystem::path& manifest_path,
                                          const std::filesystem::path& codec_ckpt,
                                          const std::filesystem::path& ckpt_dir,
                                          gen::GenTrainResult* result_out = nullptr);

std::filesystem::path run_train_retrieval(const RunConfig& cfg,
                                          const std::filesystem::path& manifest_path,
                                          eval::RetrievalMode mode,
                                          const std::filesystem::path& ckpt_dir,
                                          eval::RetrievalTrainResult* result_out = nullptr);

struct GenerateRequest {
    std::filesystem::path codec_ckpt;
    std::filesystem::path generator_ckpt;
    std::filesystem::path annotation_path;
    std::optional<std::filesystem::path> audio_path;
    std::filesystem::path out_motion;
    gen::SamplingConfig sampling;
    std::optional<uint64_t> seed;
};

gen::GenerateResult run_generate(const GenerateRequest& request);

struct EvaluateRequest {
    eval::BenchmarkMode mode = eval::BenchmarkMode::bench1;
    std::filesystem::path manifest_path;
    std::filesystem::path codec_ckpt;
    std::filesystem::path generator_ckpt;
    std::filesystem::path text_retrieval_ckpt;
    std::optional<std::filesystem::path> audio_retrieval_ckpt;
    std::filesystem::path out_report;
};

eval::MetricReport run_evaluate(const RunConfig& cfg, const EvaluateRequest& request);

// Checkpoint loading with stage verification.
codec::MotionCodec load_codec_checkpoint(const std::filesystem::path& path);
gen::MotionTokenGenerator load_generator_checkpoint(const std::filesystem::path& path);
eval::RetrievalModel load_retrieval_checkpoint(const std::filesystem::path& path,
                                               eval::RetrievalMode expected_mode);

uint64_t stage_seed(uint64_t global_seed, std::string_view stage);

}  // namespace facemotion::harness
