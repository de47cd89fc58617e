#include "facemotion/harness/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "facemotion/parallel.hpp"

namespace facemotion::harness {

uint64_t stage_seed(uint64_t global_seed, std::string_view stage) {
    return fnv1a64(stage, global_seed ^ 0x9e3779b97f4a7c15ull);
}

std::filesystem::path run_synth(const RunConfig& cfg, const std::filesystem::path& corpus_dir) {
    data::SyntheticSpec spec = cfg.data;
    spec.seed = cfg.seed;
    const auto manifest = data::generate_synthetic_corpus(spec, corpus_dir);
    log_json(1, "synth_done",
             {{"entries", std::to_string(manifest.entries.size())},
              {"dir", corpus_dir.string()}});
    return corpus_dir / "manifest.json";
}

std::filesystem::path run_curate(const RunConfig& cfg, const std::filesystem::path& corpus_dir,
                                 const std::string& manifest_name) {
    const data::CorpusManifest manifest = data::load_manifest(corpus_dir / manifest_name);
    std::filesystem::create_directories(corpus_dir / "motion_curated");

    parallel_for(manifest.entries.size(), cfg.workers, [&](size_t i) {
        const auto& entry = manifest.entries[i];
        const data::MotionSequence raw = data::read_container(manifest.root / entry.motion_path);
        const data::MotionSequence repaired =
            curation::repair_outliers(raw, cfg.curation.outliers);
        const curation::SmoothResult smoothed =
            curation::smooth_sequence(repaired, cfg.curation.smoothing);
        data::write_container(smoothed.smoothed,
                              corpus_dir / "motion_curated" / (entry.id + ".mmh"));
    });

    data::CorpusManifest curated = manifest;
    curated.config_echo["curation"] = {
        {"outlier_scale", cfg.curation.outliers.scale},
        {"lambda", cfg.curation.smoothing.lambda},
        {"mu", cfg.curation.smoothing.mu},
        {"steps", cfg.curation.smoothing.steps},
        {"lr", cfg.curation.smoothing.lr},
    };
    for (auto& entry : curated.entries) {
        entry.motion_path = "motion_curated/" + entry.id + ".mmh";
    }
    const auto out_path = corpus_dir / "manifest_curated.json";
    data::save_manifest(curated, out_path);
    log_json(1, "curate_done", {{"entries", std::to_string(curated.entries.size())}});
    return out_path;
}

curation::AnnotateOutcome run_annotate(const RunConfig& cfg,
                                       const std::filesystem::path& corpus_dir,
                                       const std::string& client_kind,
                                       const std::string& manifest_name) {
    const data::CorpusManifest manifest = data::load_manifest(corpus_dir / manifest_name);
    curation::AnnotateConfig acfg;
    acfg.retries = cfg.curation.retries;
    acfg.workers = cfg.workers;
    acfg.max_in_flight = cfg.curation.max_in_flight;
    acfg.min_request_interval_s = cfg.curation.min_request_interval_s;
    acfg.pose_threshold = cfg.curation.pose_threshold;
    acfg.au_threshold = cfg.curation.au_threshold;
    acfg.au_min_duration = cfg.curation.au_min_duration;

    std::unique_ptr<curation::TextCompletionClient> client;
    if (client_kind == "stub") {
        client = std::make_unique<curation::StubClient>();
    } else if (client_kind == "http") {
        client = std::make_unique<curation::HttpCompletionClient>();
    } else {
        throw ConfigError("unknown annotation client: " + client_kind);
    }
    const auto outcome = curation::annotate(manifest, *client, acfg);
    log_json(1, "annotate_done",
             {{"annotated", std::to_string(outcome.annotated)},
              {"unannotated", std::to_string(outcome.unannotated_ids.size())},
              {"attempts", std::to_string(outcome.attempts)}});
    return outcome;
}

std::filesystem::path run_train_codec(const RunConfig& cfg,
                                      const std::filesystem::path& manifest_path,
                                      const std::filesystem::path& ckpt_dir,
                                      codec::CodecTrainResult* result_out) {
    const data::CorpusManifest manifest = data::load_manifest(manifest_path);
    const auto train = codec::load_split_motions(manifest, data::Split::train);
    const auto val = codec::load_split_motions(manifest, data::Split::val);

    codec::MotionCodec model(cfg.codec.model, stage_seed(cfg.seed, "codec-init"));
    codec::CodecTrainConfig tcfg = cfg.codec.train;
    tcfg.seed = stage_seed(cfg.seed, "codec-train");
    tcfg.workers = cfg.workers;
    const codec::CodecTrainResult result = codec::train_codec(model, train, val, tcfg);
    if (result_out != nullptr) {
        *result_out = result;
    }
    log_json(1, "codec_trained",
             {{"final_val_mse", std::to_string(result.final_val_mse)},
              {"val_variance", std::to_string(result.val_variance)},
              {"dead_code_resets", std::to_string(result.dead_code_resets)}});

    std::ostringstream payload;
    model.serialize(payload);
    CheckpointMeta meta;
    meta.stage = "codec";
    meta.config = cfg.codec.model.to_json();
    meta.config["train"] = tcfg.to_json();
    meta.seed = cfg.seed;
    meta.step = tcfg.steps;
    meta.val_loss = result.final_val_mse;
    return CheckpointStore(ckpt_dir).save(meta, payload.str());
}

std::filesystem::path run_train_generator(const RunConfig& cfg,
                                          const std::filesystem::path& manifest_path,
                                          const std::filesystem::path& codec_ckpt,
                                          const std::filesystem::path& ckpt_dir,
                                          gen::GenTrainResult* result_out) {
    const data::CorpusManifest manifest = data::load_manifest(manifest_path);
    const codec::MotionCodec codec = load_codec_checkpoint(codec_ckpt);
    if (codec.config().codebook_size != cfg.generator.model.codebook_size) {
        throw ConfigError("generator codebook_size must match the frozen codec");
    }

    const gen::SubwordVocab vocab =
        gen::build_vocab_from_split(manifest, data::Split::train, cfg.generator.vocab_words);
    gen::MotionTokenGenerator model(cfg.generator.model, vocab,
                                    stage_seed(cfg.seed, "generator-init"));
    const auto train =
        gen::prepare_generator_examples(manifest, data::Split::train, codec, true, cfg.workers);
    const auto val =
        gen::prepare_generator_examples(manifest, data::Split::val, codec, true, cfg.workers);
    gen::GenTrainConfig tcfg = cfg.generator.train;
    tcfg.seed = stage_seed(cfg.seed, "generator-train");
    tcfg.workers = cfg.workers;
    const gen::GenTrainResult result = gen::train_generator(model, train, val, tcfg);
    if (result_out != nullptr) {
        *result_out = result;
    }
    log_json(1, "generator_trained",
             {{"initial_val_nll", std::to_string(result.initial_val_nll)},
              {"best_val_nll", std::to_string(result.best_val_nll)}});

    std::ostringstream payload;
    model.serialize(payload);
    CheckpointMeta meta;
    meta.stage = "generator";
    meta.config = cfg.generator.model.to_json();
    meta.config["train"] = tcfg.to_json();
    meta.config["codec_checkpoint"] = codec_ckpt.filename().string();
    meta.seed = cfg.seed;
    meta.step = tcfg.steps;
    meta.val_loss = result.best_val_nll;
    return CheckpointStore(ckpt_dir).save(meta, payload.str());
}

std::filesystem::path run_train_retrieval(const RunConfig& cfg,
                                          const std::filesystem::path& manifest_path,
                                          eval::RetrievalMode mode,
                                          const std::filesystem::path& ckpt_dir,
                                          eval::RetrievalTrainResult* result_out) {
    const data::CorpusManifest manifest = data::load_manifest(manifest_path);
    const eval::VertexModel vm = eval::VertexModel::default_asset(cfg.eval.vertex_seed);
    eval::RetrievalConfig rcfg = cfg.eval.retrieval;
    rcfg.mode = mode;
    const gen::SubwordVocab vocab =
        gen::build_vocab_from_split(manifest, data::Split::train, cfg.generator.vocab_words);
    eval::RetrievalModel model(
        rcfg, vocab, stage_seed(cfg.seed, mode == eval::RetrievalMode::text
                                              ? "retrieval-text-init"
                                              : "retrieval-audio-init"));
    const auto train =
        eval::prepare_retrieval_examples(manifest, data::Split::train, mode, vm, cfg.workers);
    const auto val =
        eval::prepare_retrieval_examples(manifest, data::Split::val, mode, vm, cfg.workers);
    eval::RetrievalTrainConfig tcfg = cfg.eval.retrieval_train;
    tcfg.seed = stage_seed(cfg.seed, "retrieval-train");
    tcfg.workers = cfg.workers;
    const eval::RetrievalTrainResult result = eval::train_retrieval(model, train, val, tcfg);
    if (result_out != nullptr) {
        *result_out = result;
    }
    log_json(1, "retrieval_trained",
             {{"mode", to_string(mode)},
              {"val_top1", std::to_string(result.val_r_precision.top1)},
              {"val_top3", std::to_string(result.val_r_precision.top3)}});

    std::ostringstream payload;
    model.serialize(payload);
    CheckpointMeta meta;
    meta.stage = mode == eval::RetrievalMode::text ? "retrieval-text" : "retrieval-audio";
    meta.config = rcfg.to_json();
    meta.config["train"] = tcfg.to_json();
    meta.config["val_r_precision"] = {{"top1", result.val_r_precision.top1},
                                      {"top2", result.val_r_precision.top2},
                                      {"top3", result.val_r_precision.top3}};
    meta.seed = cfg.seed;
    meta.step = tcfg.steps;
    meta.val_loss = 1.0 - result.val_r_precision.top1;
    return CheckpointStore(ckpt_dir).save(meta, payload.str());
}

codec::MotionCodec load_codec_checkpoint(const std::filesystem::path& path) {
    auto [meta, payload] = CheckpointStore::load(path);
    if (meta.stage != "codec") {
        throw IntegrityError("expected a codec checkpoint, found stage " + meta.stage);
    }
    std::istringstream in(payload);
    return codec::MotionCodec::deserialize(in);
}

gen::MotionTokenGenerator load_generator_checkpoint(const std::filesystem::path& path) {
    auto [meta, payload] = CheckpointStore::load(path);
    if (meta.stage != "generator") {
        throw IntegrityError("expected a generator checkpoint, found stage " + meta.stage);
    }
    std::istringstream in(payload);
    return gen::MotionTokenGenerator::deserialize(in);
}

eval::RetrievalModel load_retrieval_checkpoint(const std::filesystem::path& path,
                                               eval::RetrievalMode expected_mode) {
    auto [meta, payload] = CheckpointStore::load(path);
    const std::string expected =
        expected_mode == eval::RetrievalMode::text ? "retrieval-text" : "retrieval-audio";
    if (meta.stage != expected) {
        throw IntegrityError("expected a " + expected + " checkpoint, found stage " + meta.stage);
    }
    std::istringstream in(payload);
    eval::RetrievalModel model = eval::RetrievalModel::deserialize(in);
    if (model.config().mode != expected_mode) {
        throw IntegrityError("retrieval checkpoint mode mismatch");
    }
    return model;
}

gen::GenerateResult run_generate(const GenerateRequest& request) {
    const codec::MotionCodec codec = load_codec_checkpoint(request.codec_ckpt);
    const gen::MotionTokenGenerator generator =
        load_generator_checkpoint(request.generator_ckpt);
    const data::AnnotationBundle annotation = data::load_annotation(request.annotation_path);
    std::optional<data::AudioClip> audio;
    if (request.audio_path) {
        audio = data::read_wav(*request.audio_path);
    }
    const gen::ConditioningBundle bundle =
        generator.encode_conditions(annotation, audio ? &*audio : nullptr);
    const gen::GenerateResult result =
        generator.generate(codec, bundle, request.sampling, request.seed);
    data::write_container(result.motion, request.out_motion);

    nlohmann::json sidecar = {
        {"tokens", result.tokens},
        {"truncated", result.truncated},
        {"frames", result.motion.length()},
        {"generator_checkpoint", request.generator_ckpt.filename().string()},
        {"codec_checkpoint", request.codec_ckpt.filename().string()},
    };
    if (request.seed) {
        sidecar["seed"] = *request.seed;
    }
    std::ofstream meta_out(request.out_motion.string() + ".json");
    meta_out << sidecar.dump(2) << "\n";
    log_json(1, "generate_done",
             {{"tokens", std::to_string(result.tokens.size())},
              {"truncated", result.truncated ? "true" : "false"},
              {"out", request.out_motion.string()}});
    return result;
}

eval::MetricReport run_evaluate(const RunConfig& cfg, const EvaluateRequest& request) {
    const data::CorpusManifest manifest = data::load_manifest(request.manifest_path);
    const codec::MotionCodec codec = load_codec_checkpoint(request.codec_ckpt);
    const gen::MotionTokenGenerator generator =
        load_generator_checkpoint(request.generator_ckpt);
    const eval::RetrievalModel text_retrieval =
        load_retrieval_checkpoint(request.text_retrieval_ckpt, eval::RetrievalMode::text);
    std::optional<eval::RetrievalModel> audio_retrieval;
    if (request.audio_retrieval_ckpt) {
        audio_retrieval =
            load_retrieval_checkpoint(*request.audio_retrieval_ckpt, eval::RetrievalMode::audio);
    }
    const eval::VertexModel vm = eval::VertexModel::default_asset(cfg.eval.vertex_seed);

    eval::BenchmarkConfig bcfg;
    bcfg.rp_batches = cfg.eval.rp_batches;
    bcfg.diversity_pairs = cfg.eval.diversity_pairs;
    bcfg.workers = cfg.workers;
    eval::MetricReport report = eval::evaluate_benchmark(
        request.mode, generator, codec, text_retrieval,
        audio_retrieval ? &*audio_retrieval : nullptr, manifest, vm,
        stage_seed(cfg.seed, "evaluate"), bcfg);
    report.config_echo["run_seed"] = cfg.seed;
    report.config_echo["vertex_seed"] = cfg.eval.vertex_seed;

    std::ofstream out(request.out_report);
    if (!out) {
        throw ContainerFormatError("cannot write report: " + request.out_report.string());
    }
    out << report.to_json().dump(2) << "\n";
    log_json(1, "evaluate_done", {{"mode", report.mode}, {"out", request.out_report.string()}});
    return report;
}

}  // namespace facemotion::harness
