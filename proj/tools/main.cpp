// facemotion: corpus synthesis, curation, two-stage training, generation and
// benchmark evaluation for multi-modal 3D facial motion, from one binary.

#include <CLI11.hpp>
#include <cstdio>

#include "facemotion/harness/pipeline.hpp"

using namespace facemotion;

namespace {

void print_error(const std::string& category, const std::string& message) {
    nlohmann::json line = {{"error", category}, {"message", message}};
    std::fprintf(stderr, "%s\n", line.dump().c_str());
}

struct GlobalArgs {
    std::string config_path;
    std::string profile = "small";
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> verbosity;
    std::optional<int> workers;

    harness::RunConfig resolve() const {
        harness::RunConfig cfg;
        cfg.apply_profile(profile);
        if (!config_path.empty()) {
            // file values override the profile, flags override the file
            nlohmann::json j;
            {
                std::ifstream in(config_path);
                if (!in) {
                    throw ConfigError("cannot open config file: " + config_path);
                }
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
                }
            }
            if (!j.contains("profile")) {
                j["profile"] = profile;
            }
            cfg = harness::RunConfig::from_json(j);
        }
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out_dir = *out_dir;
        if (verbosity) cfg.verbosity = *verbosity;
        if (workers) cfg.workers = *workers;
        set_log_verbosity(cfg.verbosity);
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal 3D facial motion toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs global;
    app.add_option("--config", global.config_path, "JSON run config (see README)");
    app.add_option("--profile", global.profile, "small | paper")->capture_default_str();
    uint64_t seed_arg = 0;
    auto* seed_opt = app.add_option("--seed", seed_arg, "global seed");
    std::string out_dir_arg;
    auto* out_opt = app.add_option("--out-dir", out_dir_arg, "artifact directory");
    int verbosity_arg = 1;
    auto* verb_opt = app.add_option("--verbosity", verbosity_arg, "0 quiet, 1 info, 2 debug");
    int workers_arg = 0;
    auto* workers_opt = app.add_option("--workers", workers_arg, "worker threads (0 = auto)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_corpus;
    int synth_n = -1;
    synth->add_option("--corpus", synth_corpus, "output corpus directory")->required();
    synth->add_option("--n", synth_n, "number of sequences");

    // curate
    auto* curate = app.add_subcommand("curate", "outlier repair + smoothing");
    std::string curate_corpus, curate_manifest = "manifest.json";
    curate->add_option("--corpus", curate_corpus)->required();
    curate->add_option("--manifest", curate_manifest, "manifest file name");

    // annotate
    auto* annotate = app.add_subcommand("annotate", "fill annotation bundles via a client");
    std::string annotate_corpus, annotate_client = "stub", annotate_manifest = "manifest.json";
    annotate->add_option("--corpus", annotate_corpus)->required();
    annotate->add_option("--client", annotate_client, "stub | http");
    annotate->add_option("--manifest", annotate_manifest);

    // train-codec
    auto* train_codec = app.add_subcommand("train-codec", "stage-I motion tokenizer");
    std::string tc_corpus, tc_manifest = "manifest.json", tc_ckpt_dir;
    train_codec->add_option("--corpus", tc_corpus)->required();
    train_codec->add_option("--manifest", tc_manifest);
    train_codec->add_option("--ckpt-dir", tc_ckpt_dir)->required();

    // train-gen
    auto* train_gen = app.add_subcommand("train-gen", "stage-II token generator");
    std::string tg_corpus, tg_manifest = "manifest.json", tg_codec, tg_ckpt_dir;
    train_gen->add_option("--corpus", tg_corpus)->required();
    train_gen->add_option("--manifest", tg_manifest);
    train_gen->add_option("--codec", tg_codec, "frozen codec checkpoint")->required();
    train_gen->add_option("--ckpt-dir", tg_ckpt_dir)->required();

    // train-retrieval
    auto* train_ret = app.add_subcommand("train-retrieval", "contrastive retrieval towers");
    std::string tr_corpus, tr_manifest = "manifest.json", tr_mode = "text", tr_ckpt_dir;
    train_ret->add_option("--corpus", tr_corpus)->required();
    train_ret->add_option("--manifest", tr_manifest);
    train_ret->add_option("--mode", tr_mode, "text | audio");
    train_ret->add_option("--ckpt-dir", tr_ckpt_dir)->required();

    // generate
    auto* generate = app.add_subcommand("generate", "sample a motion from annotation (+audio)");
    std::string g_codec, g_gen, g_annotation, g_audio, g_out;
    double g_temperature = 1.0;
    int g_top_k = 10;
    bool g_argmax = false;
    uint64_t g_seed = 0;
    bool g_seed_set = false;
    generate->add_option("--codec", g_codec)->required();
    generate->add_option("--gen", g_gen)->required();
    generate->add_option("--annotation", g_annotation)->required();
    generate->add_option("--audio", g_audio, "optional WAV input");
    generate->add_option("--out", g_out, "output motion container")->required();
    generate->add_option("--temperature", g_temperature);
    generate->add_option("--top-k", g_top_k);
    generate->add_flag("--argmax", g_argmax, "deterministic argmax decoding");
    auto* g_seed_opt = generate->add_option("--sample-seed", g_seed, "sampling seed");
    (void)g_seed_set;

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run a benchmark and write a MetricReport");
    std::string e_mode = "bench1", e_corpus, e_manifest = "manifest.json";
    std::string e_codec, e_gen, e_text_ret, e_audio_ret, e_out;
    evaluate->add_option("--mode", e_mode, "bench1 | bench2");
    evaluate->add_option("--corpus", e_corpus)->required();
    evaluate->add_option("--manifest", e_manifest);
    evaluate->add_option("--codec", e_codec)->required();
    evaluate->add_option("--gen", e_gen)->required();
    evaluate->add_option("--text-retrieval", e_text_ret);
    evaluate->add_option("--audio-retrieval", e_audio_ret);
    evaluate->add_option("--out", e_out)->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "render a MetricReport as a table");
    std::string r_report;
    report_cmd->add_option("--report", r_report)->required();

    // checkpoints
    auto* checkpoints = app.add_subcommand("checkpoints", "list a checkpoint registry");
    std::string ck_dir;
    checkpoints->add_option("--dir", ck_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2
    }

    try {
        if (seed_opt->count()) global.seed = seed_arg;
        if (out_opt->count()) global.out_dir = out_dir_arg;
        if (verb_opt->count()) global.verbosity = verbosity_arg;
        if (workers_opt->count()) global.workers = workers_arg;
        harness::RunConfig cfg = global.resolve();

        if (*synth) {
            if (synth_n > 0) cfg.data.n_sequences = synth_n;
            harness::run_synth(cfg, synth_corpus);
        } else if (*curate) {
            harness::run_curate(cfg, curate_corpus, curate_manifest);
        } else if (*annotate) {
            harness::run_annotate(cfg, annotate_corpus, annotate_client, annotate_manifest);
        } else if (*train_codec) {
            harness::run_train_codec(cfg, std::filesystem::path(tc_corpus) / tc_manifest,
                                     tc_ckpt_dir);
        } else if (*train_gen) {
            harness::run_train_generator(cfg, std::filesystem::path(tg_corpus) / tg_manifest,
                                         tg_codec, tg_ckpt_dir);
        } else if (*train_ret) {
            harness::run_train_retrieval(cfg, std::filesystem::path(tr_corpus) / tr_manifest,
                                         eval::retrieval_mode_from_string(tr_mode), tr_ckpt_dir);
        } else if (*generate) {
            harness::GenerateRequest request;
            request.codec_ckpt = g_codec;
            request.generator_ckpt = g_gen;
            request.annotation_path = g_annotation;
            if (!g_audio.empty()) request.audio_path = g_audio;
            request.out_motion = g_out;
            request.sampling.temperature = g_temperature;
            request.sampling.top_k = g_top_k;
            request.sampling.argmax = g_argmax;
            if (g_seed_opt->count()) request.seed = g_seed;
            harness::run_generate(request);
        } else if (*evaluate) {
            if (e_text_ret.empty()) {
                throw ConfigError("missing retrieval model: --text-retrieval is required");
            }
            harness::EvaluateRequest request;
            request.mode = eval::benchmark_mode_from_string(e_mode);
            if (request.mode == eval::BenchmarkMode::bench1 && e_audio_ret.empty()) {
                throw ConfigError("missing retrieval model: bench1 needs --audio-retrieval");
            }
            request.manifest_path = std::filesystem::path(e_corpus) / e_manifest;
            request.codec_ckpt = e_codec;
            request.generator_ckpt = e_gen;
            request.text_retrieval_ckpt = e_text_ret;
            if (!e_audio_ret.empty()) request.audio_retrieval_ckpt = e_audio_ret;
            request.out_report = e_out;
            const eval::MetricReport report = harness::run_evaluate(cfg, request);
            std::fputs(report.render_table().c_str(), stdout);
        } else if (*report_cmd) {
            std::ifstream in(r_report);
            if (!in) {
                throw ConfigError("cannot open report: " + r_report);
            }
            nlohmann::json j;
            in >> j;
            const eval::MetricReport report = eval::MetricReport::from_json(j);
            std::fputs(report.render_table().c_str(), stdout);
        } else if (*checkpoints) {
            const harness::CheckpointStore store{std::filesystem::path(ck_dir)};
            for (const auto& [path, meta] : store.list()) {
                std::printf("%-44s stage=%-16s step=%-8lld val_loss=%.6f seed=%llu\n",
                            path.filename().string().c_str(), meta.stage.c_str(),
                            static_cast<long long>(meta.step), meta.val_loss,
                            static_cast<unsigned long long>(meta.seed));
            }
        }
    } catch (const ConfigError& e) {
        print_error(e.category(), e.what());
        return 2;
    } catch (const SpecError& e) {
        print_error(e.category(), e.what());
        return 2;
    } catch (const Error& e) {
        print_error(e.category(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
