#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "facemotion/harness/pipeline.hpp"
#include "test_support.hpp"

using namespace facemotion;
using namespace facemotion::harness;

namespace {
RunConfig micro_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.out_dir = out_dir;
    cfg.verbosity = 0;
    cfg.workers = 2;
    cfg.data.n_sequences = 40;
    cfg.codec.model.channels = 16;
    cfg.codec.model.code_dim = 8;
    cfg.codec.model.codebook_size = 16;
    cfg.codec.train.steps = 60;
    cfg.codec.train.batch_size = 4;
    cfg.codec.train.window = 32;
    cfg.codec.train.val_every = 30;
    cfg.generator.model.layers = 1;
    cfg.generator.model.heads = 2;
    cfg.generator.model.width = 32;
    cfg.generator.model.ffn_hidden = 64;
    cfg.generator.model.codebook_size = 16;
    cfg.generator.model.encoders.width = 32;
    cfg.generator.model.encoders.ffn_hidden = 64;
    cfg.generator.train.steps = 30;
    cfg.generator.train.batch_size = 2;
    cfg.generator.train.val_every = 15;
    cfg.eval.retrieval.width = 32;
    cfg.eval.retrieval.ffn_hidden = 64;
    cfg.eval.retrieval.layers = 1;
    cfg.eval.retrieval.embed_dim = 16;
    cfg.eval.retrieval_train.steps = 20;
    cfg.eval.retrieval_train.batch_size = 8;
    cfg.eval.retrieval_train.val_batches = 4;
    cfg.eval.rp_batches = 5;
    return cfg;
}
}  // namespace

TEST_CASE("checkpoint store: content addressing, integrity, listing") {
    fmtest::TempDir dir("ckpt");
    const CheckpointStore store(dir.path() / "registry");

    CheckpointMeta meta;
    meta.stage = "codec";
    meta.config = {{"channels", 16}};
    meta.seed = 7;
    meta.step = 100;
    meta.val_loss = 0.25;
    const std::string payload = "payload-bytes-0123456789";
    const auto path = store.save(meta, payload);
    CHECK(path.filename().string().rfind("codec-", 0) == 0);

    auto [loaded_meta, loaded_payload] = CheckpointStore::load(path);
    CHECK(loaded_payload == payload);
    CHECK(loaded_meta.stage == "codec");
    CHECK(loaded_meta.val_loss == 0.25);

    // configs differing only in seed hash differently
    CheckpointMeta other = meta;
    other.seed = 8;
    CHECK(CheckpointStore::config_hash(meta) != CheckpointStore::config_hash(other));
    CHECK(store.path_for(meta) != store.path_for(other));

    // truncation -> integrity error
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(dir.path() / "registry" / "broken.fmck", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
    }
    CHECK_THROWS_AS(CheckpointStore::load(dir.path() / "registry" / "broken.fmck"),
                    IntegrityError);

    // corruption -> hash mismatch
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes[bytes.size() - 3] ^= 0x7f;
        std::ofstream out(dir.path() / "registry" / "corrupt.fmck", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(CheckpointStore::load(dir.path() / "registry" / "corrupt.fmck"),
                    IntegrityError);

    std::filesystem::remove(dir.path() / "registry" / "broken.fmck");
    std::filesystem::remove(dir.path() / "registry" / "corrupt.fmck");
    store.save(other, payload);
    CHECK(store.list().size() == 2);
}

TEST_CASE("run config: profiles, overrides, unknown keys rejected") {
    RunConfig small;
    small.apply_profile("small");
    CHECK(small.codec.model.codebook_size == 64);
    CHECK(small.codec.model.code_dim == 32);
    CHECK(small.generator.model.width == 128);

    RunConfig paper;
    paper.apply_profile("paper");
    CHECK(paper.codec.model.codebook_size == 256);
    CHECK(paper.generator.model.width == 512);

    const nlohmann::json override_json = {
        {"seed", 99},
        {"codec", {{"codebook_size", 32}, {"train", {{"steps", 10}}}}},
        {"generator", {{"codebook_size", 32}}},
    };
    const RunConfig cfg = RunConfig::from_json(override_json);
    CHECK(cfg.seed == 99);
    CHECK(cfg.codec.model.codebook_size == 32);
    CHECK(cfg.codec.train.steps == 10);

    CHECK_THROWS_AS(RunConfig::from_json({{"sneaky", 1}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"codec", {{"channles", 16}}}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"profile", "huge"}}), ConfigError);

    // config echo round trips through JSON
    const RunConfig back = RunConfig::from_json(cfg.to_json());
    CHECK(back.codec.model.codebook_size == cfg.codec.model.codebook_size);
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("micro pipeline: synth, curate, train stages, generate, evaluate") {
    fmtest::TempDir dir("pipeline");
    RunConfig cfg = micro_config((dir.path() / "out").string());
    const auto corpus = dir.path() / "corpus";
    const auto ckpts = dir.path() / "ckpts";

    const auto manifest_path = run_synth(cfg, corpus);
    CHECK(std::filesystem::exists(manifest_path));

    const auto curated_path = run_curate(cfg, corpus);
    CHECK(std::filesystem::exists(curated_path));
    const auto curated = data::load_manifest(curated_path);
    CHECK(curated.entries.size() == 40);
    // stage isolation: original motions untouched
    const auto original = data::load_manifest(manifest_path);
    CHECK(original.entries[0].motion_path.rfind("motion/", 0) == 0);
    CHECK(std::filesystem::exists(corpus / original.entries[0].motion_path));

    codec::CodecTrainResult codec_result;
    const auto codec_ckpt = run_train_codec(cfg, curated_path, ckpts, &codec_result);
    CHECK(std::filesystem::exists(codec_ckpt));
    CHECK(codec_result.loss_curve.size() == 60);

    gen::GenTrainResult gen_result;
    const auto gen_ckpt = run_train_generator(cfg, curated_path, codec_ckpt, ckpts, &gen_result);
    CHECK(std::filesystem::exists(gen_ckpt));

    const auto text_ret_ckpt =
        run_train_retrieval(cfg, curated_path, eval::RetrievalMode::text, ckpts);
    CHECK(std::filesystem::exists(text_ret_ckpt));

    // checkpoint registry sees all three stages
    const CheckpointStore store(ckpts);
    CHECK(store.list().size() == 3);

    // stage mismatch is rejected
    CHECK_THROWS_AS(load_codec_checkpoint(gen_ckpt), IntegrityError);

    // generate from one entry's annotation and audio
    const data::CorpusManifest manifest = data::load_manifest(manifest_path);
    const data::CorpusEntry* talking = nullptr;
    for (const auto& entry : manifest.entries) {
        if (entry.audio_path) {
            talking = &entry;
            break;
        }
    }
    REQUIRE(talking != nullptr);
    GenerateRequest request;
    request.codec_ckpt = codec_ckpt;
    request.generator_ckpt = gen_ckpt;
    request.annotation_path = corpus / talking->annotation_path;
    request.audio_path = corpus / *talking->audio_path;
    request.out_motion = dir.path() / "generated.mmh";
    request.sampling.argmax = true;
    const gen::GenerateResult result = run_generate(request);
    CHECK(std::filesystem::exists(request.out_motion));
    CHECK(std::filesystem::exists(dir.path() / "generated.mmh.json"));
    const data::MotionSequence generated = data::read_container(request.out_motion);
    CHECK(generated.length() == static_cast<Eigen::Index>(result.tokens.size()) * 4);

    // bench2 evaluation on a 34-entry test split needs >= 32 pairs: reuse the
    // corpus with a test-heavy split for the report
    RunConfig eval_cfg = cfg;
    eval_cfg.data.split_ratios = {0.1, 0.05, 0.85};
    const auto eval_corpus = dir.path() / "corpus-eval";
    const auto eval_manifest = run_synth(eval_cfg, eval_corpus);
    EvaluateRequest evaluate;
    evaluate.mode = eval::BenchmarkMode::bench2;
    evaluate.manifest_path = eval_manifest;
    evaluate.codec_ckpt = codec_ckpt;
    evaluate.generator_ckpt = gen_ckpt;
    evaluate.text_retrieval_ckpt = text_ret_ckpt;
    evaluate.out_report = dir.path() / "report.json";
    const eval::MetricReport report = run_evaluate(eval_cfg, evaluate);
    CHECK(std::filesystem::exists(evaluate.out_report));
    CHECK(report.rows.count("generated") == 1);
    CHECK(report.rows.at("real").fid <= 1e-5);
    CHECK(report.config_echo.contains("run_seed"));
}
