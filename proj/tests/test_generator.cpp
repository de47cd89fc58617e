#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "facemotion/gen/model.hpp"
#include "facemotion/gen/train.hpp"
#include "test_support.hpp"

using namespace facemotion;
using namespace facemotion::gen;
using codec::TokenSequence;
using nn::Mat;

namespace {

GeneratorConfig tiny_config(int k = 8) {
    GeneratorConfig cfg;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.width = 32;
    cfg.ffn_hidden = 64;
    cfg.codebook_size = k;
    cfg.max_tokens = 50;
    cfg.audio_window = 2;
    cfg.encoders.width = 32;
    cfg.encoders.ffn_hidden = 64;
    return cfg;
}

SubwordVocab tiny_vocab() {
    return SubwordVocab::build({"a person is talking about frames",
                                "the head turns left and the lip corners pull upward",
                                "someone seems happy sad angry between frames 1 and 40"});
}

data::AnnotationBundle sample_annotation() {
    data::AnnotationBundle b;
    b.abstract_action = "A person is talking.";
    b.abstract_emotion = "The person seems happy.";
    b.expression_detail = "First the lip corners pull upward strongly between frames 2 and 30.";
    b.headpose_detail = "First the head turns left slightly, peaking near 12 degrees.";
    b.scenarios = {"They received good news.", "A friend visited.", "They won a prize."};
    return b;
}

ConditioningBundle random_bundle(Rng& rng, int width, int audio_rows) {
    ConditioningBundle bundle;
    auto fill = [&](Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 0.5 * rng.normal();
        return m;
    };
    bundle.full_text = fill(1, width);
    bundle.hier_text = fill(5, width);
    if (audio_rows > 0) {
        bundle.audio = fill(audio_rows, width);
    }
    return bundle;
}

data::AudioClip four_second_clip() {
    data::AudioClip clip;
    clip.samples.resize(64000);
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] = 0.4f * static_cast<float>(std::sin(2.0 * 3.14159265 * 180.0 * i / 16000.0));
    }
    return clip;
}

}  // namespace

TEST_CASE("bias mask block structure") {
    SUBCASE("window 0 at the first row sees text slots plus audio slot 0") {
        const Mat mask = MotionTokenGenerator::build_bias_mask(3, true, 0);
        REQUIRE(mask.rows() == 3);
        REQUIRE(mask.cols() == 8);
        for (int c = 0; c < 5; ++c) CHECK(mask(0, c) == 1.0);
        CHECK(mask(0, 5) == 1.0);
        CHECK(mask(0, 6) == 0.0);
        CHECK(mask(0, 7) == 0.0);
        // causal rule with window: j <= i + w
        CHECK(mask(1, 6) == 1.0);
        CHECK(mask(1, 7) == 0.0);
        CHECK(mask(2, 7) == 1.0);
    }
    SUBCASE("audio absent gives an all-ones text mask") {
        const Mat mask = MotionTokenGenerator::build_bias_mask(3, false, 2);
        CHECK(mask.rows() == 3);
        CHECK(mask.cols() == 5);
        CHECK(mask.minCoeff() == 1.0);
    }
    SUBCASE("every row keeps at least the five text slots") {
        const Mat mask = MotionTokenGenerator::build_bias_mask(7, true, 1);
        for (Eigen::Index r = 0; r < mask.rows(); ++r) {
            CHECK(mask.row(r).sum() >= 5.0);
        }
        // entries are binary
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            CHECK((mask(i) == 0.0 || mask(i) == 1.0));
        }
    }
    SUBCASE("negative window means unrestricted audio attention") {
        const Mat mask = MotionTokenGenerator::build_bias_mask(4, true, -1);
        CHECK(mask.minCoeff() == 1.0);
    }
}

TEST_CASE("encode_conditions shapes follow the hop arithmetic") {
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 3);
    const data::AnnotationBundle annotation = sample_annotation();

    SUBCASE("4 s of audio pools to 25 feature rows") {
        const data::AudioClip clip = four_second_clip();
        const ConditioningBundle bundle = model.encode_conditions(annotation, &clip);
        CHECK(bundle.audio.rows() == 25);
        CHECK(bundle.audio.cols() == 32);
        CHECK(bundle.full_text.rows() == 1);
        CHECK(bundle.hier_text.rows() == 5);
    }
    SUBCASE("audio-free bundles have no audio features") {
        const ConditioningBundle bundle = model.encode_conditions(annotation, nullptr);
        CHECK(!bundle.has_audio());
    }
    SUBCASE("different scenario texts change hierarchical row 5") {
        const ConditioningBundle a = model.encode_conditions(annotation, nullptr);
        data::AnnotationBundle other = annotation;
        other.scenarios[0] = "A completely different scenario text appears here.";
        const ConditioningBundle b = model.encode_conditions(other, nullptr);
        CHECK((a.hier_text.row(4) - b.hier_text.row(4)).norm() > 1e-9);
        CHECK((a.hier_text.row(0) - b.hier_text.row(0)).norm() == 0.0);
    }
    SUBCASE("empty annotation field is a generator error") {
        data::AnnotationBundle bad = annotation;
        bad.abstract_emotion.clear();
        CHECK_THROWS_AS(model.encode_conditions(bad, nullptr), GeneratorError);
    }
}

TEST_CASE("teacher-forced logits are causal in the token stream") {
    Rng rng(5);
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 7);
    const ConditioningBundle bundle = random_bundle(rng, 32, 12);

    TokenSequence tokens(12);
    for (auto& t : tokens) t = static_cast<int>(rng.below(8));
    const Mat base = model.teacher_forced_logits(tokens, bundle);
    REQUIRE(base.rows() == 13);

    for (int trial = 0; trial < 40; ++trial) {
        const int t = static_cast<int>(rng.below(tokens.size()));
        TokenSequence perturbed = tokens;
        perturbed[static_cast<size_t>(t)] = (perturbed[static_cast<size_t>(t)] + 1 +
                                             static_cast<int>(rng.below(7))) % 8;
        const Mat changed = model.teacher_forced_logits(perturbed, bundle);
        for (int r = 0; r <= t; ++r) {
            CHECK((base.row(r) - changed.row(r)).cwiseAbs().maxCoeff() <= 1e-5);
        }
        // and the perturbation is not a no-op downstream
        CHECK((base - changed).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("audio perturbations respect the bias-mask locality window") {
    Rng rng(6);
    GeneratorConfig cfg = tiny_config();
    cfg.audio_window = 2;
    MotionTokenGenerator model(cfg, tiny_vocab(), 9);
    const int n = 14;
    const ConditioningBundle bundle = random_bundle(rng, 32, n);
    TokenSequence tokens(n);
    for (auto& t : tokens) t = static_cast<int>(rng.below(8));
    const Mat base = model.teacher_forced_logits(tokens, bundle);

    for (int trial = 0; trial < 40; ++trial) {
        const int j = static_cast<int>(rng.below(n));
        ConditioningBundle perturbed = bundle;
        for (Eigen::Index c = 0; c < perturbed.audio.cols(); ++c) {
            perturbed.audio(j, c) += rng.normal();
        }
        const Mat changed = model.teacher_forced_logits(tokens, perturbed);
        for (int i = 0; i < j - cfg.audio_window && i < static_cast<int>(base.rows()); ++i) {
            CHECK((base.row(i) - changed.row(i)).cwiseAbs().maxCoeff() <= 1e-5);
        }
    }
}

TEST_CASE("teacher-forced loss equals a log-sum-exp restatement") {
    Rng rng(7);
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 11);
    const ConditioningBundle bundle = random_bundle(rng, 32, 0);
    TokenSequence tokens{1, 4, 2, 7, 0};
    const Mat logits = model.teacher_forced_logits(tokens, bundle);
    std::vector<int> targets(tokens.begin(), tokens.end());
    targets.push_back(model.eos_id());

    nn::GraphCtx ctx(false);
    const double ours =
        nn::cross_entropy_mean(nn::Tensor::constant(logits), targets, model.pad_id()).scalar();
    double restated = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        restated += nn::logsumexp_row(logits.row(r)) - logits(r, targets[static_cast<size_t>(r)]);
    }
    restated /= static_cast<double>(logits.rows());
    CHECK(ours == doctest::Approx(restated).epsilon(1e-12));
}

TEST_CASE("generation modes: argmax determinism, seeded diversity, audio length") {
    Rng rng(8);
    codec::CodecConfig ccfg;
    ccfg.channels = 16;
    ccfg.code_dim = 8;
    ccfg.codebook_size = 8;
    codec::MotionCodec codec(ccfg, 21);
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 13);

    SUBCASE("argmax mode is deterministic") {
        const ConditioningBundle bundle = random_bundle(rng, 32, 10);
        SamplingConfig sampling;
        sampling.argmax = true;
        const GenerateResult a = model.generate(codec, bundle, sampling, std::nullopt);
        const GenerateResult b = model.generate(codec, bundle, sampling, std::nullopt);
        CHECK(a.tokens == b.tokens);
        CHECK((a.motion.frames - b.motion.frames).cwiseAbs().maxCoeff() == 0.0f);
        CHECK(a.tokens.size() == 10);  // audio mode pins the token count
        CHECK(a.motion.length() == 40);
    }
    SUBCASE("stochastic sampling is seed-reproducible and diverse") {
        const ConditioningBundle bundle = random_bundle(rng, 32, 12);
        SamplingConfig sampling;
        sampling.temperature = 1.0;
        sampling.top_k = 8;
        std::set<TokenSequence> distinct;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            const GenerateResult r1 = model.generate(codec, bundle, sampling, seed);
            const GenerateResult r2 = model.generate(codec, bundle, sampling, seed);
            CHECK(r1.tokens == r2.tokens);
            distinct.insert(r1.tokens);
        }
        CHECK(distinct.size() >= 2);
    }
    SUBCASE("text-only mode uses EOS or truncates at the budget") {
        const ConditioningBundle bundle = random_bundle(rng, 32, 0);
        SamplingConfig sampling;
        sampling.temperature = 1.2;
        sampling.top_k = 11;  // includes EOS among candidates
        const GenerateResult result = model.generate(codec, bundle, sampling, 5);
        CHECK(result.tokens.size() >= 1);
        CHECK(result.tokens.size() <= 50);
        if (result.tokens.size() < 50) {
            CHECK(!result.truncated);
        }
        CHECK(result.motion.length() == static_cast<Eigen::Index>(result.tokens.size()) * 4);
    }
    SUBCASE("target frame override crops the decoded motion") {
        const ConditioningBundle bundle = random_bundle(rng, 32, 10);
        SamplingConfig sampling;
        sampling.argmax = true;
        const GenerateResult result = model.generate(codec, bundle, sampling, std::nullopt, 38);
        CHECK(result.motion.length() == 38);
    }
}

TEST_CASE("token validation in the teacher-forced path") {
    Rng rng(9);
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 15);
    const ConditioningBundle bundle = random_bundle(rng, 32, 0);
    CHECK_THROWS_AS(model.teacher_forced_logits(TokenSequence{0, 9}, bundle), GeneratorError);
    CHECK_THROWS_AS(model.teacher_forced_logits(TokenSequence(51, 0), bundle), GeneratorError);
}

TEST_CASE("single-sequence overfit reaches full teacher-forced accuracy") {
    GenExample ex;
    ex.id = "overfit";
    ex.tokens = {3, 1, 4, 1, 5, 2, 6, 5};
    ex.annotation = sample_annotation();
    ex.frames = 32;

    GeneratorConfig cfg = tiny_config();
    MotionTokenGenerator model(cfg, tiny_vocab(), 17);
    GenTrainConfig tcfg;
    tcfg.steps = 300;
    tcfg.batch_size = 1;
    tcfg.lr = 1e-3;
    tcfg.val_every = 1000;  // no validation inside the loop
    tcfg.workers = 1;
    const GenTrainResult result = train_generator(model, {ex}, {}, tcfg);
    CHECK(result.loss_curve.back() < result.loss_curve.front());
    CHECK(teacher_forced_accuracy(model, ex) == doctest::Approx(1.0));
}

TEST_CASE("generator training is deterministic across reruns") {
    std::vector<GenExample> train;
    Rng rng(10);
    for (int i = 0; i < 6; ++i) {
        GenExample ex;
        ex.id = "t" + std::to_string(i);
        ex.tokens.resize(6 + static_cast<size_t>(rng.below(5)));
        for (auto& t : ex.tokens) t = static_cast<int>(rng.below(8));
        ex.annotation = sample_annotation();
        ex.annotation.abstract_emotion = "The person seems " + std::string(i % 2 ? "happy" : "sad") + ".";
        ex.frames = static_cast<int>(ex.tokens.size()) * 4;
        train.push_back(ex);
    }
    GenTrainConfig tcfg;
    tcfg.steps = 25;
    tcfg.batch_size = 2;
    tcfg.val_every = 10;
    tcfg.workers = 2;

    MotionTokenGenerator a(tiny_config(), tiny_vocab(), 23);
    const GenTrainResult ra = train_generator(a, train, {train[0], train[1]}, tcfg);
    MotionTokenGenerator b(tiny_config(), tiny_vocab(), 23);
    const GenTrainResult rb = train_generator(b, train, {train[0], train[1]}, tcfg);
    CHECK(ra.loss_curve == rb.loss_curve);
    CHECK(ra.final_val_nll == rb.final_val_nll);
}

TEST_CASE("generator serialization preserves logits on a probe") {
    Rng rng(11);
    MotionTokenGenerator model(tiny_config(), tiny_vocab(), 27);
    const ConditioningBundle bundle = random_bundle(rng, 32, 6);
    const TokenSequence probe{0, 3, 5};
    const Mat before = model.teacher_forced_logits(probe, bundle);

    std::stringstream buffer;
    model.serialize(buffer);
    MotionTokenGenerator loaded = MotionTokenGenerator::deserialize(buffer);
    const Mat after = loaded.teacher_forced_logits(probe, bundle);
    CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);

    // annotations must tokenize identically through the restored vocabulary
    const auto ids_a = model.encoders().vocab.encode("the head turns left");
    const auto ids_b = loaded.encoders().vocab.encode("the head turns left");
    CHECK(ids_a == ids_b);
}

TEST_CASE("fusion ablation variants run the full forward path") {
    Rng rng(12);
    const TokenSequence tokens{1, 2, 3, 4};
    for (const char* variant : {"ft_self", "ft_ht_self", "all_self", "all_cross"}) {
        GeneratorConfig cfg = tiny_config();
        if (std::string(variant) == "ft_self") {
            cfg.fusion.self_inputs = {FeatureStream::full_text};
            cfg.fusion.cross_inputs = {FeatureStream::hier_text, FeatureStream::audio};
        } else if (std::string(variant) == "ft_ht_self") {
            cfg.fusion.self_inputs = {FeatureStream::full_text, FeatureStream::hier_text};
            cfg.fusion.cross_inputs = {FeatureStream::audio};
        } else if (std::string(variant) == "all_self") {
            cfg.fusion.self_inputs = {FeatureStream::full_text, FeatureStream::hier_text,
                                      FeatureStream::audio};
            cfg.fusion.cross_inputs = {};
        } else {
            cfg.fusion.self_inputs = {};
            cfg.fusion.cross_inputs = {FeatureStream::full_text, FeatureStream::hier_text,
                                       FeatureStream::audio};
        }
        MotionTokenGenerator model(cfg, tiny_vocab(), 31);
        const ConditioningBundle bundle = random_bundle(rng, 32, 4);
        const Mat logits = model.teacher_forced_logits(tokens, bundle);
        CHECK(logits.rows() == 5);
        CHECK(logits.allFinite());
    }
}
