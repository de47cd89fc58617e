#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "facemotion/curation/annotate.hpp"
#include "facemotion/curation/au_events.hpp"
#include "facemotion/curation/headpose.hpp"
#include "facemotion/curation/outliers.hpp"
#include "facemotion/curation/prompts.hpp"
#include "facemotion/curation/smoothing.hpp"
#include "facemotion/curation/templates.hpp"
#include "facemotion/data/synthetic.hpp"
#include "test_support.hpp"

using namespace facemotion;
using namespace facemotion::curation;
using facemotion::data::kParamDim;
using facemotion::data::MotionSequence;

namespace {

MotionSequence zero_motion(int frames) {
    MotionSequence seq;
    seq.frames = Eigen::MatrixXf::Zero(frames, kParamDim);
    return seq;
}

// Straight-line quartile oracle: sort, linear interpolation, flag strictly
// outside the fence. Kept independent of the implementation on purpose.
std::vector<int> oracle_flags(const std::vector<double>& values, double scale) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::vector<double> d(values.size());
    for (size_t i = 0; i < values.size(); ++i) d[i] = std::abs(values[i] - mean);
    std::vector<double> s = d;
    std::sort(s.begin(), s.end());
    auto quart = [&](double q) {
        const double pos = q * static_cast<double>(s.size() - 1);
        const size_t lo = static_cast<size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < s.size() ? s[lo] + frac * (s[lo + 1] - s[lo]) : s[lo];
    };
    const double q1 = quart(0.25), q3 = quart(0.75);
    const double iqr = q3 - q1;
    std::vector<int> out;
    for (size_t i = 0; i < d.size(); ++i) {
        if (d[i] < q1 - scale * iqr || d[i] > q3 + scale * iqr) out.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace

TEST_CASE("spike channel is repaired by its neighbors") {
    MotionSequence seq = zero_motion(8);
    const float vals[8] = {1, 1, 1, 1, 1, 1, 1, 50};
    for (int t = 0; t < 8; ++t) seq.frames(t, 0) = vals[t];
    const MotionSequence repaired = repair_outliers(seq, {1.5});
    CHECK(repaired.frames(7, 0) == doctest::Approx(1.0f));
    for (int t = 0; t < 7; ++t) {
        CHECK(repaired.frames(t, 0) == doctest::Approx(1.0f));
    }
}

TEST_CASE("constant sequences and huge fences are untouched") {
    MotionSequence seq = zero_motion(16);
    seq.frames.col(3).setConstant(0.7f);
    const MotionSequence r1 = repair_outliers(seq, {1.5});
    CHECK((r1.frames - seq.frames).cwiseAbs().maxCoeff() == 0.0f);

    Rng rng(3);
    for (int t = 0; t < 16; ++t) {
        for (int c = 0; c < kParamDim; ++c) {
            seq.frames(t, c) = 0.3f * static_cast<float>(rng.normal());
        }
    }
    const MotionSequence r2 = repair_outliers(seq, {1e9});
    CHECK((r2.frames - seq.frames).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("flagged frames match the brute-force quartile oracle on planted spikes") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int t_count = 24 + static_cast<int>(rng.below(60));
        std::vector<double> values(static_cast<size_t>(t_count));
        for (int t = 0; t < t_count; ++t) {
            values[static_cast<size_t>(t)] =
                std::sin(0.2 * t + static_cast<double>(trial)) + 0.05 * rng.normal();
        }
        const int n_spikes = 1 + static_cast<int>(rng.below(3));
        for (int s = 0; s < n_spikes; ++s) {
            const int at = static_cast<int>(rng.below(static_cast<uint64_t>(t_count)));
            values[static_cast<size_t>(at)] += (rng.u01() < 0.5 ? -1.0 : 1.0) * rng.uniform(8.0, 20.0);
        }
        Eigen::VectorXd channel(t_count);
        for (int t = 0; t < t_count; ++t) channel(t) = values[static_cast<size_t>(t)];
        CHECK(flag_channel_outliers(channel, 1.5) == oracle_flags(values, 1.5));
    }
}

TEST_CASE("repair is idempotent on the synthetic spike family") {
    Rng rng(29);
    MotionSequence seq = zero_motion(40);
    for (int c = 0; c < kParamDim; ++c) {
        for (int t = 0; t < 40; ++t) {
            seq.frames(t, c) = static_cast<float>(std::sin(0.3 * t + c) * 0.2);
        }
    }
    seq.frames(11, 4) += 9.0f;
    seq.frames(30, 22) -= 12.0f;
    const MotionSequence once = repair_outliers(seq, {1.5});
    const MotionSequence twice = repair_outliers(once, {1.5});
    CHECK((once.frames - twice.frames).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("smoothing leaves constant input unchanged") {
    MotionSequence seq = zero_motion(12);
    seq.frames.col(2).setConstant(0.4f);
    SmoothingConfig cfg;
    const SmoothResult result = smooth_sequence(seq, cfg);
    CHECK((result.smoothed.frames - seq.frames).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(result.loss_trace.front() == doctest::Approx(0.0));
    CHECK(velocity_loss(seq.frames.cast<double>(), cfg.lambda) == doctest::Approx(0.0));
}

TEST_CASE("smoothing gradient matches central finite differences on random 5x56 input") {
    Rng rng(31);
    Eigen::MatrixXd y(5, kParamDim);
    Eigen::MatrixXd anchor(5, kParamDim);
    for (int t = 0; t < 5; ++t) {
        for (int c = 0; c < kParamDim; ++c) {
            y(t, c) = rng.normal();
            anchor(t, c) = rng.normal();
        }
    }
    SmoothingConfig cfg;
    cfg.lambda = 0.7;
    cfg.mu = 3.0;
    const Eigen::MatrixXd analytic = smoothing_gradient(y, anchor, cfg);
    const Eigen::MatrixXd numeric = fmtest::numeric_gradient(
        [&](const fmtest::Mat& m) { return smoothing_loss(m, anchor, cfg); }, y);
    CHECK(fmtest::max_rel_error(analytic, numeric) < 1e-4);
}

TEST_CASE("alternating channel strictly decreases the velocity objective") {
    MotionSequence seq = zero_motion(12);
    for (int t = 0; t < 12; ++t) {
        seq.frames(t, 5) = (t % 2 == 0) ? 1.0f : -1.0f;
    }
    SmoothingConfig cfg;  // defaults: 200 steps, mu kept at 0 for the bare objective
    cfg.mu = 0.0;
    const double initial = velocity_loss(seq.frames.cast<double>(), cfg.lambda);

    // reference oracle: plain gradient descent on the same quadratic
    Eigen::MatrixXd ref = seq.frames.cast<double>();
    for (int i = 0; i < 200; ++i) {
        ref -= 0.05 * smoothing_gradient(ref, seq.frames.cast<double>(), cfg);
    }
    const double oracle_value = velocity_loss(ref, cfg.lambda);
    CHECK(oracle_value < initial);

    const SmoothResult result = smooth_sequence(seq, cfg);
    const double after = velocity_loss(result.smoothed.frames.cast<double>(), cfg.lambda);
    CHECK(after < initial);
    CHECK(after < 0.5 * initial);
}

TEST_CASE("mu=0 drives the velocity objective to ~0 within 2k steps on a 10-frame case") {
    Rng rng(37);
    MotionSequence seq = zero_motion(10);
    for (int t = 0; t < 10; ++t) {
        for (int c = 0; c < kParamDim; ++c) {
            seq.frames(t, c) = static_cast<float>(rng.normal());
        }
    }
    SmoothingConfig cfg;
    cfg.mu = 0.0;
    cfg.steps = 2000;
    const double initial = velocity_loss(seq.frames.cast<double>(), cfg.lambda);
    const SmoothResult result = smooth_sequence(seq, cfg);
    const double final_value = velocity_loss(result.smoothed.frames.cast<double>(), cfg.lambda);
    CHECK(final_value <= 1e-6 * initial);
}

TEST_CASE("loss trace is non-increasing over 10-step windows") {
    Rng rng(41);
    MotionSequence seq = zero_motion(20);
    for (int t = 0; t < 20; ++t) {
        for (int c = 0; c < kParamDim; ++c) {
            seq.frames(t, c) = static_cast<float>(0.5 * rng.normal());
        }
    }
    const SmoothResult result = smooth_sequence(seq, SmoothingConfig{});
    const double tolerance = 1e-9 * std::max(1.0, result.loss_trace.front());
    for (size_t i = 0; i + 10 < result.loss_trace.size(); ++i) {
        CHECK(result.loss_trace[i + 10] <= result.loss_trace[i] + tolerance);
    }
}

TEST_CASE("lambda=0 zeroes the pose gradient of the velocity term") {
    Rng rng(43);
    Eigen::MatrixXd y(6, kParamDim);
    for (int t = 0; t < 6; ++t) {
        for (int c = 0; c < kParamDim; ++c) y(t, c) = rng.normal();
    }
    SmoothingConfig cfg;
    cfg.lambda = 0.0;
    cfg.mu = 0.0;
    const Eigen::MatrixXd grad = smoothing_gradient(y, y, cfg);
    CHECK(grad.rightCols(data::kPoseDim).cwiseAbs().maxCoeff() == 0.0);

    // Eq. 1 value decomposes as psi-term + lambda * theta-term
    SmoothingConfig full;
    full.lambda = 2.5;
    const double psi_only = velocity_loss(y, 0.0);
    Eigen::MatrixXd pose_only_frames = y;
    pose_only_frames.leftCols(data::kExpressionDim).setZero();
    const double theta_term = velocity_loss(pose_only_frames, 1.0);
    CHECK(velocity_loss(y, 2.5) == doctest::Approx(psi_only + 2.5 * theta_term).epsilon(1e-12));
}

TEST_CASE("head pose labels follow the sign table") {
    MotionSequence seq = zero_motion(1);
    auto set_neck = [&](double rx, double ry, double rz) {
        seq.frames(0, data::kNeckStart) = static_cast<float>(rx);
        seq.frames(0, data::kNeckStart + 1) = static_cast<float>(ry);
        seq.frames(0, data::kNeckStart + 2) = static_cast<float>(rz);
    };

    set_neck(0.2, 0.0, 0.0);
    auto states = label_head_pose(seq, 0.05);
    REQUIRE(states.size() == 1);
    REQUIRE(states[0].labels.size() == 1);
    CHECK(states[0].labels[0].first == PoseLabel::head_down);
    CHECK(states[0].labels[0].second == doctest::Approx(0.2));

    set_neck(0.0, 0.0, 0.0);
    CHECK(label_head_pose(seq, 0.05)[0].labels.empty());

    set_neck(-0.1, 0.3, -0.2);
    states = label_head_pose(seq, 0.05);
    std::set<PoseLabel> got;
    for (const auto& [label, angle] : states[0].labels) got.insert(label);
    CHECK(got == std::set<PoseLabel>{PoseLabel::head_up, PoseLabel::turns_left,
                                     PoseLabel::tilts_left});
}

TEST_CASE("head pose labeling matches the sign rules on the exhaustive sign grid") {
    const double vals[3] = {-0.2, 0.0, 0.2};
    MotionSequence seq = zero_motion(1);
    for (int ix = 0; ix < 3; ++ix) {
        for (int iy = 0; iy < 3; ++iy) {
            for (int iz = 0; iz < 3; ++iz) {
                seq.frames(0, data::kNeckStart) = static_cast<float>(vals[ix]);
                seq.frames(0, data::kNeckStart + 1) = static_cast<float>(vals[iy]);
                seq.frames(0, data::kNeckStart + 2) = static_cast<float>(vals[iz]);
                const auto states = label_head_pose(seq, 0.05);
                std::set<PoseLabel> got;
                for (const auto& [label, angle] : states[0].labels) got.insert(label);
                std::set<PoseLabel> expected;
                if (ix == 0) expected.insert(PoseLabel::head_up);
                if (ix == 2) expected.insert(PoseLabel::head_down);
                if (iy == 0) expected.insert(PoseLabel::turns_right);
                if (iy == 2) expected.insert(PoseLabel::turns_left);
                if (iz == 0) expected.insert(PoseLabel::tilts_left);
                if (iz == 2) expected.insert(PoseLabel::tilts_right);
                CHECK(got == expected);
            }
        }
    }
}

TEST_CASE("head pose labels ignore expression channels") {
    Rng rng(47);
    MotionSequence seq = zero_motion(6);
    seq.frames(3, data::kNeckStart + 1) = 0.4f;
    const auto before = label_head_pose(seq, 0.05);
    for (int t = 0; t < 6; ++t) {
        for (int c = 0; c < data::kExpressionDim; ++c) {
            seq.frames(t, c) = static_cast<float>(rng.normal());
        }
    }
    const auto after = label_head_pose(seq, 0.05);
    REQUIRE(before.size() == after.size());
    for (size_t t = 0; t < before.size(); ++t) {
        CHECK(before[t].labels == after[t].labels);
    }
}

TEST_CASE("AU event summarization finds maximal runs") {
    AuTrack track(6);
    const double vals[6] = {0.0, 0.0, 0.8, 0.9, 0.8, 0.0};
    for (int t = 0; t < 6; ++t) {
        if (vals[t] > 0.0) track[static_cast<size_t>(t)].push_back({12, vals[t]});
    }
    auto events = summarize_au_events(track, 0.5, 2);
    REQUIRE(events.size() == 1);
    CHECK(events[0].au_id == 12);
    CHECK(events[0].start == 2);
    CHECK(events[0].end == 4);
    CHECK(events[0].peak == doctest::Approx(0.9));

    CHECK(summarize_au_events(AuTrack(6), 0.5, 2).empty());
    CHECK(summarize_au_events(track, 0.5, 10).empty());
}

TEST_CASE("AU track JSON round trip") {
    fmtest::TempDir dir("au");
    AuTrack track(3);
    track[0].push_back({12, 0.5});
    track[2].push_back({2, 0.25});
    track[2].push_back({26, 1.0});
    save_au_track(track, dir.path() / "au.json");
    const AuTrack back = load_au_track(dir.path() / "au.json");
    REQUIRE(back.size() == 3);
    CHECK(back[0][0].au_id == 12);
    CHECK(back[0][0].intensity == 0.5);
    CHECK(back[2][1].au_id == 26);
}

TEST_CASE("prompt assembly honors evidence requirements") {
    PromptEvidence evidence;
    evidence.entry_id = "e1";
    evidence.emotion = "happy";
    evidence.n_frames = 10;

    const PromptRequest emotion_prompt = build_prompt(PromptKind::abstract_emotion, evidence);
    size_t first = emotion_prompt.prompt.find("happy");
    REQUIRE(first != std::string::npos);
    CHECK(emotion_prompt.prompt.find("happy", first + 1) == std::string::npos);

    const PromptRequest scenario_prompt = build_prompt(PromptKind::scenarios, evidence);
    CHECK(scenario_prompt.prompt.find("three possible scenarios") != std::string::npos);

    PromptEvidence no_frames = evidence;
    no_frames.n_frames = 0;
    CHECK_THROWS_AS(build_prompt(PromptKind::headpose_detail, no_frames), CurationError);

    PromptEvidence no_emotion;
    no_emotion.entry_id = "e2";
    CHECK_THROWS_AS(build_prompt(PromptKind::abstract_emotion, no_emotion), CurationError);
}

TEST_CASE("prompt evidence blocks serialize as (label, start, end, peak) tuples") {
    std::vector<AuEvent> events{{12, 2, 8, 0.91}, {26, 10, 14, 0.4}};
    const std::string s = serialize_au_events(events);
    CHECK(s == "(AU12, 2, 8, 0.91), (AU26, 10, 14, 0.40)");
    std::vector<PoseSegment> segments{{PoseLabel::turns_left, 1, 5, 0.3}};
    CHECK(serialize_pose_segments(segments) == "(head turns left, 1, 5, 0.30)");
}

TEST_CASE("stub client reproduces the synthetic ground truth bundles") {
    fmtest::TempDir dir("annotate-stub");
    data::SyntheticSpec spec;
    spec.seed = 404;
    spec.n_sequences = 20;
    const auto manifest = data::generate_synthetic_corpus(spec, dir.path());

    // move ground truth aside, re-annotate with the stub, compare
    std::vector<data::AnnotationBundle> truth;
    for (const auto& entry : manifest.entries) {
        truth.push_back(data::load_annotation(dir.path() / entry.annotation_path));
        std::filesystem::remove(dir.path() / entry.annotation_path);
    }
    StubClient stub;
    AnnotateConfig cfg;
    const AnnotateOutcome outcome = annotate(manifest, stub, cfg);
    CHECK(outcome.annotated == manifest.entries.size());
    CHECK(outcome.unannotated_ids.empty());
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto bundle = data::load_annotation(dir.path() / manifest.entries[i].annotation_path);
        CHECK(bundle.abstract_action == truth[i].abstract_action);
        CHECK(bundle.abstract_emotion == truth[i].abstract_emotion);
        CHECK(bundle.expression_detail == truth[i].expression_detail);
        CHECK(bundle.headpose_detail == truth[i].headpose_detail);
        CHECK(bundle.scenarios == truth[i].scenarios);
    }
}

TEST_CASE("lab-style abstract actions come from the seven predefined texts") {
    fmtest::TempDir dir("annotate-seven");
    data::SyntheticSpec spec;
    spec.seed = 2024;
    spec.n_sequences = 40;
    const auto manifest = data::generate_synthetic_corpus(spec, dir.path());
    int sing_count = 0;
    for (const auto& entry : manifest.entries) {
        const auto labels = load_entry_labels(dir.path() / "labels" / (entry.id + ".json"));
        const auto bundle = data::load_annotation(dir.path() / entry.annotation_path);
        const auto& pool = predefined_action_texts(labels.action);
        CHECK(pool.size() == 7);
        CHECK(std::find(pool.begin(), pool.end(), bundle.abstract_action) != pool.end());
        if (labels.action == "sing") ++sing_count;
    }
    CHECK(sing_count > 0);
}

namespace {
class AlwaysFailsClient : public TextCompletionClient {
public:
    std::string complete(const PromptRequest&) override {
        ++calls;
        throw CurationError("synthetic transport failure");
    }
    std::atomic<int> calls{0};
};
}  // namespace

TEST_CASE("failing client marks entries unannotated after retries and continues") {
    fmtest::TempDir dir("annotate-fail");
    data::SyntheticSpec spec;
    spec.seed = 11;
    spec.n_sequences = 20;
    auto manifest = data::generate_synthetic_corpus(spec, dir.path());
    manifest.entries.resize(2);
    for (const auto& entry : manifest.entries) {
        std::filesystem::remove(dir.path() / entry.annotation_path);
    }

    AlwaysFailsClient client;
    AnnotateConfig cfg;
    cfg.retries = 2;
    cfg.workers = 1;
    const AnnotateOutcome outcome = annotate(manifest, client, cfg);
    CHECK(outcome.annotated == 0);
    CHECK(outcome.unannotated_ids.size() == 2);
    // 3 attempts on the first prompt kind of each entry, then the entry is abandoned
    CHECK(client.calls.load() == 6);
    CHECK(outcome.attempts == 6);
}
