#include "facemotion/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "facemotion/curation/annotate.hpp"
#include "facemotion/curation/au_events.hpp"
#include "facemotion/curation/headpose.hpp"
#include "facemotion/curation/templates.hpp"

namespace facemotion::data {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Threshold/duration used both when writing ground-truth annotations and by
// the annotation stage; keep in sync with AnnotateConfig defaults.
constexpr double kAuThreshold = 0.25;
constexpr int kAuMinDuration = 2;
constexpr double kPoseThreshold = 0.05;
constexpr double kLipGain = 0.5;

struct ExprMotif {
    const char* name;
    int au_id;
    int channel;
    double rel_amp;
};

const std::vector<ExprMotif>& expr_motif_defs() {
    static const std::vector<ExprMotif> defs = {
        {"smile", 12, 1, 1.0},        {"frown", 15, 2, 1.0},
        {"brow raise", 2, 3, 0.9},    {"eyes widen", 5, 4, 0.9},
        {"squint", 7, 5, 0.9},        {"nose wrinkle", 9, 6, 1.0},
        {"lip press", 24, 7, 0.85},   {"jaw drop", 26, 8, 0.85},
    };
    return defs;
}

struct PoseMotif {
    const char* name;
    int axis;    // 0 = x, 1 = y, 2 = z on the neck triple
    double sign;
};

const std::vector<PoseMotif>& pose_motif_defs() {
    static const std::vector<PoseMotif> defs = {
        {"head up", 0, -1.0},          {"head down", 0, 1.0},
        {"head turns right", 1, -1.0}, {"head turns left", 1, 1.0},
        {"head tilts left", 2, -1.0},  {"head tilts right", 2, 1.0},
    };
    return defs;
}

// emotion -> expression motifs with relative strength
const std::map<std::string, std::vector<std::pair<std::string, double>>>& emotion_motifs() {
    static const std::map<std::string, std::vector<std::pair<std::string, double>>> m = {
        {"neutral", {}},
        {"happy", {{"smile", 1.0}}},
        {"calm", {{"smile", 0.85}}},
        {"sad", {{"frown", 1.0}}},
        {"angry", {{"squint", 1.0}, {"lip press", 0.9}}},
        {"surprised", {{"brow raise", 1.0}, {"eyes widen", 0.9}, {"jaw drop", 0.85}}},
        {"fearful", {{"eyes widen", 1.0}, {"brow raise", 0.85}}},
        {"disgusted", {{"nose wrinkle", 1.0}, {"squint", 0.9}}},
    };
    return m;
}

const ExprMotif& expr_motif_by_name(const std::string& name) {
    for (const auto& def : expr_motif_defs()) {
        if (name == def.name) return def;
    }
    throw SpecError("unknown expression motif: " + name);
}

// Linear attack - sustain - release envelope, zero outside [t0, t0+a+s+r).
std::vector<double> asr_envelope(int t_total, int t0, int attack, int sustain, int release,
                                 double peak) {
    std::vector<double> env(static_cast<size_t>(t_total), 0.0);
    int t = t0;
    for (int i = 0; i < attack && t < t_total; ++i, ++t) {
        env[static_cast<size_t>(t)] = peak * static_cast<double>(i + 1) / (attack + 1);
    }
    for (int i = 0; i < sustain && t < t_total; ++i, ++t) {
        env[static_cast<size_t>(t)] = peak;
    }
    for (int i = 0; i < release && t < t_total; ++i, ++t) {
        env[static_cast<size_t>(t)] = peak * static_cast<double>(release - i) / (release + 1);
    }
    return env;
}

struct EntryPlan {
    std::string id;
    int frames = 0;
    std::string action;
    std::string emotion;
    double intensity_bucket = 0.65;
    std::vector<std::pair<std::string, double>> expr_motifs;  // name, peak intensity
    std::vector<std::pair<std::string, double>> pose_motifs;  // name, amplitude (radians)
    bool has_audio = false;
};

}  // namespace

const std::vector<std::string>& MotifCatalog::expression_motifs() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& def : expr_motif_defs()) v.emplace_back(def.name);
        return v;
    }();
    return names;
}

const std::vector<std::string>& MotifCatalog::headpose_motifs() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& def : pose_motif_defs()) v.emplace_back(def.name);
        return v;
    }();
    return names;
}

const std::vector<std::string>& MotifCatalog::all_motifs() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v = expression_motifs();
        const auto& pose = headpose_motifs();
        v.insert(v.end(), pose.begin(), pose.end());
        v.emplace_back("neutral still");
        return v;
    }();
    return names;
}

CorpusManifest generate_synthetic_corpus(const SyntheticSpec& spec,
                                         const std::filesystem::path& out_dir) {
    if (spec.n_sequences < 20) {
        throw SpecError("synthetic corpus needs at least 20 sequences");
    }
    std::set<std::string> enabled;
    if (spec.motifs.empty()) {
        for (const auto& name : MotifCatalog::all_motifs()) enabled.insert(name);
    } else {
        const auto& catalog = MotifCatalog::all_motifs();
        for (const auto& name : spec.motifs) {
            if (std::find(catalog.begin(), catalog.end(), name) == catalog.end()) {
                throw SpecError("unknown motif name: " + name);
            }
            enabled.insert(name);
        }
    }
    const bool still_only = enabled.size() == 1 && enabled.count("neutral still") == 1;

    std::vector<std::string> enabled_pose;
    for (const auto& def : pose_motif_defs()) {
        if (enabled.count(def.name)) enabled_pose.emplace_back(def.name);
    }
    std::vector<std::string> eligible_emotions;
    for (const auto& [emotion, motifs] : emotion_motifs()) {
        bool ok = true;
        for (const auto& [name, rel] : motifs) {
            ok = ok && enabled.count(name) > 0;
        }
        if (ok && (!motifs.empty() || emotion == "neutral")) {
            eligible_emotions.push_back(emotion);
        }
    }

    std::filesystem::create_directories(out_dir / "motion");
    std::filesystem::create_directories(out_dir / "audio");
    std::filesystem::create_directories(out_dir / "annot");
    std::filesystem::create_directories(out_dir / "au");
    std::filesystem::create_directories(out_dir / "labels");

    Rng corpus_rng(spec.seed);
    CorpusManifest manifest;
    manifest.root = out_dir;
    manifest.config_echo = {
        {"kind", "synthetic-corpus"},
        {"seed", spec.seed},
        {"n_sequences", spec.n_sequences},
        {"motifs", spec.motifs.empty() ? MotifCatalog::all_motifs() : spec.motifs},
        {"split_ratios", spec.split_ratios},
    };

    for (int i = 0; i < spec.n_sequences; ++i) {
        Rng rng = corpus_rng.fork(static_cast<uint64_t>(i) + 1);
        EntryPlan plan;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "syn-%06d", i);
            plan.id = buf;
        }
        plan.frames = rng.uniform_int(kMinCorpusFrames, kMaxCorpusFrames);
        if (still_only) {
            plan.action = "expression";
            plan.emotion = "neutral";
        } else {
            const double a = rng.u01();
            plan.action = a < 0.45 ? "talk" : (a < 0.60 ? "sing" : "expression");
            plan.emotion = eligible_emotions[rng.below(eligible_emotions.size())];
            const double buckets[3] = {0.35, 0.65, 0.95};
            plan.intensity_bucket = buckets[rng.below(3)];
            for (const auto& [name, rel] : emotion_motifs().at(plan.emotion)) {
                plan.expr_motifs.emplace_back(name, plan.intensity_bucket * rel);
            }
            // up to two pose motifs on distinct axes
            if (!enabled_pose.empty() && rng.u01() > 0.25) {
                const int count = rng.u01() < 0.7 ? 1 : 2;
                std::vector<std::string> pool = enabled_pose;
                rng.shuffle(pool);
                std::set<int> used_axes;
                for (const auto& name : pool) {
                    if (static_cast<int>(plan.pose_motifs.size()) >= count) break;
                    int axis = -1;
                    for (const auto& def : pose_motif_defs()) {
                        if (name == def.name) axis = def.axis;
                    }
                    if (used_axes.insert(axis).second) {
                        plan.pose_motifs.emplace_back(name, rng.uniform(0.12, 0.5));
                    }
                }
            }
        }
        plan.has_audio = plan.action == "talk" || plan.action == "sing";

        const int t_total = plan.frames;
        Eigen::MatrixXd frames = Eigen::MatrixXd::Zero(t_total, kParamDim);
        curation::AuTrack au_track(static_cast<size_t>(t_total));

        // constant per-entry baseline; neck baseline stays below the label
        // threshold so baselines never produce pose labels
        for (int c = 0; c < kParamDim; ++c) {
            double baseline = 0.0;
            if (c < kExpressionDim) {
                baseline = rng.normal(0.0, 0.05);
            } else if (c >= kNeckStart) {
                baseline = rng.uniform(-0.03, 0.03);
            } else {
                baseline = rng.normal(0.0, 0.01);
            }
            frames.col(c).array() += baseline;
        }
        // faint smooth wander on expression channels (skip the lip channel)
        if (!still_only) {
            for (int c = 1; c < kExpressionDim; ++c) {
                const double amp = rng.uniform(0.0, 0.01);
                const double cycles = rng.uniform(0.5, 2.0);
                const double phase = rng.uniform(0.0, 2.0 * kPi);
                for (int t = 0; t < t_total; ++t) {
                    frames(t, c) += amp * std::sin(2.0 * kPi * cycles * t / t_total + phase);
                }
            }
        }

        // expression motifs
        for (const auto& [name, peak] : plan.expr_motifs) {
            const ExprMotif& def = expr_motif_by_name(name);
            const int attack = rng.uniform_int(3, 8);
            const int release = rng.uniform_int(3, 8);
            const int t0 = rng.uniform_int(0, std::max(1, t_total / 4));
            const int max_sustain = std::max(3, t_total - t0 - attack - release - 1);
            const int sustain = rng.uniform_int(3, std::max(3, std::min(max_sustain, 2 * t_total / 3)));
            const auto env = asr_envelope(t_total, t0, attack, sustain, release, peak);
            for (int t = 0; t < t_total; ++t) {
                frames(t, def.channel) += 0.8 * env[static_cast<size_t>(t)];
                if (env[static_cast<size_t>(t)] > 0.0) {
                    au_track[static_cast<size_t>(t)].push_back(
                        {def.au_id, std::min(1.0, env[static_cast<size_t>(t)])});
                }
            }
        }

        // head pose arcs
        for (const auto& [name, amp] : plan.pose_motifs) {
            const PoseMotif* def = nullptr;
            for (const auto& d : pose_motif_defs()) {
                if (name == d.name) def = &d;
            }
            const int len = rng.uniform_int(std::max(6, t_total / 3), std::max(7, 3 * t_total / 4));
            const int t0 = rng.uniform_int(0, std::max(1, t_total - len - 1));
            for (int t = t0; t < std::min(t_total, t0 + len); ++t) {
                const double arc = std::sin(kPi * static_cast<double>(t - t0) / len);
                frames(t, kNeckStart + def->axis) += def->sign * amp * arc;
            }
        }

        // speech envelope, lip channel, waveform
        AudioClip clip;
        if (plan.has_audio) {
            const bool sing = plan.action == "sing";
            std::vector<double> envelope(static_cast<size_t>(t_total), 0.0);
            int t = rng.uniform_int(0, 3);
            while (t < t_total) {
                const int burst = sing ? rng.uniform_int(8, 18) : rng.uniform_int(3, 8);
                const double amp = rng.uniform(0.4, 1.0);
                for (int k = 0; k < burst && t < t_total; ++k, ++t) {
                    const double shape = 0.5 * (1.0 - std::cos(2.0 * kPi * (k + 0.5) / burst));
                    envelope[static_cast<size_t>(t)] = amp * shape;
                }
                t += sing ? rng.uniform_int(2, 6) : rng.uniform_int(1, 5);
            }
            for (int f = 0; f < t_total; ++f) {
                const double e = envelope[static_cast<size_t>(f)];
                frames(f, kLipChannel) += kLipGain * e;
                if (e > 0.0) {
                    au_track[static_cast<size_t>(f)].push_back({25, std::min(1.0, e)});
                }
            }
            const double f0 = rng.uniform(110.0, 240.0);
            const size_t hop = static_cast<size_t>(kSampleRate / kFps);
            clip.samples.resize(static_cast<size_t>(t_total) * hop);
            for (size_t n = 0; n < clip.samples.size(); ++n) {
                const size_t frame = n / hop;
                const double e = envelope[frame];
                const double time = static_cast<double>(n) / kSampleRate;
                double freq = f0;
                if (sing) {
                    freq *= 1.0 + 0.03 * std::sin(2.0 * kPi * 5.5 * time);
                }
                double s = 0.7 * e * std::sin(2.0 * kPi * freq * time);
                if (sing) {
                    s += 0.2 * e * std::sin(2.0 * kPi * 2.0 * freq * time);
                }
                clip.samples[n] = static_cast<float>(std::clamp(s, -1.0, 1.0));
            }
        }

        MotionSequence motion;
        motion.frames = frames.cast<float>();
        motion.validate_for_corpus();
        write_container(motion, out_dir / "motion" / (plan.id + ".mmh"));
        curation::save_au_track(au_track, out_dir / "au" / (plan.id + ".json"));
        curation::save_entry_labels({plan.action, plan.emotion},
                                    out_dir / "labels" / (plan.id + ".json"));
        if (plan.has_audio) {
            write_wav(clip, out_dir / "audio" / (plan.id + ".wav"));
        }

        // ground-truth annotation from the same evidence path the stub client
        // sees, so stub re-annotation reproduces these bundles exactly
        curation::PromptEvidence evidence;
        evidence.entry_id = plan.id;
        evidence.action = plan.action;
        evidence.emotion = plan.emotion;
        evidence.has_au_track = true;
        evidence.au_events = curation::summarize_au_events(au_track, kAuThreshold, kAuMinDuration);
        evidence.n_frames = t_total;
        evidence.pose_segments =
            curation::summarize_pose_states(curation::label_head_pose(motion, kPoseThreshold));
        const AnnotationBundle bundle = curation::render_annotation_bundle(evidence);
        save_annotation(bundle, out_dir / "annot" / (plan.id + ".json"));

        CorpusEntry entry;
        entry.id = plan.id;
        entry.motion_path = "motion/" + plan.id + ".mmh";
        if (plan.has_audio) {
            entry.audio_path = "audio/" + plan.id + ".wav";
        }
        entry.annotation_path = "annot/" + plan.id + ".json";
        entry.source = "synthetic-lab";
        manifest.entries.push_back(std::move(entry));
    }

    manifest = split_corpus(manifest, spec.split_ratios, corpus_rng.fork(0xab5).u64());
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace facemotion::data
