#include "facemotion/eval/benchmark.hpp"

#include <sstream>

#include "facemotion/parallel.hpp"

namespace facemotion::eval {

using nn::Mat;

std::string to_string(BenchmarkMode mode) {
    return mode == BenchmarkMode::bench1 ? "bench1" : "bench2";
}

BenchmarkMode benchmark_mode_from_string(const std::string& s) {
    if (s == "bench1") return BenchmarkMode::bench1;
    if (s == "bench2") return BenchmarkMode::bench2;
    throw ConfigError("unknown benchmark mode: " + s);
}

nlohmann::json MetricRow::to_json() const {
    nlohmann::json j = {
        {"r_precision", {{"top1", r_precision.top1},
                         {"top2", r_precision.top2},
                         {"top3", r_precision.top3}}},
        {"fid", fid},
        {"matching", matching},
        {"diversity", diversity},
    };
    if (lve_mm) j["lve_mm"] = *lve_mm;
    if (fve_mm) j["fve_mm"] = *fve_mm;
    return j;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json rows_json;
    for (const auto& [name, row] : rows) {
        rows_json[name] = row.to_json();
    }
    return {
        {"mode", mode}, {"rows", rows_json},   {"n_test", n_test},
        {"seed", seed}, {"config", config_echo},
    };
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport report;
    report.mode = j.at("mode").get<std::string>();
    report.n_test = j.at("n_test").get<size_t>();
    report.seed = j.at("seed").get<uint64_t>();
    if (j.contains("config")) report.config_echo = j["config"];
    for (const auto& [name, row_json] : j.at("rows").items()) {
        MetricRow row;
        row.r_precision.top1 = row_json.at("r_precision").at("top1").get<double>();
        row.r_precision.top2 = row_json.at("r_precision").at("top2").get<double>();
        row.r_precision.top3 = row_json.at("r_precision").at("top3").get<double>();
        row.fid = row_json.at("fid").get<double>();
        row.matching = row_json.at("matching").get<double>();
        row.diversity = row_json.at("diversity").get<double>();
        if (row_json.contains("lve_mm")) row.lve_mm = row_json["lve_mm"].get<double>();
        if (row_json.contains("fve_mm")) row.fve_mm = row_json["fve_mm"].get<double>();
        report.rows[name] = row;
    }
    return report;
}

std::string MetricReport::render_table() const {
    std::ostringstream out;
    out << "benchmark: " << mode << "  (n_test=" << n_test << ", seed=" << seed << ")\n";
    char header[160];
    std::snprintf(header, sizeof(header), "%-16s %7s %7s %7s %9s %9s %9s %9s %9s\n", "row",
                  "R@1", "R@2", "R@3", "FID", "Match", "Divers", "LVE(mm)", "FVE(mm)");
    out << header;
    for (const auto& [name, row] : rows) {
        char line[200];
        std::snprintf(line, sizeof(line), "%-16s %7.3f %7.3f %7.3f %9.4f %9.4f %9.4f %9s %9s\n",
                      name.c_str(), row.r_precision.top1, row.r_precision.top2,
                      row.r_precision.top3, row.fid, row.matching, row.diversity,
                      row.lve_mm ? std::to_string(*row.lve_mm).substr(0, 8).c_str() : "-",
                      row.fve_mm ? std::to_string(*row.fve_mm).substr(0, 8).c_str() : "-");
        out << line;
    }
    return out.str();
}

MetricReport evaluate_benchmark(BenchmarkMode mode, const gen::MotionTokenGenerator& generator,
                                const codec::MotionCodec& codec,
                                const RetrievalModel& text_retrieval,
                                const RetrievalModel* audio_retrieval,
                                const data::CorpusManifest& manifest, const VertexModel& vm,
                                uint64_t seed, const BenchmarkConfig& cfg) {
    const bool bench1 = mode == BenchmarkMode::bench1;
    if (bench1 && audio_retrieval == nullptr) {
        throw EvalError("bench1 needs the audio retrieval model for the audio matching score");
    }
    if (text_retrieval.config().mode != RetrievalMode::text) {
        throw EvalError("text retrieval model expected");
    }

    struct TestItem {
        const data::CorpusEntry* entry;
        data::MotionSequence real;
        data::AnnotationBundle annotation;
        std::optional<data::AudioClip> audio;
    };
    std::vector<TestItem> items;
    for (const auto* entry : manifest.split_entries(data::Split::test)) {
        if (bench1 && !entry->audio_path) continue;  // bench1 covers audio-paired clips
        TestItem item;
        item.entry = entry;
        item.real = data::read_container(manifest.root / entry->motion_path);
        item.annotation = data::load_annotation(manifest.root / entry->annotation_path);
        if (bench1 && entry->audio_path) {
            item.audio = data::read_wav(manifest.root / *entry->audio_path);
        }
        items.push_back(std::move(item));
    }
    if (items.size() < 32) {
        throw EvalError("test split too small for batched R-precision (need >= 32)");
    }

    const size_t n = items.size();
    const int embed_dim = text_retrieval.config().embed_dim;
    Mat real_motion_emb(n, embed_dim);
    Mat recons_motion_emb(n, embed_dim);
    Mat gen_motion_emb(n, embed_dim);
    Mat text_emb(n, embed_dim);
    const int audio_dim = bench1 ? audio_retrieval->config().embed_dim : 0;
    Mat audio_emb(bench1 ? n : 0, audio_dim);
    Mat real_motion_audio_emb(bench1 ? n : 0, audio_dim);
    Mat recons_motion_audio_emb(bench1 ? n : 0, audio_dim);
    Mat gen_motion_audio_emb(bench1 ? n : 0, audio_dim);
    std::vector<double> lve_recons(n, 0.0), fve_recons(n, 0.0);
    std::vector<double> lve_gen(n, 0.0), fve_gen(n, 0.0);

    Rng seeder(seed);
    std::vector<uint64_t> item_seeds(n);
    for (auto& s : item_seeds) s = seeder.u64();

    parallel_for(n, cfg.workers, [&](size_t i) {
        const TestItem& item = items[i];
        const Eigen::Index row = static_cast<Eigen::Index>(i);

        const data::MotionSequence recons = codec.reconstruct(item.real);
        real_motion_emb.row(row) = text_retrieval.embed_motion(item.real, vm);
        recons_motion_emb.row(row) = text_retrieval.embed_motion(recons, vm);
        text_emb.row(row) = text_retrieval.embed_text(item.annotation.full_text());
        if (bench1) {
            auto [l_rec, f_rec] = lve_fve(item.real, recons, vm);
            lve_recons[i] = l_rec;
            fve_recons[i] = f_rec;
        }

        data::MotionSequence generated;
        if (cfg.include_generated) {
            const gen::ConditioningBundle bundle = generator.encode_conditions(
                item.annotation, item.audio ? &*item.audio : nullptr);
            // audio conditioning pins the generated length to the clip; the
            // text-only benchmark lets EOS decide
            const std::optional<int> target_frames =
                item.audio ? std::optional<int>(static_cast<int>(item.real.length()))
                           : std::nullopt;
            const gen::GenerateResult result = generator.generate(
                codec, bundle, generator.config().sampling, item_seeds[i], target_frames);
            generated = result.motion;
            gen_motion_emb.row(row) = text_retrieval.embed_motion(generated, vm);
            if (bench1) {
                auto [l_gen, f_gen] = lve_fve(item.real, generated, vm);
                lve_gen[i] = l_gen;
                fve_gen[i] = f_gen;
            }
        }

        if (bench1) {
            audio_emb.row(row) = audio_retrieval->embed_audio(*item.audio);
            real_motion_audio_emb.row(row) = audio_retrieval->embed_motion(item.real, vm);
            recons_motion_audio_emb.row(row) = audio_retrieval->embed_motion(recons, vm);
            if (cfg.include_generated) {
                gen_motion_audio_emb.row(row) = audio_retrieval->embed_motion(generated, vm);
            }
        }
    });

    auto mean_of = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (const double x : v) acc += x;
        return acc / static_cast<double>(v.size());
    };

    MetricReport report;
    report.mode = to_string(mode);
    report.n_test = n;
    report.seed = seed;
    report.config_echo = {
        {"generator", generator.config().to_json()},
        {"codec", codec.config().to_json()},
        {"text_retrieval", text_retrieval.config().to_json()},
        {"rp_batches", cfg.rp_batches},
        {"diversity_pairs", cfg.diversity_pairs},
    };
    if (bench1) {
        report.config_echo["audio_retrieval"] = audio_retrieval->config().to_json();
    }

    auto make_row = [&](const Mat& motion_emb, const Mat& motion_audio_emb,
                        std::optional<double> lve, std::optional<double> fve) {
        MetricRow row_out;
        row_out.r_precision =
            r_precision(text_emb, motion_emb, 32, cfg.rp_batches, seed ^ 0x5151u);
        row_out.fid = fid(real_motion_emb, motion_emb);
        row_out.matching = bench1 ? matching_score(audio_emb, motion_audio_emb)
                                  : matching_score(text_emb, motion_emb);
        row_out.diversity = diversity(motion_emb, cfg.diversity_pairs, seed ^ 0xd1eu);
        row_out.lve_mm = lve;
        row_out.fve_mm = fve;
        return row_out;
    };

    report.rows["real"] =
        make_row(real_motion_emb, real_motion_audio_emb,
                 bench1 ? std::optional<double>(0.0) : std::nullopt,
                 bench1 ? std::optional<double>(0.0) : std::nullopt);
    report.rows["reconstruction"] =
        make_row(recons_motion_emb, recons_motion_audio_emb,
                 bench1 ? std::optional<double>(mean_of(lve_recons)) : std::nullopt,
                 bench1 ? std::optional<double>(mean_of(fve_recons)) : std::nullopt);
    if (cfg.include_generated) {
        report.rows["generated"] =
            make_row(gen_motion_emb, gen_motion_audio_emb,
                     bench1 ? std::optional<double>(mean_of(lve_gen)) : std::nullopt,
                     bench1 ? std::optional<double>(mean_of(fve_gen)) : std::nullopt);
    }
    return report;
}

}  // namespace facemotion::eval
