#include "facemotion/harness/config.hpp"

#include <fstream>
#include <set>

namespace facemotion::harness {

namespace {
void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key '" + key + "' in " + where);
        }
    }
}
}  // namespace

void RunConfig::apply_profile(const std::string& name) {
    if (name == "small") {
        data.n_sequences = 1000;
        codec.model.codebook_size = 64;
        codec.model.code_dim = 32;
        codec.model.channels = 128;
        codec.train.steps = 2000;
        codec.train.batch_size = 6;
        codec.train.window = 64;
        generator.model.width = 128;
        generator.model.ffn_hidden = 256;
        generator.model.layers = 2;
        generator.model.heads = 4;
        generator.model.codebook_size = 64;
        generator.model.encoders.width = 128;
        generator.model.encoders.ffn_hidden = 256;
        generator.train.steps = 600;
        generator.train.batch_size = 6;
        eval.retrieval.width = 64;
        eval.retrieval.embed_dim = 64;
        eval.retrieval_train.steps = 400;
    } else if (name == "paper") {
        data.n_sequences = 4000;
        codec.model.codebook_size = 256;
        codec.model.code_dim = 128;
        codec.model.channels = 512;
        codec.train.steps = 20000;
        codec.train.batch_size = 16;
        generator.model.width = 512;
        generator.model.ffn_hidden = 1024;
        generator.model.layers = 6;
        generator.model.heads = 8;
        generator.model.codebook_size = 256;
        generator.model.encoders.width = 512;
        generator.model.encoders.ffn_hidden = 1024;
        generator.model.encoders.text_layers = 2;
        generator.model.encoders.audio_layers = 4;
        generator.train.steps = 20000;
        generator.train.batch_size = 16;
        eval.retrieval.width = 128;
        eval.retrieval.embed_dim = 64;
        eval.retrieval_train.steps = 2000;
    } else {
        throw ConfigError("unknown profile: " + name + " (expected 'small' or 'paper')");
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["verbosity"] = verbosity;
    j["workers"] = workers;
    j["data"] = {
        {"n_sequences", data.n_sequences},
        {"motifs", data.motifs},
        {"split_ratios", data.split_ratios},
    };
    j["curation"] = {
        {"outlier_scale", curation.outliers.scale},
        {"lambda", curation.smoothing.lambda},
        {"mu", curation.smoothing.mu},
        {"steps", curation.smoothing.steps},
        {"lr", curation.smoothing.lr},
        {"pose_threshold", curation.pose_threshold},
        {"au_threshold", curation.au_threshold},
        {"au_min_duration", curation.au_min_duration},
        {"retries", curation.retries},
        {"max_in_flight", curation.max_in_flight},
        {"min_request_interval_s", curation.min_request_interval_s},
    };
    j["codec"] = codec.model.to_json();
    j["codec"]["train"] = codec.train.to_json();
    j["generator"] = generator.model.to_json();
    j["generator"]["train"] = generator.train.to_json();
    j["generator"]["vocab_words"] = generator.vocab_words;
    j["eval"] = {
        {"retrieval", eval.retrieval.to_json()},
        {"retrieval_train", eval.retrieval_train.to_json()},
        {"rp_batches", eval.rp_batches},
        {"diversity_pairs", eval.diversity_pairs},
        {"vertex_seed", eval.vertex_seed},
    };
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    reject_unknown_keys(j, {"seed", "out_dir", "verbosity", "workers", "profile", "data",
                            "curation", "codec", "generator", "eval"},
                        "config root");
    if (j.contains("profile")) {
        cfg.apply_profile(j["profile"].get<std::string>());
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.verbosity = j.value("verbosity", cfg.verbosity);
    cfg.workers = j.value("workers", cfg.workers);

    if (j.contains("data")) {
        const auto& d = j["data"];
        reject_unknown_keys(d, {"n_sequences", "motifs", "split_ratios"}, "data");
        cfg.data.n_sequences = d.value("n_sequences", cfg.data.n_sequences);
        if (d.contains("motifs")) {
            cfg.data.motifs = d["motifs"].get<std::vector<std::string>>();
        }
        if (d.contains("split_ratios")) {
            const auto r = d["split_ratios"].get<std::vector<double>>();
            if (r.size() != 3) {
                throw ConfigError("split_ratios must have 3 entries");
            }
            cfg.data.split_ratios = {r[0], r[1], r[2]};
        }
    }
    if (j.contains("curation")) {
        const auto& c = j["curation"];
        reject_unknown_keys(c,
                            {"outlier_scale", "lambda", "mu", "steps", "lr", "pose_threshold",
                             "au_threshold", "au_min_duration", "retries", "max_in_flight",
                             "min_request_interval_s"},
                            "curation");
        cfg.curation.outliers.scale = c.value("outlier_scale", cfg.curation.outliers.scale);
        cfg.curation.smoothing.lambda = c.value("lambda", cfg.curation.smoothing.lambda);
        cfg.curation.smoothing.mu = c.value("mu", cfg.curation.smoothing.mu);
        cfg.curation.smoothing.steps = c.value("steps", cfg.curation.smoothing.steps);
        cfg.curation.smoothing.lr = c.value("lr", cfg.curation.smoothing.lr);
        cfg.curation.pose_threshold = c.value("pose_threshold", cfg.curation.pose_threshold);
        cfg.curation.au_threshold = c.value("au_threshold", cfg.curation.au_threshold);
        cfg.curation.au_min_duration = c.value("au_min_duration", cfg.curation.au_min_duration);
        cfg.curation.retries = c.value("retries", cfg.curation.retries);
        cfg.curation.max_in_flight = c.value("max_in_flight", cfg.curation.max_in_flight);
        cfg.curation.min_request_interval_s =
            c.value("min_request_interval_s", cfg.curation.min_request_interval_s);
    }
    if (j.contains("codec")) {
        nlohmann::json c = j["codec"];
        reject_unknown_keys(c,
                            {"downsample_rate", "channels", "code_dim", "codebook_size", "alpha",
                             "beta", "ema_decay", "dead_code_window", "train"},
                            "codec");
        nlohmann::json train = nlohmann::json::object();
        if (c.contains("train")) {
            train = c["train"];
            c.erase("train");
            reject_unknown_keys(train,
                                {"steps", "batch_size", "window", "lr", "adam_beta1",
                                 "adam_beta2", "val_every", "seed"},
                                "codec.train");
        }
        nlohmann::json merged = cfg.codec.model.to_json();
        merged.update(c);
        cfg.codec.model = codec::CodecConfig::from_json(merged);
        cfg.codec.train.steps = train.value("steps", cfg.codec.train.steps);
        cfg.codec.train.batch_size = train.value("batch_size", cfg.codec.train.batch_size);
        cfg.codec.train.window = train.value("window", cfg.codec.train.window);
        cfg.codec.train.lr = train.value("lr", cfg.codec.train.lr);
        cfg.codec.train.adam_beta1 = train.value("adam_beta1", cfg.codec.train.adam_beta1);
        cfg.codec.train.adam_beta2 = train.value("adam_beta2", cfg.codec.train.adam_beta2);
        cfg.codec.train.val_every = train.value("val_every", cfg.codec.train.val_every);
    }
    if (j.contains("generator")) {
        nlohmann::json g = j["generator"];
        reject_unknown_keys(g,
                            {"layers", "heads", "width", "ffn_hidden", "codebook_size",
                             "max_tokens", "audio_window", "temperature", "top_k", "fusion",
                             "text_layers", "audio_layers", "encoder_ffn_hidden", "audio_pool",
                             "vocab_words", "train"},
                            "generator");
        nlohmann::json train = nlohmann::json::object();
        if (g.contains("train")) {
            train = g["train"];
            g.erase("train");
            reject_unknown_keys(train,
                                {"steps", "batch_size", "lr", "adam_beta1", "adam_beta2",
                                 "val_every", "seed", "shuffled_text_pairing"},
                                "generator.train");
        }
        cfg.generator.vocab_words = g.value("vocab_words", cfg.generator.vocab_words);
        g.erase("vocab_words");
        nlohmann::json merged = cfg.generator.model.to_json();
        merged.update(g);
        cfg.generator.model = gen::GeneratorConfig::from_json(merged);
        cfg.generator.train.steps = train.value("steps", cfg.generator.train.steps);
        cfg.generator.train.batch_size = train.value("batch_size", cfg.generator.train.batch_size);
        cfg.generator.train.lr = train.value("lr", cfg.generator.train.lr);
        cfg.generator.train.adam_beta1 = train.value("adam_beta1", cfg.generator.train.adam_beta1);
        cfg.generator.train.adam_beta2 = train.value("adam_beta2", cfg.generator.train.adam_beta2);
        cfg.generator.train.val_every = train.value("val_every", cfg.generator.train.val_every);
        cfg.generator.train.shuffled_text_pairing =
            train.value("shuffled_text_pairing", cfg.generator.train.shuffled_text_pairing);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        reject_unknown_keys(
            e, {"retrieval", "retrieval_train", "rp_batches", "diversity_pairs", "vertex_seed"},
            "eval");
        if (e.contains("retrieval")) {
            nlohmann::json merged = cfg.eval.retrieval.to_json();
            merged.update(e["retrieval"]);
            cfg.eval.retrieval = eval::RetrievalConfig::from_json(merged);
        }
        if (e.contains("retrieval_train")) {
            const auto& t = e["retrieval_train"];
            reject_unknown_keys(t, {"steps", "batch_size", "lr", "val_every", "seed",
                                    "val_batches"},
                                "eval.retrieval_train");
            cfg.eval.retrieval_train.steps = t.value("steps", cfg.eval.retrieval_train.steps);
            cfg.eval.retrieval_train.batch_size =
                t.value("batch_size", cfg.eval.retrieval_train.batch_size);
            cfg.eval.retrieval_train.lr = t.value("lr", cfg.eval.retrieval_train.lr);
            cfg.eval.retrieval_train.val_every =
                t.value("val_every", cfg.eval.retrieval_train.val_every);
            cfg.eval.retrieval_train.val_batches =
                t.value("val_batches", cfg.eval.retrieval_train.val_batches);
        }
        cfg.eval.rp_batches = e.value("rp_batches", cfg.eval.rp_batches);
        cfg.eval.diversity_pairs = e.value("diversity_pairs", cfg.eval.diversity_pairs);
        cfg.eval.vertex_seed = e.value("vertex_seed", cfg.eval.vertex_seed);
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return from_json(j);
}

}  // namespace facemotion::harness
