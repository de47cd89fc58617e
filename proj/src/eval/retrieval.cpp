#include "facemotion/eval/retrieval.hpp"

#include <istream>
#include <ostream>

#include "facemotion/nn/optim.hpp"
#include "facemotion/nn/serialize.hpp"
#include "facemotion/parallel.hpp"

namespace facemotion::eval {

using namespace facemotion::nn;

std::string to_string(RetrievalMode mode) {
    return mode == RetrievalMode::text ? "text" : "audio";
}

RetrievalMode retrieval_mode_from_string(const std::string& s) {
    if (s == "text") return RetrievalMode::text;
    if (s == "audio") return RetrievalMode::audio;
    throw ConfigError("unknown retrieval mode: " + s);
}

void RetrievalConfig::validate() const {
    if (width < heads || width % heads != 0 || embed_dim < 2 || layers < 1) {
        throw ConfigError("bad retrieval dimensions");
    }
    if (temperature <= 0.0 || pool < 1) {
        throw ConfigError("bad retrieval hyperparameters");
    }
}

nlohmann::json RetrievalConfig::to_json() const {
    return {
        {"mode", to_string(mode)},     {"width", width},
        {"heads", heads},              {"ffn_hidden", ffn_hidden},
        {"layers", layers},            {"embed_dim", embed_dim},
        {"temperature", temperature},  {"pool", pool},
    };
}

RetrievalConfig RetrievalConfig::from_json(const nlohmann::json& j) {
    RetrievalConfig cfg;
    cfg.mode = retrieval_mode_from_string(j.value("mode", std::string("text")));
    cfg.width = j.value("width", cfg.width);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.ffn_hidden = j.value("ffn_hidden", cfg.ffn_hidden);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.pool = j.value("pool", cfg.pool);
    cfg.validate();
    return cfg;
}

namespace {
int motion_feature_dim(const RetrievalConfig& cfg) {
    // 400 face vertices x 3, plus the neck triple in text mode
    return 1200 + (cfg.mode == RetrievalMode::text ? 3 : 0);
}

gen::CondEncoderConfig tower_encoder_config(const RetrievalConfig& cfg) {
    gen::CondEncoderConfig ec;
    ec.width = cfg.width;
    ec.heads = cfg.heads;
    ec.ffn_hidden = cfg.ffn_hidden;
    ec.text_layers = cfg.layers;
    ec.audio_layers = cfg.layers;
    ec.audio_pool = cfg.pool;
    return ec;
}
}  // namespace

RetrievalModel::RetrievalModel(const RetrievalConfig& cfg, gen::SubwordVocab vocab, uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    Rng rng(seed);
    motion_in_ = Linear("ret.motion_in", motion_feature_dim(cfg_), cfg_.width, rng);
    for (int i = 0; i < cfg_.layers; ++i) {
        motion_layers_.emplace_back("ret.motion_layer" + std::to_string(i), cfg_.width, cfg_.heads,
                                    cfg_.ffn_hidden, rng);
    }
    motion_norm_ = LayerNormLayer("ret.motion_norm", cfg_.width);
    motion_proj_ = Linear("ret.motion_proj", cfg_.width, cfg_.embed_dim, rng);
    const auto ec = tower_encoder_config(cfg_);
    if (cfg_.mode == RetrievalMode::text) {
        text_encoder_ = gen::TextEncoder("ret.text", vocab_.size(), ec, rng);
        text_proj_ = Linear("ret.text_proj", cfg_.width, cfg_.embed_dim, rng);
    } else {
        audio_encoder_ = gen::AudioEncoder("ret.audio", ec, rng);
        audio_proj_ = Linear("ret.audio_proj", cfg_.width, cfg_.embed_dim, rng);
    }
}

ParamList RetrievalModel::params() {
    ParamList out;
    motion_in_.collect(out);
    for (auto& layer : motion_layers_) layer.collect(out);
    motion_norm_.collect(out);
    motion_proj_.collect(out);
    if (cfg_.mode == RetrievalMode::text) {
        text_encoder_.collect(out);
        text_proj_.collect(out);
    } else {
        audio_encoder_.collect(out);
        audio_proj_.collect(out);
    }
    return out;
}

Tensor RetrievalModel::motion_tower(GraphCtx& ctx, const Mat& face_features) const {
    if (face_features.cols() != motion_feature_dim(cfg_)) {
        throw EvalError("motion tower feature dimension mismatch");
    }
    Tensor h = motion_in_.forward(ctx, Tensor::constant(face_features));
    h = pool_rows_mean(relu(h), cfg_.pool);
    h = add(h, Tensor::constant(sinusoidal_positions(h.rows(), cfg_.width)));
    for (const auto& layer : motion_layers_) {
        h = layer.forward(ctx, h);
    }
    h = mean_rows(motion_norm_.forward(ctx, h));
    return l2_normalize_rows(motion_proj_.forward(ctx, h));
}

Tensor RetrievalModel::text_tower(GraphCtx& ctx, const std::string& text) const {
    if (cfg_.mode != RetrievalMode::text) {
        throw EvalError("text tower unavailable in audio mode");
    }
    Tensor pooled = text_encoder_.forward(ctx, vocab_.encode(text));
    return l2_normalize_rows(text_proj_.forward(ctx, pooled));
}

Tensor RetrievalModel::audio_tower(GraphCtx& ctx, const Mat& mel) const {
    if (cfg_.mode != RetrievalMode::audio) {
        throw EvalError("audio tower unavailable in text mode");
    }
    Tensor h = audio_encoder_.forward(ctx, mel);
    Tensor pooled = mean_rows(h);
    return l2_normalize_rows(audio_proj_.forward(ctx, pooled));
}

Eigen::RowVectorXd RetrievalModel::embed_motion(const data::MotionSequence& seq,
                                                const VertexModel& vm) const {
    GraphCtx ctx(false);
    const Mat features = vm.face_region_features(seq, cfg_.mode == RetrievalMode::text);
    return motion_tower(ctx, features).value().row(0);
}

Eigen::RowVectorXd RetrievalModel::embed_text(const std::string& text) const {
    GraphCtx ctx(false);
    return text_tower(ctx, text).value().row(0);
}

Eigen::RowVectorXd RetrievalModel::embed_audio(const data::AudioClip& clip) const {
    GraphCtx ctx(false);
    return audio_tower(ctx, gen::log_mel_frames(clip)).value().row(0);
}

void RetrievalModel::serialize(std::ostream& out) {
    const std::string config_text = cfg_.to_json().dump();
    const uint32_t len = static_cast<uint32_t>(config_text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(config_text.data(), len);
    vocab_.write(out);
    ParamList p = params();
    write_params(out, p);
}

RetrievalModel RetrievalModel::deserialize(std::istream& in) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || len > (1u << 20)) {
        throw IntegrityError("retrieval checkpoint header malformed");
    }
    std::string config_text(len, '\0');
    in.read(config_text.data(), len);
    if (!in) {
        throw IntegrityError("retrieval checkpoint truncated");
    }
    const RetrievalConfig cfg = RetrievalConfig::from_json(nlohmann::json::parse(config_text));
    gen::SubwordVocab vocab = gen::SubwordVocab::read(in);
    RetrievalModel model(cfg, std::move(vocab), 0);
    ParamList p = model.params();
    read_params(in, p);
    return model;
}

std::vector<RetrievalExample> prepare_retrieval_examples(const data::CorpusManifest& manifest,
                                                         data::Split split, RetrievalMode mode,
                                                         const VertexModel& vm, int workers) {
    std::vector<const data::CorpusEntry*> entries;
    for (const auto* entry : manifest.split_entries(split)) {
        if (mode == RetrievalMode::audio && !entry->audio_path) continue;
        entries.push_back(entry);
    }
    std::vector<RetrievalExample> examples(entries.size());
    parallel_for(entries.size(), workers, [&](size_t i) {
        const data::CorpusEntry& entry = *entries[i];
        RetrievalExample& ex = examples[i];
        ex.id = entry.id;
        const data::MotionSequence motion =
            data::read_container(manifest.root / entry.motion_path);
        ex.face_features = vm.face_region_features(motion, mode == RetrievalMode::text);
        if (mode == RetrievalMode::text) {
            ex.text = data::load_annotation(manifest.root / entry.annotation_path).full_text();
        } else {
            ex.mel = gen::log_mel_frames(data::read_wav(manifest.root / *entry.audio_path));
        }
    });
    return examples;
}

nlohmann::json RetrievalTrainConfig::to_json() const {
    return {
        {"steps", steps},   {"batch_size", batch_size}, {"lr", lr},
        {"seed", seed},     {"val_every", val_every},   {"val_batches", val_batches},
    };
}

std::pair<Mat, Mat> embed_pairs(const RetrievalModel& model,
                                const std::vector<RetrievalExample>& examples, int workers) {
    Mat motion(static_cast<Eigen::Index>(examples.size()), model.config().embed_dim);
    Mat other(static_cast<Eigen::Index>(examples.size()), model.config().embed_dim);
    parallel_for(examples.size(), workers, [&](size_t i) {
        GraphCtx ctx(false);
        motion.row(static_cast<Eigen::Index>(i)) =
            model.motion_tower(ctx, examples[i].face_features).value().row(0);
        if (model.config().mode == RetrievalMode::text) {
            other.row(static_cast<Eigen::Index>(i)) =
                model.text_tower(ctx, examples[i].text).value().row(0);
        } else {
            other.row(static_cast<Eigen::Index>(i)) =
                model.audio_tower(ctx, examples[i].mel).value().row(0);
        }
    });
    return {std::move(motion), std::move(other)};
}

RetrievalTrainResult train_retrieval(RetrievalModel& model,
                                     const std::vector<RetrievalExample>& train,
                                     const std::vector<RetrievalExample>& val,
                                     const RetrievalTrainConfig& cfg) {
    if (static_cast<int>(train.size()) < cfg.batch_size) {
        throw EvalError("retrieval training needs at least one full batch of pairs");
    }
    ParamList params = model.params();
    Adam optimizer({.lr = cfg.lr, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2, .eps = 1e-8});
    Rng rng(cfg.seed);
    RetrievalTrainResult result;
    result.loss_curve.reserve(static_cast<size_t>(cfg.steps));

    std::vector<size_t> pool(train.size());
    std::iota(pool.begin(), pool.end(), size_t{0});

    for (int step = 1; step <= cfg.steps; ++step) {
        rng.shuffle(pool);
        const int b = cfg.batch_size;

        // tower forwards are independent; run them in parallel, then couple
        // them in one InfoNCE graph on this thread
        std::vector<GraphCtx> contexts(static_cast<size_t>(b) * 2,
                                       GraphCtx(true));
        std::vector<Tensor> motion_rows(static_cast<size_t>(b));
        std::vector<Tensor> other_rows(static_cast<size_t>(b));
        parallel_for(static_cast<size_t>(b) * 2, cfg.workers, [&](size_t slot) {
            const size_t i = slot / 2;
            const RetrievalExample& ex = train[pool[i]];
            if (slot % 2 == 0) {
                motion_rows[i] = model.motion_tower(contexts[slot], ex.face_features);
            } else if (model.config().mode == RetrievalMode::text) {
                other_rows[i] = model.text_tower(contexts[slot], ex.text);
            } else {
                other_rows[i] = model.audio_tower(contexts[slot], ex.mel);
            }
        });

        Tensor motion = concat_rows(motion_rows);
        Tensor other = concat_rows(other_rows);
        Tensor logits = scale(matmul(motion, transpose(other)), 1.0 / model.config().temperature);
        std::vector<int> diagonal(static_cast<size_t>(b));
        std::iota(diagonal.begin(), diagonal.end(), 0);
        Tensor loss = scale(add(cross_entropy_mean(logits, diagonal),
                                cross_entropy_mean(transpose(logits), diagonal)),
                            0.5);
        loss.backward();
        for (auto& ctx : contexts) {
            ctx.accumulate_grads();
        }
        result.loss_curve.push_back(loss.scalar());
        if (!std::isfinite(loss.scalar())) {
            throw TrainingError("retrieval training diverged at step " + std::to_string(step));
        }
        optimizer.step(params);
        optimizer.zero_grad(params);
    }

    if (!val.empty() && static_cast<int>(val.size()) >= cfg.batch_size) {
        const auto [motion, other] = embed_pairs(model, val, cfg.workers);
        result.val_r_precision = r_precision(other, motion, cfg.batch_size, cfg.val_batches,
                                             cfg.seed ^ 0x9e37u);
    }
    return result;
}

}  // namespace facemotion::eval
