#include "facemotion/gen/model.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "facemotion/nn/serialize.hpp"

namespace facemotion::gen {

using namespace facemotion::nn;

std::string to_string(FeatureStream s) {
    switch (s) {
        case FeatureStream::full_text: return "full_text";
        case FeatureStream::hier_text: return "hier_text";
        case FeatureStream::audio: return "audio";
    }
    throw ValidationError("unknown feature stream");
}

FeatureStream feature_stream_from_string(const std::string& s) {
    if (s == "full_text") return FeatureStream::full_text;
    if (s == "hier_text") return FeatureStream::hier_text;
    if (s == "audio") return FeatureStream::audio;
    throw ConfigError("unknown feature stream: " + s);
}

void FusionConfig::validate() const {
    auto no_dups = [](const std::vector<FeatureStream>& v) {
        for (size_t i = 0; i < v.size(); ++i) {
            for (size_t j = i + 1; j < v.size(); ++j) {
                if (v[i] == v[j]) return false;
            }
        }
        return true;
    };
    if (!no_dups(self_inputs) || !no_dups(cross_inputs)) {
        throw ConfigError("fusion stream lists must not repeat a feature");
    }
}

nlohmann::json FusionConfig::to_json() const {
    nlohmann::json self = nlohmann::json::array();
    for (const auto s : self_inputs) self.push_back(to_string(s));
    nlohmann::json cross = nlohmann::json::array();
    for (const auto s : cross_inputs) cross.push_back(to_string(s));
    return {{"self_inputs", self}, {"cross_inputs", cross}};
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
    FusionConfig cfg;
    if (j.contains("self_inputs")) {
        cfg.self_inputs.clear();
        for (const auto& s : j["self_inputs"]) {
            cfg.self_inputs.push_back(feature_stream_from_string(s.get<std::string>()));
        }
    }
    if (j.contains("cross_inputs")) {
        cfg.cross_inputs.clear();
        for (const auto& s : j["cross_inputs"]) {
            cfg.cross_inputs.push_back(feature_stream_from_string(s.get<std::string>()));
        }
    }
    cfg.validate();
    return cfg;
}

void GeneratorConfig::validate() const {
    if (layers < 1 || heads < 1 || width < heads || width % heads != 0) {
        throw ConfigError("bad generator transformer dimensions");
    }
    if (codebook_size < 2 || max_tokens < 1) {
        throw ConfigError("bad generator vocabulary config");
    }
    if (sampling.top_k < 1 || (!sampling.argmax && sampling.temperature <= 0.0)) {
        throw ConfigError("stochastic sampling needs temperature > 0 and top_k >= 1");
    }
    if (encoders.width != width) {
        throw ConfigError("conditioning width must equal the decoder width");
    }
    fusion.validate();
}

nlohmann::json GeneratorConfig::to_json() const {
    return {
        {"layers", layers},
        {"heads", heads},
        {"width", width},
        {"ffn_hidden", ffn_hidden},
        {"codebook_size", codebook_size},
        {"max_tokens", max_tokens},
        {"audio_window", audio_window},
        {"temperature", sampling.temperature},
        {"top_k", sampling.top_k},
        {"fusion", fusion.to_json()},
        {"text_layers", encoders.text_layers},
        {"audio_layers", encoders.audio_layers},
        {"encoder_ffn_hidden", encoders.ffn_hidden},
        {"audio_pool", encoders.audio_pool},
    };
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    cfg.layers = j.value("layers", cfg.layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.width = j.value("width", cfg.width);
    cfg.ffn_hidden = j.value("ffn_hidden", cfg.ffn_hidden);
    cfg.codebook_size = j.value("codebook_size", cfg.codebook_size);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    cfg.audio_window = j.value("audio_window", cfg.audio_window);
    cfg.sampling.temperature = j.value("temperature", cfg.sampling.temperature);
    cfg.sampling.top_k = j.value("top_k", cfg.sampling.top_k);
    if (j.contains("fusion")) {
        cfg.fusion = FusionConfig::from_json(j["fusion"]);
    }
    cfg.encoders.width = cfg.width;
    cfg.encoders.heads = cfg.heads;
    cfg.encoders.text_layers = j.value("text_layers", cfg.encoders.text_layers);
    cfg.encoders.audio_layers = j.value("audio_layers", cfg.encoders.audio_layers);
    cfg.encoders.ffn_hidden = j.value("encoder_ffn_hidden", cfg.encoders.ffn_hidden);
    cfg.encoders.audio_pool = j.value("audio_pool", cfg.encoders.audio_pool);
    cfg.validate();
    return cfg;
}

MotionTokenGenerator::MotionTokenGenerator(const GeneratorConfig& cfg, SubwordVocab vocab,
                                           uint64_t seed)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    encoders_ = ConditionEncoders(std::move(vocab), cfg_.encoders, rng.u64());
    token_embedding_ = EmbeddingTable("dec.token_emb", vocab_size(), cfg_.width, rng);
    const int max_positions = 2 * cfg_.max_tokens + 10;
    position_table_.name = "dec.positions";
    position_table_.value = Mat(max_positions, cfg_.width);
    init_normal(position_table_, rng, 0.02);
    for (int i = 0; i < cfg_.layers; ++i) {
        layers_.emplace_back("dec.layer" + std::to_string(i), cfg_.width, cfg_.heads,
                             cfg_.ffn_hidden, rng);
    }
    final_norm_ = LayerNormLayer("dec.final_norm", cfg_.width);
    output_head_ = Linear("dec.head", cfg_.width, vocab_size(), rng);
}

ParamList MotionTokenGenerator::params() {
    ParamList out;
    encoders_.collect(out);
    token_embedding_.collect(out);
    out.push_back(&position_table_);
    for (auto& layer : layers_) {
        layer.collect(out);
    }
    final_norm_.collect(out);
    output_head_.collect(out);
    return out;
}

Mat MotionTokenGenerator::build_bias_mask(int n_tokens, bool audio_present, int window) {
    if (n_tokens < 1) {
        throw GeneratorError("bias mask needs at least one token position");
    }
    if (!audio_present) {
        return Mat::Ones(n_tokens, 5);
    }
    Mat mask = Mat::Zero(n_tokens, 5 + n_tokens);
    for (int i = 0; i < n_tokens; ++i) {
        for (int c = 0; c < 5; ++c) {
            mask(i, c) = 1.0;  // text slots always visible
        }
        for (int j = 0; j < n_tokens; ++j) {
            const bool visible = window < 0 || j <= i + window;
            mask(i, 5 + j) = visible ? 1.0 : 0.0;
        }
    }
    return mask;
}

ConditioningBundle MotionTokenGenerator::encode_conditions(
    const data::AnnotationBundle& annotation, const data::AudioClip* audio) const {
    GraphCtx ctx(false);
    std::optional<Mat> mel;
    if (audio != nullptr) {
        mel = log_mel_frames(*audio, encoders_.mel_config);
    }
    const ConditioningTensors tensors =
        encoders_.encode(ctx, annotation, mel ? &*mel : nullptr);
    ConditioningBundle bundle;
    bundle.full_text = tensors.full_text.value();
    bundle.hier_text = tensors.hier_text.value();
    if (tensors.has_audio()) {
        bundle.audio = tensors.audio.value();
    }
    return bundle;
}

ConditioningTensors MotionTokenGenerator::encode_conditions_graph(
    GraphCtx& ctx, const data::AnnotationBundle& annotation, const Mat* mel) const {
    return encoders_.encode(ctx, annotation, mel);
}

ConditioningTensors MotionTokenGenerator::bundle_tensors(const ConditioningBundle& bundle) const {
    ConditioningTensors tensors;
    tensors.full_text = Tensor::constant(bundle.full_text);
    tensors.hier_text = Tensor::constant(bundle.hier_text);
    if (bundle.has_audio()) {
        tensors.audio = Tensor::constant(bundle.audio);
    }
    return tensors;
}

Tensor MotionTokenGenerator::decode_stream(GraphCtx& ctx, const TokenSequence& tokens,
                                           const ConditioningTensors& cond) const {
    const int n = static_cast<int>(tokens.size());
    if (n > cfg_.max_tokens) {
        throw GeneratorError("token sequence exceeds the maximum length");
    }
    for (const int t : tokens) {
        if (t < 0 || t >= vocab_size()) {
            throw GeneratorError("token id outside vocabulary: " + std::to_string(t));
        }
    }

    auto stream_feature = [&](FeatureStream which) -> Tensor {
        switch (which) {
            case FeatureStream::full_text: return cond.full_text;
            case FeatureStream::hier_text: return cond.hier_text;
            case FeatureStream::audio: return cond.audio;
        }
        throw ValidationError("unknown feature stream");
    };

    // self-attention prefix rows
    std::vector<Tensor> prefix_parts;
    for (const FeatureStream which : cfg_.fusion.self_inputs) {
        if (which == FeatureStream::audio && !cond.has_audio()) continue;
        prefix_parts.push_back(stream_feature(which));
    }
    Eigen::Index prefix_len = 0;
    for (const auto& part : prefix_parts) prefix_len += part.rows();

    // token rows: BOS then ground-truth tokens
    std::vector<int> stream_ids;
    stream_ids.reserve(static_cast<size_t>(n) + 1);
    stream_ids.push_back(bos_id());
    stream_ids.insert(stream_ids.end(), tokens.begin(), tokens.end());
    Tensor token_rows = token_embedding_.forward(ctx, stream_ids);

    std::vector<Tensor> stream_parts = prefix_parts;
    stream_parts.push_back(token_rows);
    Tensor stream = concat_rows(stream_parts);
    const Eigen::Index stream_len = stream.rows();
    if (stream_len > position_table_.value.rows()) {
        throw GeneratorError("stream exceeds the position table");
    }
    Tensor positions = slice_rows(ctx.use(const_cast<Param&>(position_table_)), 0, stream_len);
    stream = add(stream, positions);

    // cross-attention memory and its bias mask
    Tensor memory;
    Mat cross_mask;
    {
        std::vector<Tensor> memory_parts;
        std::vector<bool> is_audio_block;
        for (const FeatureStream which : cfg_.fusion.cross_inputs) {
            if (which == FeatureStream::audio && !cond.has_audio()) continue;
            memory_parts.push_back(stream_feature(which));
            is_audio_block.push_back(which == FeatureStream::audio);
        }
        if (!memory_parts.empty()) {
            memory = concat_rows(memory_parts);
            cross_mask = Mat::Zero(stream_len, memory.rows());
            Eigen::Index col = 0;
            for (size_t b = 0; b < memory_parts.size(); ++b) {
                const Eigen::Index cols = memory_parts[b].rows();
                if (!is_audio_block[b]) {
                    cross_mask.middleCols(col, cols).setOnes();
                } else {
                    // audio slot j visible while generating token g iff
                    // j <= g + w; prefix rows share token 0's visibility
                    for (Eigen::Index q = 0; q < stream_len; ++q) {
                        const Eigen::Index g = std::max<Eigen::Index>(0, q - prefix_len);
                        for (Eigen::Index j = 0; j < cols; ++j) {
                            const bool visible =
                                cfg_.audio_window < 0 || j <= g + cfg_.audio_window;
                            cross_mask(q, col + j) = visible ? 1.0 : 0.0;
                        }
                    }
                }
                col += cols;
            }
        }
    }

    const Mat causal = causal_mask(stream_len);
    Tensor h = stream;
    for (const auto& layer : layers_) {
        h = layer.forward(ctx, h, causal, memory, memory.defined() ? &cross_mask : nullptr);
    }
    h = final_norm_.forward(ctx, h);
    // logits for predicting token 0..n-1 plus EOS: rows prefix_len .. prefix_len+n
    Tensor predictions = slice_rows(h, prefix_len, n + 1);
    return output_head_.forward(ctx, predictions);
}

Tensor MotionTokenGenerator::forward_teacher_forced(GraphCtx& ctx, const TokenSequence& tokens,
                                                    const ConditioningTensors& cond) const {
    for (const int t : tokens) {
        if (t < 0 || t >= cfg_.codebook_size) {
            throw GeneratorError("motion token outside the codebook: " + std::to_string(t));
        }
    }
    return decode_stream(ctx, tokens, cond);
}

Mat MotionTokenGenerator::teacher_forced_logits(const TokenSequence& tokens,
                                                const ConditioningBundle& cond) const {
    GraphCtx ctx(false);
    return forward_teacher_forced(ctx, tokens, bundle_tensors(cond)).value();
}

GenerateResult MotionTokenGenerator::generate(const codec::MotionCodec& codec,
                                              const ConditioningBundle& cond,
                                              const SamplingConfig& sampling,
                                              std::optional<uint64_t> seed,
                                              std::optional<int> target_frames) const {
    if (codec.config().codebook_size != cfg_.codebook_size) {
        throw GeneratorError("codec codebook size does not match the generator vocabulary");
    }
    const bool audio_mode = cond.has_audio();
    const int n_target = audio_mode
                             ? std::min<int>(cfg_.max_tokens, static_cast<int>(cond.audio.rows()))
                             : cfg_.max_tokens;
    Rng rng(seed.value_or(0));

    GenerateResult result;
    GraphCtx ctx(false);
    const ConditioningTensors tensors = bundle_tensors(cond);
    bool saw_eos = false;
    while (static_cast<int>(result.tokens.size()) < n_target) {
        const Mat logits = decode_stream(ctx, result.tokens, tensors).value();
        Eigen::RowVectorXd row = logits.row(logits.rows() - 1);
        // BOS and PAD are never sampled; EOS only in text-only mode after the
        // first token
        row(bos_id()) = -1e30;
        row(pad_id()) = -1e30;
        if (audio_mode || result.tokens.empty()) {
            row(eos_id()) = -1e30;
        }

        int next = 0;
        if (sampling.argmax || sampling.temperature <= 0.0) {
            row.maxCoeff(&next);
        } else {
            std::vector<int> order(static_cast<size_t>(row.size()));
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return row(a) > row(b); });
            const int k = std::min<int>(sampling.top_k, static_cast<int>(order.size()));
            Eigen::VectorXd probs(k);
            double mx = row(order[0]);
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                probs(i) = std::exp((row(order[static_cast<size_t>(i)]) - mx) /
                                    sampling.temperature);
                sum += probs(i);
            }
            double draw = rng.u01() * sum;
            next = order[static_cast<size_t>(k - 1)];
            for (int i = 0; i < k; ++i) {
                draw -= probs(i);
                if (draw <= 0.0) {
                    next = order[static_cast<size_t>(i)];
                    break;
                }
            }
        }
        if (next == eos_id()) {
            saw_eos = true;
            break;
        }
        result.tokens.push_back(next);
    }
    result.truncated = !audio_mode && !saw_eos &&
                       static_cast<int>(result.tokens.size()) >= cfg_.max_tokens;
    if (result.tokens.empty()) {
        throw GeneratorError("generation produced no tokens");
    }
    const int frames =
        target_frames.value_or(static_cast<int>(result.tokens.size()) * codec.config().downsample_rate);
    result.motion = codec.decode(result.tokens, frames);
    return result;
}

void MotionTokenGenerator::serialize(std::ostream& out) {
    const std::string config_text = cfg_.to_json().dump();
    const uint32_t len = static_cast<uint32_t>(config_text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(config_text.data(), len);
    encoders_.vocab.write(out);
    ParamList p = params();
    write_params(out, p);
}

MotionTokenGenerator MotionTokenGenerator::deserialize(std::istream& in) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || len > (1u << 20)) {
        throw IntegrityError("generator checkpoint header malformed");
    }
    std::string config_text(len, '\0');
    in.read(config_text.data(), len);
    if (!in) {
        throw IntegrityError("generator checkpoint truncated");
    }
    const GeneratorConfig cfg = GeneratorConfig::from_json(nlohmann::json::parse(config_text));
    SubwordVocab vocab = SubwordVocab::read(in);
    MotionTokenGenerator model(cfg, std::move(vocab), 0);
    ParamList p = model.params();
    read_params(in, p);
    return model;
}

}  // namespace facemotion::gen
