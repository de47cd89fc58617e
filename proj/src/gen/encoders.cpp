#include "facemotion/gen/encoders.hpp"

namespace facemotion::gen {

using namespace facemotion::nn;

TextEncoder::TextEncoder(const std::string& name, int vocab, const CondEncoderConfig& cfg,
                         Rng& rng)
    : embedding(name + ".emb", vocab, cfg.width, rng),
      out_norm(name + ".out_norm", cfg.width),
      width(cfg.width) {
    for (int i = 0; i < cfg.text_layers; ++i) {
        layers.emplace_back(name + ".layer" + std::to_string(i), cfg.width, cfg.heads,
                            cfg.ffn_hidden, rng);
    }
}

Tensor TextEncoder::forward(GraphCtx& ctx, const std::vector<int>& ids) const {
    Tensor h = embedding.forward(ctx, ids);
    h = add(h, Tensor::constant(sinusoidal_positions(h.rows(), width)));
    for (const auto& layer : layers) {
        h = layer.forward(ctx, h);
    }
    return mean_rows(out_norm.forward(ctx, h));
}

void TextEncoder::collect(ParamList& out) {
    embedding.collect(out);
    for (auto& layer : layers) {
        layer.collect(out);
    }
    out_norm.collect(out);
}

AudioEncoder::AudioEncoder(const std::string& name, const CondEncoderConfig& cfg, Rng& rng)
    : input_proj(name + ".in", 80, cfg.width, rng),
      local_conv(name + ".conv", cfg.width, cfg.width, 3, 1, 1, 1, rng),
      out_norm(name + ".out_norm", cfg.width),
      width(cfg.width),
      pool(cfg.audio_pool) {
    for (int i = 0; i < cfg.audio_layers; ++i) {
        layers.emplace_back(name + ".layer" + std::to_string(i), cfg.width, cfg.heads,
                            cfg.ffn_hidden, rng);
    }
}

Tensor AudioEncoder::forward(GraphCtx& ctx, const Mat& mel) const {
    if (mel.cols() != 80) {
        throw GeneratorError("audio encoder expects 80 mel bands");
    }
    Tensor h = input_proj.forward(ctx, Tensor::constant(mel));
    h = pool_rows_mean(relu(h), pool);  // to token rate
    h = relu(local_conv.forward(ctx, h));
    h = add(h, Tensor::constant(sinusoidal_positions(h.rows(), width)));
    for (const auto& layer : layers) {
        h = layer.forward(ctx, h);
    }
    return out_norm.forward(ctx, h);
}

void AudioEncoder::collect(ParamList& out) {
    input_proj.collect(out);
    local_conv.collect(out);
    for (auto& layer : layers) {
        layer.collect(out);
    }
    out_norm.collect(out);
}

ConditionEncoders::ConditionEncoders(SubwordVocab vocab_in, const CondEncoderConfig& cfg,
                                     uint64_t seed)
    : vocab(std::move(vocab_in)) {
    Rng rng(seed);
    full_text_encoder = TextEncoder("cond.full", vocab.size(), cfg, rng);
    static const char* kFieldNames[5] = {"action", "emotion", "expression", "headpose",
                                         "scenarios"};
    for (int i = 0; i < 5; ++i) {
        hier_encoders[static_cast<size_t>(i)] =
            TextEncoder(std::string("cond.hier_") + kFieldNames[i], vocab.size(), cfg, rng);
    }
    audio_encoder = AudioEncoder("cond.audio", cfg, rng);
}

ConditioningTensors ConditionEncoders::encode(GraphCtx& ctx,
                                              const data::AnnotationBundle& annotation,
                                              const Mat* mel) const {
    if (annotation.abstract_action.empty() || annotation.abstract_emotion.empty() ||
        annotation.expression_detail.empty() || annotation.headpose_detail.empty() ||
        annotation.scenarios[0].empty() || annotation.scenarios[1].empty() ||
        annotation.scenarios[2].empty()) {
        throw GeneratorError("annotation bundle has an empty field");
    }
    ConditioningTensors out;
    out.full_text = full_text_encoder.forward(ctx, vocab.encode(annotation.full_text()));

    const std::string scenarios_joined =
        annotation.scenarios[0] + " " + annotation.scenarios[1] + " " + annotation.scenarios[2];
    const std::array<const std::string*, 5> fields = {
        &annotation.abstract_action, &annotation.abstract_emotion, &annotation.expression_detail,
        &annotation.headpose_detail, &scenarios_joined};
    std::vector<Tensor> rows;
    rows.reserve(5);
    for (size_t i = 0; i < 5; ++i) {
        rows.push_back(hier_encoders[i].forward(ctx, vocab.encode(*fields[i])));
    }
    out.hier_text = concat_rows(rows);
    if (mel != nullptr) {
        out.audio = audio_encoder.forward(ctx, *mel);
    }
    return out;
}

void ConditionEncoders::collect(ParamList& out) {
    full_text_encoder.collect(out);
    for (auto& enc : hier_encoders) {
        enc.collect(out);
    }
    audio_encoder.collect(out);
}

Mat align_rows(const Mat& features, Eigen::Index n) {
    if (features.rows() == n) {
        return features;
    }
    Mat out(n, features.cols());
    const Eigen::Index keep = std::min(features.rows(), n);
    out.topRows(keep) = features.topRows(keep);
    for (Eigen::Index i = keep; i < n; ++i) {
        out.row(i) = features.row(features.rows() - 1);
    }
    return out;
}

}  // namespace facemotion::gen
