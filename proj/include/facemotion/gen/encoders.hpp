#pragma once

#include "facemotion/data/annotation.hpp"
#include "facemotion/data/audio.hpp"
#include "facemotion/gen/mel.hpp"
#include "facemotion/gen/text_tokenizer.hpp"
#include "facemotion/nn/layers.hpp"

namespace facemotion::gen {

struct CondEncoderConfig {
    int width = 128;  // D_c, equals the decoder width
    int heads = 4;
    int ffn_hidden = 256;
    int text_layers = 1;
    int audio_layers = 2;
    int audio_pool = 4;  // mel frames per motion token (the codec's r)
};

// Inference-time conditioning features.
struct ConditioningBundle {
    nn::Mat full_text;  // 1 x D_c
    nn::Mat hier_text;  // 5 x D_c
    nn::Mat audio;      // T_a x D_c; empty when audio is absent

    bool has_audio() const { return audio.rows() > 0; }
};

// Graph-mode counterpart used while training the encoders jointly.
struct ConditioningTensors {
    nn::Tensor full_text;
    nn::Tensor hier_text;
    nn::Tensor audio;  // undefined tensor when absent

    bool has_audio() const { return audio.defined(); }
};

// Small trainable transformer over subword ids, mean-pooled to one vector.
struct TextEncoder {
    nn::EmbeddingTable embedding;
    std::vector<nn::TransformerEncoderLayer> layers;
    nn::LayerNormLayer out_norm;
    int width = 0;

    TextEncoder() = default;
    TextEncoder(const std::string& name, int vocab, const CondEncoderConfig& cfg, Rng& rng);
    nn::Tensor forward(nn::GraphCtx& ctx, const std::vector<int>& ids) const;
    void collect(nn::ParamList& out);
};

// Log-mel frontend, temporal pooling to token rate, then a small transformer.
struct AudioEncoder {
    nn::Linear input_proj;
    nn::Conv1d local_conv;
    std::vector<nn::TransformerEncoderLayer> layers;
    nn::LayerNormLayer out_norm;
    int width = 0;
    int pool = 4;

    AudioEncoder() = default;
    AudioEncoder(const std::string& name, const CondEncoderConfig& cfg, Rng& rng);
    // mel: frames x 80 -> ceil(frames / pool) x width
    nn::Tensor forward(nn::GraphCtx& ctx, const nn::Mat& mel) const;
    void collect(nn::ParamList& out);
};

// The five hierarchical encoders plus the full-text and audio encoders.
struct ConditionEncoders {
    SubwordVocab vocab;
    TextEncoder full_text_encoder;
    std::array<TextEncoder, 5> hier_encoders;
    AudioEncoder audio_encoder;
    MelConfig mel_config;

    ConditionEncoders() = default;
    ConditionEncoders(SubwordVocab vocab, const CondEncoderConfig& cfg, uint64_t seed);

    // Throws GeneratorError on an empty annotation field.
    ConditioningTensors encode(nn::GraphCtx& ctx, const data::AnnotationBundle& annotation,
                               const nn::Mat* mel) const;
    void collect(nn::ParamList& out);
};

// Crop or edge-replicate rows so the feature sequence has exactly n rows.
nn::Mat align_rows(const nn::Mat& features, Eigen::Index n);

}  // namespace facemotion::gen
