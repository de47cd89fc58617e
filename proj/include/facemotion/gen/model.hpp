#pragma once

#include <optional>

#include "facemotion/codec/codec.hpp"
#include "facemotion/gen/encoders.hpp"

namespace facemotion::gen {

using codec::TokenSequence;

// Conditioning features can enter the decoder through the self-attention
// stream (as prefix rows) or as cross-attention keys.
enum class FeatureStream { full_text, hier_text, audio };

std::string to_string(FeatureStream s);
FeatureStream feature_stream_from_string(const std::string& s);

struct FusionConfig {
    std::vector<FeatureStream> self_inputs{FeatureStream::full_text};
    std::vector<FeatureStream> cross_inputs{FeatureStream::hier_text, FeatureStream::audio};

    void validate() const;  // no duplicates within a stream list
    nlohmann::json to_json() const;
    static FusionConfig from_json(const nlohmann::json& j);
};

struct SamplingConfig {
    double temperature = 1.0;
    int top_k = 10;
    bool argmax = false;
};

struct GeneratorConfig {
    int layers = 2;
    int heads = 4;
    int width = 128;
    int ffn_hidden = 256;
    int codebook_size = 256;  // K; must match the frozen codec
    int max_tokens = 50;      // 200 frames / r
    int audio_window = 2;     // w; negative = unrestricted audio attention
    SamplingConfig sampling;
    FusionConfig fusion;
    CondEncoderConfig encoders;

    void validate() const;
    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

struct GenerateResult {
    data::MotionSequence motion;
    TokenSequence tokens;
    bool truncated = false;  // text-only mode ran out of budget before EOS
};

// Causal transformer decoder over motion tokens with full-text prefix
// conditioning and biased cross-attention over hierarchical text + audio.
class MotionTokenGenerator {
public:
    MotionTokenGenerator(const GeneratorConfig& cfg, SubwordVocab vocab, uint64_t seed);

    const GeneratorConfig& config() const { return cfg_; }
    const ConditionEncoders& encoders() const { return encoders_; }
    nn::ParamList params();

    int bos_id() const { return cfg_.codebook_size; }
    int eos_id() const { return cfg_.codebook_size + 1; }
    int pad_id() const { return cfg_.codebook_size + 2; }
    int vocab_size() const { return cfg_.codebook_size + 3; }

    // Spec-facing bias mask over motion-token queries: all five text slots
    // visible everywhere; audio slot j visible from token i iff j <= i + w.
    static nn::Mat build_bias_mask(int n_tokens, bool audio_present, int window);

    ConditioningBundle encode_conditions(const data::AnnotationBundle& annotation,
                                         const data::AudioClip* audio) const;
    ConditioningTensors encode_conditions_graph(nn::GraphCtx& ctx,
                                                const data::AnnotationBundle& annotation,
                                                const nn::Mat* mel) const;

    // Logits for predicting tokens[0..n-1] plus the final EOS, one row per
    // prediction step (n + 1 rows). Tokens must be codebook indices.
    nn::Tensor forward_teacher_forced(nn::GraphCtx& ctx, const TokenSequence& tokens,
                                      const ConditioningTensors& cond) const;
    nn::Mat teacher_forced_logits(const TokenSequence& tokens,
                                  const ConditioningBundle& cond) const;

    // Autoregressive sampling; audio conditioning fixes the token count to the
    // audio length, text-only mode stops at EOS (or truncates at max_tokens).
    GenerateResult generate(const codec::MotionCodec& codec, const ConditioningBundle& cond,
                            const SamplingConfig& sampling, std::optional<uint64_t> seed,
                            std::optional<int> target_frames = std::nullopt) const;

    void serialize(std::ostream& out);
    static MotionTokenGenerator deserialize(std::istream& in);

private:
    ConditioningTensors bundle_tensors(const ConditioningBundle& bundle) const;
    nn::Tensor decode_stream(nn::GraphCtx& ctx, const TokenSequence& tokens,
                             const ConditioningTensors& cond) const;

    GeneratorConfig cfg_;
    ConditionEncoders encoders_;
    nn::EmbeddingTable token_embedding_;
    nn::Param position_table_;
    std::vector<nn::TransformerDecoderLayer> layers_;
    nn::LayerNormLayer final_norm_;
    nn::Linear output_head_;
};

}  // namespace facemotion::gen
