#pragma once

#include <optional>

#include "facemotion/data/manifest.hpp"
#include "facemotion/eval/metrics.hpp"
#include "facemotion/gen/encoders.hpp"

namespace facemotion::eval {

enum class RetrievalMode { text, audio };

std::string to_string(RetrievalMode mode);
RetrievalMode retrieval_mode_from_string(const std::string& s);

struct RetrievalConfig {
    RetrievalMode mode = RetrievalMode::text;
    int width = 64;
    int heads = 4;
    int ffn_hidden = 128;
    int layers = 2;
    int embed_dim = 64;    // D_e
    double temperature = 0.07;  // InfoNCE
    int pool = 4;          // temporal pooling of motion frames
    // The motion tower sees masked face-region vertices; head poses are
    // included in text mode and dropped in audio mode.

    void validate() const;
    nlohmann::json to_json() const;
    static RetrievalConfig from_json(const nlohmann::json& j);
};

// Contrastive dual encoder: motion tower over face-region vertex sequences
// (+ neck poses in text mode), paired with a text or audio tower. Embeddings
// are unit-norm in R^{D_e}.
class RetrievalModel {
public:
    RetrievalModel(const RetrievalConfig& cfg, gen::SubwordVocab vocab, uint64_t seed);

    const RetrievalConfig& config() const { return cfg_; }
    nn::ParamList params();

    nn::Tensor motion_tower(nn::GraphCtx& ctx, const nn::Mat& face_features) const;
    nn::Tensor text_tower(nn::GraphCtx& ctx, const std::string& text) const;
    nn::Tensor audio_tower(nn::GraphCtx& ctx, const nn::Mat& mel) const;

    Eigen::RowVectorXd embed_motion(const data::MotionSequence& seq, const VertexModel& vm) const;
    Eigen::RowVectorXd embed_text(const std::string& text) const;
    Eigen::RowVectorXd embed_audio(const data::AudioClip& clip) const;

    void serialize(std::ostream& out);
    static RetrievalModel deserialize(std::istream& in);

private:
    RetrievalConfig cfg_;
    gen::SubwordVocab vocab_;
    nn::Linear motion_in_;
    std::vector<nn::TransformerEncoderLayer> motion_layers_;
    nn::LayerNormLayer motion_norm_;
    nn::Linear motion_proj_;
    gen::TextEncoder text_encoder_;
    nn::Linear text_proj_;
    gen::AudioEncoder audio_encoder_;
    nn::Linear audio_proj_;
};

struct RetrievalExample {
    std::string id;
    nn::Mat face_features;  // motion tower input
    std::string text;       // text mode
    nn::Mat mel;            // audio mode
};

std::vector<RetrievalExample> prepare_retrieval_examples(const data::CorpusManifest& manifest,
                                                         data::Split split, RetrievalMode mode,
                                                         const VertexModel& vm, int workers = 0);

struct RetrievalTrainConfig {
    int steps = 400;
    int batch_size = 32;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    int val_every = 100;
    int workers = 0;
    uint64_t seed = 7;
    int val_batches = 20;

    nlohmann::json to_json() const;
};

struct RetrievalTrainResult {
    std::vector<double> loss_curve;
    RPrecision val_r_precision;  // on the validation pairs
};

// Symmetric InfoNCE over batches of pairs. Throws EvalError when the split
// holds fewer pairs than one batch.
RetrievalTrainResult train_retrieval(RetrievalModel& model,
                                     const std::vector<RetrievalExample>& train,
                                     const std::vector<RetrievalExample>& val,
                                     const RetrievalTrainConfig& cfg);

// Embeds both towers over a list of examples (rows aligned with the input).
std::pair<nn::Mat, nn::Mat> embed_pairs(const RetrievalModel& model,
                                        const std::vector<RetrievalExample>& examples,
                                        int workers = 0);

}  // namespace facemotion::eval
