#pragma once

#include <nlohmann/json.hpp>

#include "facemotion/data/motion.hpp"
#include "facemotion/nn/layers.hpp"

namespace facemotion::codec {

using nn::Mat;

// Codebook indices at one token per r frames.
using TokenSequence = std::vector<int>;

struct CodecConfig {
    int downsample_rate = 4;  // r; tokens cover r frames each
    int channels = 128;       // residual 1D-conv width
    int code_dim = 128;       // D
    int codebook_size = 256;  // K
    double alpha = 1.0;       // velocity term weight in the reconstruction loss
    double beta = 0.25;       // commitment weight
    double ema_decay = 0.99;
    int dead_code_window = 100;  // steps a code may stay unused before reset

    void validate() const;
    nlohmann::json to_json() const;
    static CodecConfig from_json(const nlohmann::json& j);
};

struct VqLossParts {
    double rec = 0.0;     // MSE(x, x_hat)
    double vel = 0.0;     // alpha * MSE(V(x), V(x_hat))
    double commit = 0.0;  // ||sg(z_hat) - z||^2 + beta ||sg(z) - z_hat||^2, mean-squared form
    double total = 0.0;
};

// Straight-line evaluation of the training loss on plain matrices; used for
// reporting and as the contract the graph-built loss must match.
VqLossParts vq_loss_parts(const Mat& x, const Mat& x_hat, const Mat& z, const Mat& z_hat,
                          const CodecConfig& cfg);

struct Codebook {
    Mat embeddings;               // K x D
    Eigen::VectorXd cluster_size; // EMA assignment counts
    Mat embed_sum;                // EMA sum of assigned latents
    std::vector<int64_t> usage;   // total assignments per code
    std::vector<int64_t> last_used_step;
};

// Residual 1D-conv encoder/decoder around a vector-quantization bottleneck.
class MotionCodec {
public:
    MotionCodec(const CodecConfig& cfg, uint64_t seed);

    const CodecConfig& config() const { return cfg_; }
    Codebook& codebook() { return codebook_; }
    const Codebook& codebook() const { return codebook_; }
    nn::ParamList params();

    // Per-channel standardization applied before the encoder and inverted
    // after the decoder; the trainer fits it on the training split and it
    // travels with the checkpoint.
    void set_normalization(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& std);
    Mat normalize(const Mat& frames) const;
    Mat denormalize(const Mat& frames) const;

    // Latent sequence of exactly ceil(T / r) rows; input is right-padded by
    // edge replication to a multiple of r. Throws CodecError for T < r.
    Mat encode(const data::MotionSequence& seq) const;

    // Nearest codebook row per latent (ties -> smallest index).
    std::pair<Mat, TokenSequence> quantize(const Mat& z) const;

    // Decodes tokens and crops the upsampled output to target_frames.
    data::MotionSequence decode(const TokenSequence& tokens, int target_frames) const;
    data::MotionSequence decode_latent(const Mat& z_hat, int target_frames) const;

    data::MotionSequence reconstruct(const data::MotionSequence& seq) const;

    // Training-mode forward pieces (graph tensors).
    nn::Tensor encode_graph(nn::GraphCtx& ctx, const Mat& frames_padded) const;
    nn::Tensor decode_graph(nn::GraphCtx& ctx, const nn::Tensor& z_hat, int target_frames) const;

    void serialize(std::ostream& out);
    // Restores weights and codebook; the stream's config must equal cfg.
    static MotionCodec deserialize(std::istream& in);

    static Mat pad_to_multiple(const Mat& frames, int r);

private:
    struct ResBlock {
        nn::Conv1d conv1, conv2;
        ResBlock() = default;
        ResBlock(const std::string& name, int channels, Rng& rng);
        nn::Tensor forward(nn::GraphCtx& ctx, const nn::Tensor& x) const;
        void collect(nn::ParamList& out);
    };

    CodecConfig cfg_;
    // encoder
    nn::Conv1d enc_in_;
    ResBlock enc_res1_;
    nn::Conv1d enc_down1_;
    ResBlock enc_res2_;
    nn::Conv1d enc_down2_;
    ResBlock enc_res3_;
    nn::Conv1d enc_out_;
    // decoder
    nn::Conv1d dec_in_;
    ResBlock dec_res1_;
    nn::Conv1d dec_up1_;
    ResBlock dec_res2_;
    nn::Conv1d dec_up2_;
    ResBlock dec_res3_;
    nn::Conv1d dec_out_;

    Codebook codebook_;
    Eigen::RowVectorXd norm_mean_;
    Eigen::RowVectorXd norm_std_;
};

}  // namespace facemotion::codec
