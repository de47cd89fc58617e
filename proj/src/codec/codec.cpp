#include "facemotion/codec/codec.hpp"

#include <istream>
#include <ostream>

#include "facemotion/nn/serialize.hpp"

namespace facemotion::codec {

using namespace facemotion::nn;

void CodecConfig::validate() const {
    if (downsample_rate != 4) {
        throw CodecError("downsample rate is fixed at 4");
    }
    if (channels < 4 || code_dim < 2 || codebook_size < 2) {
        throw CodecError("codec dimensions too small");
    }
    if (alpha < 0.0 || beta < 0.0 || ema_decay <= 0.0 || ema_decay >= 1.0) {
        throw CodecError("invalid codec hyperparameters");
    }
}

nlohmann::json CodecConfig::to_json() const {
    return {
        {"downsample_rate", downsample_rate},
        {"channels", channels},
        {"code_dim", code_dim},
        {"codebook_size", codebook_size},
        {"alpha", alpha},
        {"beta", beta},
        {"ema_decay", ema_decay},
        {"dead_code_window", dead_code_window},
    };
}

CodecConfig CodecConfig::from_json(const nlohmann::json& j) {
    CodecConfig cfg;
    cfg.downsample_rate = j.value("downsample_rate", cfg.downsample_rate);
    cfg.channels = j.value("channels", cfg.channels);
    cfg.code_dim = j.value("code_dim", cfg.code_dim);
    cfg.codebook_size = j.value("codebook_size", cfg.codebook_size);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
    cfg.dead_code_window = j.value("dead_code_window", cfg.dead_code_window);
    cfg.validate();
    return cfg;
}

VqLossParts vq_loss_parts(const Mat& x, const Mat& x_hat, const Mat& z, const Mat& z_hat,
                          const CodecConfig& cfg) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols() || z.rows() != z_hat.rows() ||
        z.cols() != z_hat.cols()) {
        throw CodecError("vq_loss: shape mismatch");
    }
    VqLossParts parts;
    parts.rec = (x - x_hat).array().square().mean();
    if (x.rows() >= 2) {
        const Mat vx = x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1);
        const Mat vxh = x_hat.bottomRows(x.rows() - 1) - x_hat.topRows(x.rows() - 1);
        parts.vel = cfg.alpha * (vx - vxh).array().square().mean();
    }
    const double forward_commit = (z_hat - z).array().square().mean();
    parts.commit = forward_commit + cfg.beta * forward_commit;
    // the two commitment terms share the same value; gradients differ by the
    // stop-gradient placement, which matters only in graph mode
    parts.total = parts.rec + parts.vel + parts.commit;
    return parts;
}

MotionCodec::ResBlock::ResBlock(const std::string& name, int channels, Rng& rng)
    : conv1(name + ".conv1", channels, channels, 3, 1, 1, 1, rng),
      conv2(name + ".conv2", channels, channels, 3, 1, 1, 1, rng) {}

Tensor MotionCodec::ResBlock::forward(GraphCtx& ctx, const Tensor& x) const {
    return relu(add(x, conv2.forward(ctx, relu(conv1.forward(ctx, x)))));
}

void MotionCodec::ResBlock::collect(ParamList& out) {
    conv1.collect(out);
    conv2.collect(out);
}

MotionCodec::MotionCodec(const CodecConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int c = cfg_.channels;
    enc_in_ = Conv1d("enc.in", data::kParamDim, c, 3, 1, 1, 1, rng);
    enc_res1_ = ResBlock("enc.res1", c, rng);
    enc_down1_ = Conv1d("enc.down1", c, c, 4, 2, 1, 1, rng);
    enc_res2_ = ResBlock("enc.res2", c, rng);
    enc_down2_ = Conv1d("enc.down2", c, c, 4, 2, 1, 1, rng);
    enc_res3_ = ResBlock("enc.res3", c, rng);
    enc_out_ = Conv1d("enc.out", c, cfg_.code_dim, 3, 1, 1, 1, rng);

    dec_in_ = Conv1d("dec.in", cfg_.code_dim, c, 3, 1, 1, 1, rng);
    dec_res1_ = ResBlock("dec.res1", c, rng);
    dec_up1_ = Conv1d("dec.up1", c, c, 3, 1, 1, 1, rng);
    dec_res2_ = ResBlock("dec.res2", c, rng);
    dec_up2_ = Conv1d("dec.up2", c, c, 3, 1, 1, 1, rng);
    dec_res3_ = ResBlock("dec.res3", c, rng);
    dec_out_ = Conv1d("dec.out", c, data::kParamDim, 3, 1, 1, 1, rng);

    codebook_.embeddings = Mat(cfg_.codebook_size, cfg_.code_dim);
    for (Eigen::Index i = 0; i < codebook_.embeddings.rows(); ++i) {
        for (Eigen::Index j = 0; j < codebook_.embeddings.cols(); ++j) {
            codebook_.embeddings(i, j) = 0.1 * rng.normal();
        }
    }
    codebook_.cluster_size = Eigen::VectorXd::Zero(cfg_.codebook_size);
    codebook_.embed_sum = codebook_.embeddings;
    codebook_.usage.assign(static_cast<size_t>(cfg_.codebook_size), 0);
    codebook_.last_used_step.assign(static_cast<size_t>(cfg_.codebook_size), 0);
    norm_mean_ = Eigen::RowVectorXd::Zero(data::kParamDim);
    norm_std_ = Eigen::RowVectorXd::Ones(data::kParamDim);
}

void MotionCodec::set_normalization(const Eigen::RowVectorXd& mean,
                                    const Eigen::RowVectorXd& std) {
    if (mean.size() != data::kParamDim || std.size() != data::kParamDim ||
        (std.array() <= 0.0).any()) {
        throw CodecError("bad normalization statistics");
    }
    norm_mean_ = mean;
    norm_std_ = std;
}

Mat MotionCodec::normalize(const Mat& frames) const {
    Mat out = frames;
    out.rowwise() -= norm_mean_;
    out.array().rowwise() /= norm_std_.array();
    return out;
}

Mat MotionCodec::denormalize(const Mat& frames) const {
    Mat out = frames;
    out.array().rowwise() *= norm_std_.array();
    out.rowwise() += norm_mean_;
    return out;
}

ParamList MotionCodec::params() {
    ParamList out;
    enc_in_.collect(out);
    enc_res1_.collect(out);
    enc_down1_.collect(out);
    enc_res2_.collect(out);
    enc_down2_.collect(out);
    enc_res3_.collect(out);
    enc_out_.collect(out);
    dec_in_.collect(out);
    dec_res1_.collect(out);
    dec_up1_.collect(out);
    dec_res2_.collect(out);
    dec_up2_.collect(out);
    dec_res3_.collect(out);
    dec_out_.collect(out);
    return out;
}

Mat MotionCodec::pad_to_multiple(const Mat& frames, int r) {
    const Eigen::Index t = frames.rows();
    const Eigen::Index padded = ((t + r - 1) / r) * r;
    if (padded == t) {
        return frames;
    }
    Mat out(padded, frames.cols());
    out.topRows(t) = frames;
    for (Eigen::Index i = t; i < padded; ++i) {
        out.row(i) = frames.row(t - 1);  // edge replication
    }
    return out;
}

Tensor MotionCodec::encode_graph(GraphCtx& ctx, const Mat& frames_padded) const {
    Tensor x = Tensor::constant(frames_padded);
    Tensor h = relu(enc_in_.forward(ctx, x));
    h = enc_res1_.forward(ctx, h);
    h = relu(enc_down1_.forward(ctx, h));
    h = enc_res2_.forward(ctx, h);
    h = relu(enc_down2_.forward(ctx, h));
    h = enc_res3_.forward(ctx, h);
    return enc_out_.forward(ctx, h);
}

Tensor MotionCodec::decode_graph(GraphCtx& ctx, const Tensor& z_hat, int target_frames) const {
    Tensor h = relu(dec_in_.forward(ctx, z_hat));
    h = dec_res1_.forward(ctx, h);
    h = relu(dec_up1_.forward(ctx, upsample_rows_nearest(h, 2)));
    h = dec_res2_.forward(ctx, h);
    h = relu(dec_up2_.forward(ctx, upsample_rows_nearest(h, 2)));
    h = dec_res3_.forward(ctx, h);
    Tensor out = dec_out_.forward(ctx, h);
    if (out.rows() < target_frames) {
        throw CodecError("decode produced fewer frames than requested");
    }
    return slice_rows(out, 0, target_frames);
}

Mat MotionCodec::encode(const data::MotionSequence& seq) const {
    if (seq.length() < cfg_.downsample_rate) {
        throw CodecError("sequence shorter than the downsampling rate");
    }
    if (seq.frames.cols() != data::kParamDim) {
        throw CodecError("sequence must have 56 parameter columns");
    }
    const Mat padded =
        pad_to_multiple(normalize(seq.frames.cast<double>()), cfg_.downsample_rate);
    GraphCtx ctx(false);
    return encode_graph(ctx, padded).value();
}

std::pair<Mat, TokenSequence> MotionCodec::quantize(const Mat& z) const {
    if (z.cols() != cfg_.code_dim) {
        throw CodecError("latent dimension mismatch");
    }
    const Mat& book = codebook_.embeddings;
    Mat z_hat(z.rows(), z.cols());
    TokenSequence tokens(static_cast<size_t>(z.rows()));
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
        int best = 0;
        double best_dist = (z.row(j) - book.row(0)).squaredNorm();
        for (Eigen::Index k = 1; k < book.rows(); ++k) {
            const double dist = (z.row(j) - book.row(k)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(k);
            }
        }
        tokens[static_cast<size_t>(j)] = best;
        z_hat.row(j) = book.row(best);
    }
    return {std::move(z_hat), std::move(tokens)};
}

data::MotionSequence MotionCodec::decode(const TokenSequence& tokens, int target_frames) const {
    if (tokens.empty()) {
        throw CodecError("cannot decode an empty token sequence");
    }
    Mat z_hat(static_cast<Eigen::Index>(tokens.size()), cfg_.code_dim);
    for (size_t j = 0; j < tokens.size(); ++j) {
        if (tokens[j] < 0 || tokens[j] >= cfg_.codebook_size) {
            throw CodecError("token index out of codebook range: " + std::to_string(tokens[j]));
        }
        z_hat.row(static_cast<Eigen::Index>(j)) = codebook_.embeddings.row(tokens[j]);
    }
    return decode_latent(z_hat, target_frames);
}

data::MotionSequence MotionCodec::decode_latent(const Mat& z_hat, int target_frames) const {
    const int max_frames = static_cast<int>(z_hat.rows()) * cfg_.downsample_rate;
    if (target_frames < 1 || target_frames > max_frames) {
        throw CodecError("target frame count must lie in [1, r * tokens]");
    }
    GraphCtx ctx(false);
    Tensor out = decode_graph(ctx, Tensor::constant(z_hat), target_frames);
    data::MotionSequence seq;
    seq.frames = denormalize(out.value()).cast<float>();
    return seq;
}

data::MotionSequence MotionCodec::reconstruct(const data::MotionSequence& seq) const {
    const Mat z = encode(seq);
    const auto [z_hat, tokens] = quantize(z);
    return decode_latent(z_hat, static_cast<int>(seq.length()));
}

void MotionCodec::serialize(std::ostream& out) {
    const std::string config_text = cfg_.to_json().dump();
    const uint32_t len = static_cast<uint32_t>(config_text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(config_text.data(), len);
    ParamList p = params();
    write_params(out, p);
    // codebook state
    Param embeddings{"codebook.embeddings", codebook_.embeddings, {}, {}, {}};
    Param sums{"codebook.embed_sum", codebook_.embed_sum, {}, {}, {}};
    Param sizes{"codebook.cluster_size", codebook_.cluster_size, {}, {}, {}};
    Param nmean{"norm.mean", norm_mean_, {}, {}, {}};
    Param nstd{"norm.std", norm_std_, {}, {}, {}};
    ParamList book{&embeddings, &sums, &sizes, &nmean, &nstd};
    write_params(out, book);
}

MotionCodec MotionCodec::deserialize(std::istream& in) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || len > (1u << 20)) {
        throw IntegrityError("codec checkpoint header malformed");
    }
    std::string config_text(len, '\0');
    in.read(config_text.data(), len);
    if (!in) {
        throw IntegrityError("codec checkpoint truncated");
    }
    const CodecConfig cfg = CodecConfig::from_json(nlohmann::json::parse(config_text));
    MotionCodec codec(cfg, 0);
    ParamList p = codec.params();
    read_params(in, p);
    Param embeddings{"codebook.embeddings", codec.codebook_.embeddings, {}, {}, {}};
    Param sums{"codebook.embed_sum", codec.codebook_.embed_sum, {}, {}, {}};
    Param sizes{"codebook.cluster_size", codec.codebook_.cluster_size, {}, {}, {}};
    Param nmean{"norm.mean", codec.norm_mean_, {}, {}, {}};
    Param nstd{"norm.std", codec.norm_std_, {}, {}, {}};
    ParamList book{&embeddings, &sums, &sizes, &nmean, &nstd};
    read_params(in, book);
    codec.codebook_.embeddings = embeddings.value;
    codec.codebook_.embed_sum = sums.value;
    codec.codebook_.cluster_size = sizes.value;
    codec.norm_mean_ = nmean.value;
    codec.norm_std_ = nstd.value;
    return codec;
}

}  // namespace facemotion::codec
