#include "facemotion/codec/train.hpp"

#include <cmath>

#include "facemotion/nn/optim.hpp"
#include "facemotion/parallel.hpp"

namespace facemotion::codec {

using namespace facemotion::nn;

nlohmann::json CodecTrainConfig::to_json() const {
    return {
        {"steps", steps},           {"batch_size", batch_size},
        {"window", window},         {"lr", lr},
        {"adam_beta1", adam_beta1}, {"adam_beta2", adam_beta2},
        {"val_every", val_every},   {"seed", seed},
    };
}

std::vector<data::MotionSequence> load_split_motions(const data::CorpusManifest& manifest,
                                                     data::Split split) {
    std::vector<data::MotionSequence> out;
    for (const auto* entry : manifest.split_entries(split)) {
        out.push_back(data::read_container(manifest.root / entry->motion_path));
    }
    return out;
}

double signal_variance(const std::vector<data::MotionSequence>& seqs) {
    if (seqs.empty()) {
        throw TrainingError("variance of an empty split");
    }
    double count = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(data::kParamDim);
    for (const auto& seq : seqs) {
        mean += seq.frames.cast<double>().colwise().sum().transpose();
        count += static_cast<double>(seq.length());
    }
    mean /= count;
    double acc = 0.0;
    for (const auto& seq : seqs) {
        const Eigen::MatrixXd centered =
            seq.frames.cast<double>().rowwise() - mean.transpose();
        acc += centered.array().square().sum();
    }
    return acc / (count * data::kParamDim);
}

double reconstruction_mse(const MotionCodec& codec, const std::vector<data::MotionSequence>& seqs,
                          int workers) {
    if (seqs.empty()) {
        throw TrainingError("reconstruction MSE of an empty split");
    }
    std::vector<double> sq_err(seqs.size(), 0.0);
    std::vector<double> counts(seqs.size(), 0.0);
    parallel_for(seqs.size(), workers, [&](size_t i) {
        const data::MotionSequence rec = codec.reconstruct(seqs[i]);
        sq_err[i] =
            (rec.frames.cast<double>() - seqs[i].frames.cast<double>()).array().square().sum();
        counts[i] = static_cast<double>(seqs[i].frames.size());
    });
    double total = 0.0, count = 0.0;
    for (size_t i = 0; i < seqs.size(); ++i) {
        total += sq_err[i];
        count += counts[i];
    }
    return total / count;
}

namespace {

struct ItemResult {
    GraphCtx ctx{true};
    double loss = 0.0;
    TokenSequence tokens;
    Mat z_value;
};

Mat crop_window(const data::MotionSequence& seq, int window, Rng& rng) {
    const int t = static_cast<int>(seq.length());
    if (t <= window) {
        return seq.frames.cast<double>();
    }
    const int start = static_cast<int>(rng.below(static_cast<uint64_t>(t - window + 1)));
    return seq.frames.middleRows(start, window).cast<double>();
}

// Per-channel standardization statistics over the training split.
std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> channel_stats(
    const std::vector<data::MotionSequence>& seqs) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(data::kParamDim);
    double count = 0.0;
    for (const auto& seq : seqs) {
        mean += seq.frames.cast<double>().colwise().sum();
        count += static_cast<double>(seq.length());
    }
    mean /= count;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(data::kParamDim);
    for (const auto& seq : seqs) {
        var += (seq.frames.cast<double>().rowwise() - mean).array().square().colwise().sum().matrix();
    }
    var /= count;
    Eigen::RowVectorXd std = var.array().sqrt().max(1e-3).matrix();
    return {mean, std};
}

}  // namespace

CodecTrainResult train_codec(MotionCodec& codec, const std::vector<data::MotionSequence>& train,
                             const std::vector<data::MotionSequence>& val,
                             const CodecTrainConfig& cfg) {
    if (train.size() < 20) {
        throw TrainingError("codec training needs at least 20 sequences");
    }
    const CodecConfig& model_cfg = codec.config();
    ParamList params = codec.params();
    Adam optimizer({.lr = cfg.lr, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2, .eps = 1e-8});
    Rng rng(cfg.seed);
    Codebook& book = codec.codebook();
    const int k_codes = model_cfg.codebook_size;

    CodecTrainResult result;
    result.loss_curve.reserve(static_cast<size_t>(cfg.steps));

    // fit the normalization on the training split, then seed the codebook
    // from real encoder latents so EMA updates start in-distribution
    {
        const auto [mean, std] = channel_stats(train);
        codec.set_normalization(mean, std);
        std::vector<Mat> latents;
        Eigen::Index latent_rows = 0;
        while (latent_rows < 4 * k_codes) {
            const size_t idx = static_cast<size_t>(rng.below(train.size()));
            GraphCtx probe_ctx(false);
            Mat window = codec.normalize(crop_window(train[idx], cfg.window, rng));
            Mat z = codec.encode_graph(probe_ctx, MotionCodec::pad_to_multiple(window, 4)).value();
            latent_rows += z.rows();
            latents.push_back(std::move(z));
        }
        Mat all(latent_rows, model_cfg.code_dim);
        Eigen::Index at = 0;
        for (const auto& z : latents) {
            all.middleRows(at, z.rows()) = z;
            at += z.rows();
        }
        for (int k = 0; k < k_codes; ++k) {
            const Eigen::Index row =
                static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(all.rows())));
            book.embeddings.row(k) = all.row(row);
            book.embed_sum.row(k) = all.row(row);
            book.cluster_size(k) = 1.0;
        }
    }

    // snapshot for NaN recovery
    auto snapshot = [&]() {
        std::vector<Mat> values;
        values.reserve(params.size() + 2);
        for (const Param* p : params) values.push_back(p->value);
        values.push_back(book.embeddings);
        values.push_back(book.embed_sum);
        return values;
    };
    auto restore = [&](const std::vector<Mat>& values) {
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
        book.embeddings = values[params.size()];
        book.embed_sum = values[params.size() + 1];
    };
    std::vector<Mat> last_good = snapshot();

    for (int step = 1; step <= cfg.steps; ++step) {
        // sample the batch on the trainer thread to keep the stream deterministic
        std::vector<Mat> windows;
        windows.reserve(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t idx = static_cast<size_t>(rng.below(train.size()));
            windows.push_back(MotionCodec::pad_to_multiple(
                codec.normalize(crop_window(train[idx], cfg.window, rng)), 4));
        }

        std::vector<ItemResult> items(windows.size());
        parallel_for(windows.size(), cfg.workers, [&](size_t i) {
            ItemResult& item = items[i];
            const Mat& x = windows[i];
            Tensor z = codec.encode_graph(item.ctx, x);
            auto [z_hat, tokens] = codec.quantize(z.value());
            item.tokens = std::move(tokens);
            item.z_value = z.value();
            Tensor decoded =
                codec.decode_graph(item.ctx, straight_through(z, z_hat), static_cast<int>(x.rows()));
            Tensor x_const = Tensor::constant(x);
            Tensor rec = mse(decoded, x_const);
            Tensor vel = mse(sub(slice_rows(decoded, 1, x.rows() - 1),
                                 slice_rows(decoded, 0, x.rows() - 1)),
                             sub(slice_rows(x_const, 1, x.rows() - 1),
                                 slice_rows(x_const, 0, x.rows() - 1)));
            Tensor commit_forward = mse(Tensor::constant(z_hat), z);
            Tensor loss = add(add(rec, scale(vel, model_cfg.alpha)), commit_forward);
            loss.backward();
            // reported loss includes the beta-weighted codebook term, which
            // carries no encoder gradient under EMA updates
            item.loss = loss.scalar() + model_cfg.beta * commit_forward.scalar();
        });

        double batch_loss = 0.0;
        for (auto& item : items) {
            item.ctx.accumulate_grads();
            batch_loss += item.loss;
        }
        batch_loss /= static_cast<double>(items.size());
        result.loss_curve.push_back(batch_loss);

        if (!std::isfinite(batch_loss)) {
            restore(last_good);
            throw TrainingError("codec training diverged at step " + std::to_string(step));
        }

        // scale batch-accumulated gradients to the batch mean
        for (Param* p : params) {
            p->grad /= static_cast<double>(items.size());
        }
        optimizer.step(params);
        optimizer.zero_grad(params);

        // EMA codebook update from this batch's assignments
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k_codes);
        Mat sums = Mat::Zero(k_codes, model_cfg.code_dim);
        for (const auto& item : items) {
            for (size_t j = 0; j < item.tokens.size(); ++j) {
                const int code = item.tokens[j];
                counts(code) += 1.0;
                sums.row(code) += item.z_value.row(static_cast<Eigen::Index>(j));
                book.usage[static_cast<size_t>(code)]++;
                book.last_used_step[static_cast<size_t>(code)] = step;
            }
        }
        const double decay = model_cfg.ema_decay;
        book.cluster_size = decay * book.cluster_size + (1.0 - decay) * counts;
        book.embed_sum = decay * book.embed_sum + (1.0 - decay) * sums;
        const double total = book.cluster_size.sum();
        constexpr double kEps = 1e-5;
        for (int k = 0; k < k_codes; ++k) {
            const double smoothed =
                (book.cluster_size(k) + kEps) / (total + k_codes * kEps) * total;
            book.embeddings.row(k) = book.embed_sum.row(k) / smoothed;
        }

        // dead-code reset: unused codes grab a random latent from this batch
        for (int k = 0; k < k_codes; ++k) {
            if (step - book.last_used_step[static_cast<size_t>(k)] >=
                model_cfg.dead_code_window) {
                const ItemResult& item = items[rng.below(items.size())];
                const Eigen::Index row =
                    static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(item.z_value.rows())));
                book.embeddings.row(k) = item.z_value.row(row);
                book.embed_sum.row(k) = item.z_value.row(row);
                book.cluster_size(k) = 1.0;
                book.last_used_step[static_cast<size_t>(k)] = step;
                result.dead_code_resets++;
            }
        }

        if (step % cfg.val_every == 0 || step == cfg.steps) {
            if (!val.empty()) {
                const double val_mse = reconstruction_mse(codec, val, cfg.workers);
                result.val_mse_curve.push_back(val_mse);
                if (!std::isfinite(val_mse)) {
                    restore(last_good);
                    throw TrainingError("validation diverged at step " + std::to_string(step));
                }
            }
            last_good = snapshot();
        }
    }

    if (!val.empty()) {
        result.final_val_mse = reconstruction_mse(codec, val, cfg.workers);
        result.val_variance = signal_variance(val);
    }
    return result;
}

}  // namespace facemotion::codec
