#pragma once

#include "facemotion/codec/codec.hpp"
#include "facemotion/data/manifest.hpp"

namespace facemotion::codec {

struct CodecTrainConfig {
    int steps = 2000;
    int batch_size = 8;
    int window = 64;  // training crop length in frames
    double lr = 1e-3;
    double adam_beta1 = 0.5;  // Adam moments used for both training stages
    double adam_beta2 = 0.999;
    int val_every = 200;
    int workers = 0;  // 0 = hardware concurrency
    uint64_t seed = 7;

    nlohmann::json to_json() const;
};

struct CodecTrainResult {
    std::vector<double> loss_curve;  // batch-mean total loss per step
    std::vector<double> val_mse_curve;
    double final_val_mse = 0.0;
    double val_variance = 0.0;  // per-element variance of the validation frames
    int dead_code_resets = 0;
};

// Deterministic given (model seed, cfg.seed). EMA codebook updates with
// dead-code resets; throws TrainingError on NaN loss after restoring the last
// validated parameter snapshot.
CodecTrainResult train_codec(MotionCodec& codec, const std::vector<data::MotionSequence>& train,
                             const std::vector<data::MotionSequence>& val,
                             const CodecTrainConfig& cfg);

// Mean squared reconstruction error over full-length sequences.
double reconstruction_mse(const MotionCodec& codec, const std::vector<data::MotionSequence>& seqs,
                          int workers = 0);

// Per-element variance around the mean frame vector, the denominator of the
// "MSE < 10% of signal variance" acceptance bound.
double signal_variance(const std::vector<data::MotionSequence>& seqs);

std::vector<data::MotionSequence> load_split_motions(const data::CorpusManifest& manifest,
                                                     data::Split split);

}  // namespace facemotion::codec
