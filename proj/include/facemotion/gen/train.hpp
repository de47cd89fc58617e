#pragma once

#include "facemotion/data/manifest.hpp"
#include "facemotion/gen/model.hpp"

namespace facemotion::gen {

struct GenExample {
    std::string id;
    TokenSequence tokens;
    data::AnnotationBundle annotation;
    nn::Mat mel;  // empty when there is no audio
    int frames = 0;

    bool has_audio() const { return mel.rows() > 0; }
};

// Tokenizes the split's motions with the frozen codec and caches mel features
// for paired audio (when use_audio is set).
std::vector<GenExample> prepare_generator_examples(const data::CorpusManifest& manifest,
                                                   data::Split split,
                                                   const codec::MotionCodec& codec,
                                                   bool use_audio, int workers = 0);

SubwordVocab build_vocab_from_split(const data::CorpusManifest& manifest, data::Split split,
                                    size_t max_words = 2000);

struct GenTrainConfig {
    int steps = 800;
    int batch_size = 8;
    double lr = 3e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int val_every = 100;
    int workers = 0;
    uint64_t seed = 7;
    // Control experiment: permute annotations among training examples while
    // keeping motion (and audio) fixed. Validation stays correctly paired.
    bool shuffled_text_pairing = false;

    nlohmann::json to_json() const;
};

struct GenTrainResult {
    std::vector<double> loss_curve;
    std::vector<std::pair<int, double>> val_nll_curve;  // (step, nll)
    double initial_val_nll = 0.0;
    double best_val_nll = 0.0;
    double final_val_nll = 0.0;
};

// Teacher-forced training; the model is left at its best-validation-NLL
// weights. Throws TrainingError on NaN with the last snapshot restored.
GenTrainResult train_generator(MotionTokenGenerator& model,
                               const std::vector<GenExample>& train,
                               const std::vector<GenExample>& val, const GenTrainConfig& cfg);

double validation_nll(const MotionTokenGenerator& model, const std::vector<GenExample>& examples,
                      int workers = 0);

// Fraction of next-token argmax hits under teacher forcing (EOS included).
double teacher_forced_accuracy(const MotionTokenGenerator& model, const GenExample& example);

}  // namespace facemotion::gen
