#include "facemotion/gen/train.hpp"

#include <cmath>

#include "facemotion/nn/optim.hpp"
#include "facemotion/parallel.hpp"

namespace facemotion::gen {

using namespace facemotion::nn;

nlohmann::json GenTrainConfig::to_json() const {
    return {
        {"steps", steps},
        {"batch_size", batch_size},
        {"lr", lr},
        {"adam_beta1", adam_beta1},
        {"adam_beta2", adam_beta2},
        {"val_every", val_every},
        {"seed", seed},
        {"shuffled_text_pairing", shuffled_text_pairing},
    };
}

std::vector<GenExample> prepare_generator_examples(const data::CorpusManifest& manifest,
                                                   data::Split split,
                                                   const codec::MotionCodec& codec,
                                                   bool use_audio, int workers) {
    const auto entries = manifest.split_entries(split);
    std::vector<GenExample> examples(entries.size());
    parallel_for(entries.size(), workers, [&](size_t i) {
        const data::CorpusEntry& entry = *entries[i];
        GenExample& ex = examples[i];
        ex.id = entry.id;
        const data::MotionSequence motion =
            data::read_container(manifest.root / entry.motion_path);
        ex.frames = static_cast<int>(motion.length());
        ex.tokens = codec.quantize(codec.encode(motion)).second;
        ex.annotation = data::load_annotation(manifest.root / entry.annotation_path);
        if (use_audio && entry.audio_path) {
            const data::AudioClip clip = data::read_wav(manifest.root / *entry.audio_path);
            ex.mel = log_mel_frames(clip);
        }
    });
    return examples;
}

SubwordVocab build_vocab_from_split(const data::CorpusManifest& manifest, data::Split split,
                                    size_t max_words) {
    std::vector<std::string> texts;
    for (const auto* entry : manifest.split_entries(split)) {
        const auto annotation = data::load_annotation(manifest.root / entry->annotation_path);
        texts.push_back(annotation.full_text());
    }
    if (texts.empty()) {
        throw TrainingError("cannot build a vocabulary from an empty split");
    }
    return SubwordVocab::build(texts, max_words);
}

namespace {

struct ItemState {
    GraphCtx ctx{true};
    double loss = 0.0;
};

// Teacher-forced loss for one example; the audio feature length is aligned to
// the token count before entering the decoder.
Tensor example_loss(const MotionTokenGenerator& model, GraphCtx& ctx, const GenExample& ex,
                    const data::AnnotationBundle& annotation) {
    ConditioningTensors cond =
        model.encode_conditions_graph(ctx, annotation, ex.has_audio() ? &ex.mel : nullptr);
    if (cond.has_audio()) {
        const Eigen::Index n_tokens = static_cast<Eigen::Index>(ex.tokens.size());
        if (cond.audio.rows() != n_tokens) {
            cond.audio = Tensor::constant(align_rows(cond.audio.value(), n_tokens));
        }
    }
    Tensor logits = model.forward_teacher_forced(ctx, ex.tokens, cond);
    std::vector<int> targets(ex.tokens.begin(), ex.tokens.end());
    targets.push_back(model.eos_id());
    return cross_entropy_mean(logits, targets, model.pad_id());
}

}  // namespace

double validation_nll(const MotionTokenGenerator& model, const std::vector<GenExample>& examples,
                      int workers) {
    if (examples.empty()) {
        throw TrainingError("validation NLL over an empty split");
    }
    std::vector<double> losses(examples.size(), 0.0);
    parallel_for(examples.size(), workers, [&](size_t i) {
        GraphCtx ctx(false);
        losses[i] = example_loss(model, ctx, examples[i], examples[i].annotation).scalar();
    });
    double total = 0.0;
    for (const double l : losses) total += l;
    return total / static_cast<double>(examples.size());
}

double teacher_forced_accuracy(const MotionTokenGenerator& model, const GenExample& example) {
    ConditioningBundle bundle;
    {
        GraphCtx ctx(false);
        ConditioningTensors cond = model.encode_conditions_graph(
            ctx, example.annotation, example.has_audio() ? &example.mel : nullptr);
        bundle.full_text = cond.full_text.value();
        bundle.hier_text = cond.hier_text.value();
        if (cond.has_audio()) {
            bundle.audio =
                align_rows(cond.audio.value(), static_cast<Eigen::Index>(example.tokens.size()));
        }
    }
    const Mat logits = model.teacher_forced_logits(example.tokens, bundle);
    std::vector<int> targets(example.tokens.begin(), example.tokens.end());
    targets.push_back(model.eos_id());
    int hits = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        int arg = 0;
        logits.row(r).maxCoeff(&arg);
        if (arg == targets[static_cast<size_t>(r)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

GenTrainResult train_generator(MotionTokenGenerator& model, const std::vector<GenExample>& train,
                               const std::vector<GenExample>& val, const GenTrainConfig& cfg) {
    if (train.empty()) {
        throw TrainingError("generator training needs a non-empty split");
    }
    ParamList params = model.params();
    Adam optimizer({.lr = cfg.lr, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2, .eps = 1e-8});
    Rng rng(cfg.seed);

    // optional control: shuffle which annotation goes with which motion
    std::vector<size_t> annotation_of(train.size());
    for (size_t i = 0; i < train.size(); ++i) annotation_of[i] = i;
    if (cfg.shuffled_text_pairing) {
        Rng shuffle_rng(cfg.seed ^ 0x517u);
        shuffle_rng.shuffle(annotation_of);
    }

    GenTrainResult result;
    result.loss_curve.reserve(static_cast<size_t>(cfg.steps));
    if (!val.empty()) {
        result.initial_val_nll = validation_nll(model, val, cfg.workers);
        result.best_val_nll = result.initial_val_nll;
        result.val_nll_curve.emplace_back(0, result.initial_val_nll);
    }

    auto snapshot = [&]() {
        std::vector<Mat> values;
        values.reserve(params.size());
        for (const Param* p : params) values.push_back(p->value);
        return values;
    };
    auto restore = [&](const std::vector<Mat>& values) {
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
    };
    std::vector<Mat> last_good = snapshot();
    std::vector<Mat> best = snapshot();

    for (int step = 1; step <= cfg.steps; ++step) {
        std::vector<size_t> batch(static_cast<size_t>(cfg.batch_size));
        for (auto& idx : batch) idx = static_cast<size_t>(rng.below(train.size()));

        std::vector<ItemState> items(batch.size());
        parallel_for(batch.size(), cfg.workers, [&](size_t i) {
            const GenExample& ex = train[batch[i]];
            const data::AnnotationBundle& annotation = train[annotation_of[batch[i]]].annotation;
            Tensor loss = example_loss(model, items[i].ctx, ex, annotation);
            loss.backward();
            items[i].loss = loss.scalar();
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
            throw TrainingError("generator training diverged at step " + std::to_string(step));
        }

        for (Param* p : params) {
            p->grad /= static_cast<double>(items.size());
        }
        optimizer.step(params);
        optimizer.zero_grad(params);

        if ((step % cfg.val_every == 0 || step == cfg.steps) && !val.empty()) {
            const double nll = validation_nll(model, val, cfg.workers);
            result.val_nll_curve.emplace_back(step, nll);
            if (!std::isfinite(nll)) {
                restore(last_good);
                throw TrainingError("validation diverged at step " + std::to_string(step));
            }
            if (nll < result.best_val_nll) {
                result.best_val_nll = nll;
                best = snapshot();
            }
            last_good = snapshot();
        }
    }

    if (!val.empty()) {
        restore(best);  // checkpoint keeps the best validation NLL
        result.final_val_nll = validation_nll(model, val, cfg.workers);
    }
    return result;
}

}  // namespace facemotion::gen
