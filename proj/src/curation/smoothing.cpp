#include "facemotion/curation/smoothing.hpp"

#include <cmath>

namespace facemotion::curation {

namespace {
double channel_weight(int c, double lambda) {
    return c < data::kExpressionDim ? 1.0 : lambda;
}
}  // namespace

double velocity_loss(const Eigen::MatrixXd& frames, double lambda) {
    const Eigen::Index t_count = frames.rows();
    double loss = 0.0;
    for (Eigen::Index t = 0; t + 1 < t_count; ++t) {
        for (int c = 0; c < data::kParamDim; ++c) {
            const double d = frames(t + 1, c) - frames(t, c);
            loss += channel_weight(c, lambda) * d * d;
        }
    }
    return loss;
}

double smoothing_loss(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& anchor,
                      const SmoothingConfig& cfg) {
    return velocity_loss(frames, cfg.lambda) + cfg.mu * (frames - anchor).squaredNorm();
}

Eigen::MatrixXd smoothing_gradient(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& anchor,
                                   const SmoothingConfig& cfg) {
    const Eigen::Index t_count = frames.rows();
    Eigen::MatrixXd grad = 2.0 * cfg.mu * (frames - anchor);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        for (int c = 0; c < data::kParamDim; ++c) {
            const double w = channel_weight(c, cfg.lambda);
            double g = 0.0;
            if (t > 0) {
                g += 2.0 * (frames(t, c) - frames(t - 1, c));
            }
            if (t + 1 < t_count) {
                g -= 2.0 * (frames(t + 1, c) - frames(t, c));
            }
            grad(t, c) += w * g;
        }
    }
    return grad;
}

SmoothResult smooth_sequence(const data::MotionSequence& seq, const SmoothingConfig& cfg) {
    if (seq.length() < 2) {
        throw CurationError("smoothing needs at least 2 frames");
    }
    if (cfg.steps < 1 || cfg.lr <= 0.0 || cfg.lambda < 0.0 || cfg.mu < 0.0) {
        throw CurationError("invalid smoothing config");
    }
    const Eigen::MatrixXd anchor = seq.frames.cast<double>();
    Eigen::MatrixXd y = anchor;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(y.rows(), y.cols());
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(y.rows(), y.cols());

    SmoothResult result;
    result.loss_trace.reserve(static_cast<size_t>(cfg.steps) + 1);
    result.loss_trace.push_back(smoothing_loss(y, anchor, cfg));
    for (int step = 1; step <= cfg.steps; ++step) {
        const Eigen::MatrixXd grad = smoothing_gradient(y, anchor, cfg);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * grad.array().square().matrix();
        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        y.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
        const double loss = smoothing_loss(y, anchor, cfg);
        if (!std::isfinite(loss)) {
            throw CurationError("smoothing loss diverged");
        }
        result.loss_trace.push_back(loss);
    }
    result.smoothed.fps = seq.fps;
    result.smoothed.frames = y.cast<float>();
    return result;
}

}  // namespace facemotion::curation
