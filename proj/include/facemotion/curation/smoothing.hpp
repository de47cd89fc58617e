#pragma once

#include <vector>

#include "facemotion/data/motion.hpp"

namespace facemotion::curation {

struct SmoothingConfig {
    double lambda = 1.0;  // pose velocity weight
    int steps = 200;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Data-fidelity anchor; the pure velocity objective alone is minimized by
    // any constant sequence, so mu keeps the optimum near the input. mu = 0
    // recovers the bare velocity objective.
    double mu = 10.0;
};

struct SmoothResult {
    data::MotionSequence smoothed;
    std::vector<double> loss_trace;  // steps + 1 values, trace[0] = initial loss
};

// Sum of squared frame-to-frame velocities: expression channels weighted 1,
// pose channels weighted lambda.
double velocity_loss(const Eigen::MatrixXd& frames, double lambda);

// Full objective: velocity_loss + mu * ||frames - anchor||^2.
double smoothing_loss(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& anchor,
                      const SmoothingConfig& cfg);
Eigen::MatrixXd smoothing_gradient(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& anchor,
                                   const SmoothingConfig& cfg);

// Runs the configured number of Adam steps on the objective above.
SmoothResult smooth_sequence(const data::MotionSequence& seq, const SmoothingConfig& cfg);

}  // namespace facemotion::curation
