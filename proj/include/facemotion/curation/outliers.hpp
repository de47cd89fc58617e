#pragma once

#include <vector>

#include "facemotion/data/motion.hpp"

namespace facemotion::curation {

struct OutlierConfig {
    double scale = 1.5;  // s in [Q1 - s*IQR, Q3 + s*IQR]
};

// Quantile with linear interpolation between order statistics (values must be
// sorted ascending). q in [0, 1].
double quantile_linear(const std::vector<double>& sorted, double q);

// Flags frames whose absolute distance to the channel's temporal mean falls
// outside [Q1 - s*IQR, Q3 + s*IQR] of the per-frame distance distribution.
std::vector<int> flag_channel_outliers(const Eigen::VectorXd& channel, double scale);

// Replaces flagged frames per channel by linear interpolation between the
// nearest non-outlier neighbors; boundary outliers copy the nearest inlier.
// Throws CurationError if a channel has no inlier left.
data::MotionSequence repair_outliers(const data::MotionSequence& seq, const OutlierConfig& cfg);

}  // namespace facemotion::curation
