#include "facemotion/curation/outliers.hpp"

#include <algorithm>
#include <cmath>

namespace facemotion::curation {

double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        throw CurationError("quantile of empty sample");
    }
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<int> flag_channel_outliers(const Eigen::VectorXd& channel, double scale) {
    if (scale <= 0.0) {
        throw CurationError("outlier scale must be positive");
    }
    const double mean = channel.mean();
    std::vector<double> distances(static_cast<size_t>(channel.size()));
    for (Eigen::Index t = 0; t < channel.size(); ++t) {
        distances[static_cast<size_t>(t)] = std::abs(channel(t) - mean);
    }
    std::vector<double> sorted = distances;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_linear(sorted, 0.25);
    const double q3 = quantile_linear(sorted, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - scale * iqr;
    const double hi = q3 + scale * iqr;
    std::vector<int> flagged;
    for (size_t t = 0; t < distances.size(); ++t) {
        if (distances[t] < lo || distances[t] > hi) {
            flagged.push_back(static_cast<int>(t));
        }
    }
    return flagged;
}

data::MotionSequence repair_outliers(const data::MotionSequence& seq, const OutlierConfig& cfg) {
    if (seq.length() < 4) {
        throw CurationError("outlier repair needs at least 4 frames");
    }
    const Eigen::Index t_count = seq.length();
    data::MotionSequence out = seq;
    for (int c = 0; c < data::kParamDim; ++c) {
        const Eigen::VectorXd channel = seq.frames.col(c).cast<double>();
        const std::vector<int> flagged = flag_channel_outliers(channel, cfg.scale);
        if (flagged.empty()) {
            continue;
        }
        if (static_cast<Eigen::Index>(flagged.size()) == t_count) {
            throw CurationError("channel " + std::to_string(c) + " has no usable frames");
        }
        std::vector<bool> is_outlier(static_cast<size_t>(t_count), false);
        for (const int f : flagged) {
            is_outlier[static_cast<size_t>(f)] = true;
        }
        for (const int f : flagged) {
            // nearest inlier on each side
            int left = f - 1;
            while (left >= 0 && is_outlier[static_cast<size_t>(left)]) --left;
            int right = f + 1;
            while (right < t_count && is_outlier[static_cast<size_t>(right)]) ++right;
            double value = 0.0;
            if (left >= 0 && right < t_count) {
                const double w = static_cast<double>(f - left) / static_cast<double>(right - left);
                value = channel(left) + w * (channel(right) - channel(left));
            } else if (left >= 0) {
                value = channel(left);
            } else {
                value = channel(right);
            }
            out.frames(f, c) = static_cast<float>(value);
        }
    }
    return out;
}

}  // namespace facemotion::curation
