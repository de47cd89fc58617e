#include "facemotion/curation/headpose.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace facemotion::curation {

std::string to_string(PoseLabel label) {
    switch (label) {
        case PoseLabel::head_up: return "head up";
        case PoseLabel::head_down: return "head down";
        case PoseLabel::turns_right: return "head turns right";
        case PoseLabel::turns_left: return "head turns left";
        case PoseLabel::tilts_left: return "head tilts left";
        case PoseLabel::tilts_right: return "head tilts right";
    }
    throw ValidationError("unknown pose label");
}

std::vector<PoseStateFrame> label_head_pose(const data::MotionSequence& seq, double threshold) {
    std::vector<PoseStateFrame> states;
    states.reserve(static_cast<size_t>(seq.length()));
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
        PoseStateFrame state;
        state.frame = static_cast<int>(t);
        const double rx = seq.frames(t, data::kNeckStart);
        const double ry = seq.frames(t, data::kNeckStart + 1);
        const double rz = seq.frames(t, data::kNeckStart + 2);
        if (std::abs(rx) > threshold) {
            state.labels.emplace_back(rx < 0 ? PoseLabel::head_up : PoseLabel::head_down,
                                      std::abs(rx));
        }
        if (std::abs(ry) > threshold) {
            state.labels.emplace_back(ry < 0 ? PoseLabel::turns_right : PoseLabel::turns_left,
                                      std::abs(ry));
        }
        if (std::abs(rz) > threshold) {
            state.labels.emplace_back(rz < 0 ? PoseLabel::tilts_left : PoseLabel::tilts_right,
                                      std::abs(rz));
        }
        states.push_back(std::move(state));
    }
    return states;
}

std::vector<PoseSegment> summarize_pose_states(const std::vector<PoseStateFrame>& states) {
    std::map<PoseLabel, PoseSegment> open;
    std::vector<PoseSegment> segments;
    auto close = [&](PoseLabel label) {
        auto it = open.find(label);
        if (it != open.end()) {
            segments.push_back(it->second);
            open.erase(it);
        }
    };
    for (const auto& state : states) {
        std::vector<PoseLabel> active;
        for (const auto& [label, angle] : state.labels) {
            active.push_back(label);
            auto it = open.find(label);
            if (it == open.end()) {
                open[label] = PoseSegment{label, state.frame, state.frame, angle};
            } else {
                it->second.end = state.frame;
                it->second.peak = std::max(it->second.peak, angle);
            }
        }
        // close runs that ended this frame
        std::vector<PoseLabel> to_close;
        for (const auto& [label, seg] : open) {
            if (std::find(active.begin(), active.end(), label) == active.end()) {
                to_close.push_back(label);
            }
        }
        for (const PoseLabel label : to_close) close(label);
    }
    for (const auto& [label, seg] : open) segments.push_back(seg);
    std::sort(segments.begin(), segments.end(), [](const PoseSegment& a, const PoseSegment& b) {
        if (a.start != b.start) return a.start < b.start;
        return static_cast<int>(a.label) < static_cast<int>(b.label);
    });
    return segments;
}

}  // namespace facemotion::curation
