#pragma once

#include <string>
#include <vector>

#include "facemotion/data/motion.hpp"

namespace facemotion::curation {

// Sign convention of the neck rotation vector r = (rx, ry, rz):
//   rx < 0 head up      rx > 0 head down
//   ry < 0 turns right  ry > 0 turns left
//   rz < 0 tilts left   rz > 0 tilts right
enum class PoseLabel {
    head_up,
    head_down,
    turns_right,
    turns_left,
    tilts_left,
    tilts_right,
};

std::string to_string(PoseLabel label);

struct PoseStateFrame {
    int frame = 0;
    // at most one label per axis, paired with the angle magnitude in radians
    std::vector<std::pair<PoseLabel, double>> labels;
};

struct PoseSegment {
    PoseLabel label;
    int start = 0;
    int end = 0;  // inclusive
    double peak = 0.0;  // max angle magnitude within the segment, radians
};

// Emits one PoseStateFrame per motion frame; axes whose |angle| exceeds the
// threshold get the sign-mapped label. Total function, never throws on data.
std::vector<PoseStateFrame> label_head_pose(const data::MotionSequence& seq,
                                            double threshold = 0.05);

// Merges consecutive frames carrying the same label into segments ordered by
// start frame.
std::vector<PoseSegment> summarize_pose_states(const std::vector<PoseStateFrame>& states);

}  // namespace facemotion::curation
