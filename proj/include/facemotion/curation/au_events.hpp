#pragma once

#include <filesystem>
#include <vector>

#include "facemotion/common.hpp"

namespace facemotion::curation {

// Per-frame action-unit activations, as produced by an external AU detector.
struct AuFrameActivation {
    int au_id = 0;  // 1..41
    double intensity = 0.0;  // [0, 1]
};

using AuTrack = std::vector<std::vector<AuFrameActivation>>;  // indexed by frame

struct AuEvent {
    int au_id = 0;
    int start = 0;
    int end = 0;  // inclusive
    double peak = 0.0;
};

// Maximal runs with intensity >= threshold and length >= min_duration, listed
// chronologically by start frame.
std::vector<AuEvent> summarize_au_events(const AuTrack& track, double threshold,
                                         int min_duration);

// External interface: JSON array of per-frame arrays of [id, intensity] pairs.
void save_au_track(const AuTrack& track, const std::filesystem::path& path);
AuTrack load_au_track(const std::filesystem::path& path);

}  // namespace facemotion::curation
