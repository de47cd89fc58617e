#include "facemotion/curation/au_events.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace facemotion::curation {

std::vector<AuEvent> summarize_au_events(const AuTrack& track, double threshold,
                                         int min_duration) {
    if (min_duration < 1) {
        throw CurationError("min_duration must be at least 1 frame");
    }
    // collect per-AU intensity series
    std::map<int, std::vector<double>> series;
    for (size_t t = 0; t < track.size(); ++t) {
        for (const auto& a : track[t]) {
            if (a.intensity < 0.0 || a.intensity > 1.0) {
                throw CurationError("AU intensity outside [0, 1]");
            }
            auto& s = series[a.au_id];
            s.resize(track.size(), 0.0);
            s[t] = a.intensity;
        }
    }
    std::vector<AuEvent> events;
    for (const auto& [au_id, values] : series) {
        int run_start = -1;
        double peak = 0.0;
        for (size_t t = 0; t <= values.size(); ++t) {
            const bool on = t < values.size() && values[t] >= threshold;
            if (on) {
                if (run_start < 0) {
                    run_start = static_cast<int>(t);
                    peak = values[t];
                } else {
                    peak = std::max(peak, values[t]);
                }
            } else if (run_start >= 0) {
                const int run_end = static_cast<int>(t) - 1;
                if (run_end - run_start + 1 >= min_duration) {
                    events.push_back(AuEvent{au_id, run_start, run_end, peak});
                }
                run_start = -1;
            }
        }
    }
    std::sort(events.begin(), events.end(), [](const AuEvent& a, const AuEvent& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.au_id < b.au_id;
    });
    return events;
}

void save_au_track(const AuTrack& track, const std::filesystem::path& path) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& frame : track) {
        nlohmann::json f = nlohmann::json::array();
        for (const auto& a : frame) {
            f.push_back(nlohmann::json::array({a.au_id, a.intensity}));
        }
        frames.push_back(std::move(f));
    }
    std::ofstream out(path);
    if (!out) {
        throw ContainerFormatError("cannot write AU track: " + path.string());
    }
    out << frames.dump() << "\n";
}

AuTrack load_au_track(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContainerFormatError("cannot read AU track: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("bad AU JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) {
        throw ContainerFormatError("AU track must be an array of frames");
    }
    AuTrack track;
    track.reserve(j.size());
    for (const auto& frame : j) {
        std::vector<AuFrameActivation> fa;
        for (const auto& pair : frame) {
            if (!pair.is_array() || pair.size() != 2) {
                throw ContainerFormatError("AU entries must be [id, intensity] pairs");
            }
            fa.push_back(AuFrameActivation{pair[0].get<int>(), pair[1].get<double>()});
        }
        track.push_back(std::move(fa));
    }
    return track;
}

}  // namespace facemotion::curation
