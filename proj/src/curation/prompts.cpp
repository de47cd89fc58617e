#include "facemotion/curation/prompts.hpp"

#include <cmath>

namespace facemotion::curation {

const char* const kPromptTemplateVersion = "v1";

std::string to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::abstract_action: return "abstract_action";
        case PromptKind::abstract_emotion: return "abstract_emotion";
        case PromptKind::expression_detail: return "expression_detail";
        case PromptKind::headpose_detail: return "headpose_detail";
        case PromptKind::scenarios: return "scenarios";
    }
    throw ValidationError("unknown prompt kind");
}

PromptKind prompt_kind_from_string(const std::string& s) {
    if (s == "abstract_action") return PromptKind::abstract_action;
    if (s == "abstract_emotion") return PromptKind::abstract_emotion;
    if (s == "expression_detail") return PromptKind::expression_detail;
    if (s == "headpose_detail") return PromptKind::headpose_detail;
    if (s == "scenarios") return PromptKind::scenarios;
    throw ValidationError("unknown prompt kind: " + s);
}

std::string serialize_au_events(const std::vector<AuEvent>& events) {
    if (events.empty()) {
        return "(none)";
    }
    std::string out;
    for (const auto& e : events) {
        if (!out.empty()) out += ", ";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "(AU%d, %d, %d, %.2f)", e.au_id, e.start, e.end, e.peak);
        out += buf;
    }
    return out;
}

std::string serialize_pose_segments(const std::vector<PoseSegment>& segments) {
    if (segments.empty()) {
        return "(none)";
    }
    std::string out;
    for (const auto& s : segments) {
        if (!out.empty()) out += ", ";
        char buf[112];
        std::snprintf(buf, sizeof(buf), "(%s, %d, %d, %.2f)", to_string(s.label).c_str(), s.start,
                      s.end, s.peak);
        out += buf;
    }
    return out;
}

PromptRequest build_prompt(PromptKind kind, const PromptEvidence& evidence) {
    PromptRequest request;
    request.kind = kind;
    request.evidence = evidence;

    const std::string header =
        "You are annotating a short 3D facial animation clip of a single person.\n";
    switch (kind) {
        case PromptKind::abstract_action: {
            if (evidence.action.empty() && evidence.au_events.empty() &&
                evidence.pose_segments.empty()) {
                throw CurationError("abstract_action prompt needs an action label or events");
            }
            request.prompt = header;
            if (!evidence.action.empty()) {
                request.prompt += "Action label: " + evidence.action + ".\n";
            }
            request.prompt +=
                "Facial action unit events (label, start, end, peak): " +
                serialize_au_events(evidence.au_events) + ".\n" +
                "Head pose events (label, start, end, peak): " +
                serialize_pose_segments(evidence.pose_segments) + ".\n" +
                "Deduce the chronological order of the actions and describe the overall "
                "action in one concise sentence.";
            break;
        }
        case PromptKind::abstract_emotion: {
            if (evidence.emotion.empty()) {
                throw CurationError("abstract_emotion prompt needs an emotion label");
            }
            request.prompt = header + "Emotion labels: " + evidence.emotion + ".\n" +
                             "String the given emotion labels into one natural sentence "
                             "describing how the person feels.";
            break;
        }
        case PromptKind::expression_detail: {
            if (!evidence.has_au_track) {
                throw CurationError("expression_detail prompt needs an AU track");
            }
            request.prompt =
                header +
                "Per-frame activated facial action units were summarized into events "
                "(label, start, end, peak): " +
                serialize_au_events(evidence.au_events) + ".\n" +
                "Summarize the facial movements in chronological order as fluent text.";
            break;
        }
        case PromptKind::headpose_detail: {
            if (evidence.n_frames <= 0) {
                throw CurationError("headpose_detail prompt needs pose state frames");
            }
            request.prompt =
                header +
                "Head pose state events derived from the neck rotation vector "
                "(label, start, end, peak angle in radians): " +
                serialize_pose_segments(evidence.pose_segments) + ".\n" +
                "Summarize the head movements in chronological order as fluent text.";
            break;
        }
        case PromptKind::scenarios: {
            if (evidence.emotion.empty()) {
                throw CurationError("scenarios prompt needs an emotion label");
            }
            request.prompt = header + "The person's emotion is: " + evidence.emotion + ".\n" +
                             "Imagine three possible scenarios that may cause such emotion. "
                             "Answer with three short sentences separated by newlines.";
            request.max_tokens = 180;
            break;
        }
    }
    return request;
}

}  // namespace facemotion::curation
