#pragma once

#include <string>
#include <vector>

#include "facemotion/curation/au_events.hpp"
#include "facemotion/curation/headpose.hpp"

namespace facemotion::curation {

enum class PromptKind {
    abstract_action,
    abstract_emotion,
    expression_detail,
    headpose_detail,
    scenarios,
};

std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& s);

// Structured inputs a prompt is assembled from. entry_id keeps the template
// style picks deterministic per corpus entry.
struct PromptEvidence {
    std::string entry_id;
    std::string action;   // lab-style action label: "talk", "sing", "expression"; empty for wild clips
    std::string emotion;  // e.g. "happy"
    bool has_au_track = false;
    std::vector<AuEvent> au_events;
    int n_frames = 0;
    std::vector<PoseSegment> pose_segments;
};

struct PromptRequest {
    PromptKind kind = PromptKind::abstract_action;
    std::string prompt;
    PromptEvidence evidence;
    int max_tokens = 120;
};

// Versioned prompt template set; bump when wording changes so annotations can
// be traced to the prompt text that produced them.
extern const char* const kPromptTemplateVersion;

// Renders the prompt text for a kind from its evidence. Throws CurationError
// when a required evidence field is missing.
PromptRequest build_prompt(PromptKind kind, const PromptEvidence& evidence);

// "(label, start, end, peak)" tuples in chronological order.
std::string serialize_au_events(const std::vector<AuEvent>& events);
std::string serialize_pose_segments(const std::vector<PoseSegment>& segments);

}  // namespace facemotion::curation
