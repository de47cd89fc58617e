#pragma once

#include "facemotion/curation/prompts.hpp"
#include "facemotion/data/annotation.hpp"

namespace facemotion::curation {

// Deterministic text rendering shared by the synthetic corpus (ground truth)
// and the offline stub completion client. Every stylistic choice is a pure
// function of (entry_id, kind, evidence), so both sides produce identical
// text for identical evidence.

// Lab-style clips carry one of these actions, each with seven predefined
// description texts; one is selected per entry.
const std::vector<std::string>& predefined_action_texts(const std::string& action);
const std::vector<std::string>& known_emotions();
const std::vector<std::string>& scenario_pool(const std::string& emotion);

// Human-readable phrase for an action unit id (e.g. 12 -> lip corners pull upward).
std::string au_phrase(int au_id);
// slightly / moderately / strongly, from a peak intensity in [0, 1].
std::string intensity_adverb(double peak);

std::string render_annotation_field(PromptKind kind, const PromptEvidence& evidence);
data::AnnotationBundle render_annotation_bundle(const PromptEvidence& evidence);

}  // namespace facemotion::curation
