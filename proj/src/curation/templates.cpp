#include "facemotion/curation/templates.hpp"

#include <cmath>
#include <map>

namespace facemotion::curation {

namespace {

const std::vector<std::string> kTalkTexts = {
    "A person is talking.",
    "Someone speaks while facing forward.",
    "The person is having a conversation.",
    "A person talks to the camera.",
    "Someone is speaking calmly.",
    "The person delivers a short speech.",
    "A person chats about something.",
};

const std::vector<std::string> kSingTexts = {
    "A person is singing.",
    "Someone sings a melody.",
    "The person performs a song.",
    "A person sings along to music.",
    "Someone is singing a tune.",
    "The person sings a few lines.",
    "A person hums and sings.",
};

const std::vector<std::string> kExpressionTexts = {
    "A person is making a facial expression.",
    "Someone makes an expressive face.",
    "The person shows a facial expression.",
    "A person pulls a distinct expression.",
    "Someone displays an expression on their face.",
    "The person acts out a facial expression.",
    "A person makes a face.",
};

const std::vector<std::string> kEmotions = {
    "neutral", "happy", "sad", "angry", "surprised", "fearful", "disgusted", "calm",
};

const std::map<std::string, std::vector<std::string>> kScenarioPools = {
    {"neutral",
     {"They are waiting quietly for an appointment.",
      "They are listening to routine instructions.",
      "They are reading an ordinary report.",
      "They are riding an uneventful train.",
      "They are watching a plain documentary."}},
    {"happy",
     {"They just received good news about a job offer.",
      "A close friend surprised them with a visit.",
      "They won a small prize in a raffle.",
      "Their favorite team scored the winning goal.",
      "They are remembering a joyful holiday."}},
    {"sad",
     {"They just heard about a friend moving far away.",
      "A beloved pet is ill.",
      "They missed an important family gathering.",
      "They are recalling a painful goodbye.",
      "A cherished plan fell through."}},
    {"angry",
     {"Someone cut in line right in front of them.",
      "A promised delivery failed for the third time.",
      "They were blamed for a mistake they did not make.",
      "Loud construction noise ruined their rest.",
      "A driver nearly hit them at a crossing."}},
    {"surprised",
     {"An unexpected guest appeared at the door.",
      "They found a forgotten gift in a drawer.",
      "The lights suddenly went out.",
      "A colleague announced a sudden resignation.",
      "They spotted a rare bird at the window."}},
    {"fearful",
     {"They heard strange footsteps in an empty house.",
      "A storm knocked out the power at night.",
      "They are waiting for risky medical results.",
      "A large dog charged toward them.",
      "The elevator stopped between floors."}},
    {"disgusted",
     {"They found spoiled food in the fridge.",
      "They stepped into something sticky on the street.",
      "A foul smell drifted in from outside.",
      "They saw a swarm of insects on a picnic table.",
      "They discovered mold on their favorite mug."}},
    {"calm",
     {"They are watching a quiet sunset.",
      "They finished a relaxing breathing exercise.",
      "Soft music is playing in the background.",
      "They are strolling through a still garden.",
      "They are sipping tea by a window."}},
};

// AU ids used by the synthetic motif catalog plus common speech AUs.
const std::map<int, std::string> kAuPhrases = {
    {2, "eyebrows raise"},
    {5, "eyes widen"},
    {7, "eyelids tighten into a squint"},
    {9, "nose wrinkles"},
    {12, "lip corners pull upward into a smile"},
    {15, "lip corners press downward into a frown"},
    {24, "lips press together"},
    {25, "lips part repeatedly"},
    {26, "jaw drops open"},
};

uint64_t style_hash(const PromptEvidence& evidence, PromptKind kind, uint64_t salt = 0) {
    return fnv1a64(evidence.entry_id + "|" + to_string(kind), 0xcbf29ce484222325ull + salt);
}

std::string describe_pose_segment(const PoseSegment& segment) {
    const int degrees = static_cast<int>(std::lround(segment.peak * 180.0 / 3.14159265358979));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "the %s %s, peaking near %d degrees between frames %d and %d",
                  to_string(segment.label).c_str(), intensity_adverb(segment.peak / 0.6).c_str(),
                  degrees, segment.start, segment.end);
    std::string text = buf;
    // to_string already includes the word "head"
    return text;
}

}  // namespace

const std::vector<std::string>& predefined_action_texts(const std::string& action) {
    if (action == "talk") return kTalkTexts;
    if (action == "sing") return kSingTexts;
    if (action == "expression") return kExpressionTexts;
    throw CurationError("no predefined texts for action: " + action);
}

const std::vector<std::string>& known_emotions() { return kEmotions; }

const std::vector<std::string>& scenario_pool(const std::string& emotion) {
    auto it = kScenarioPools.find(emotion);
    if (it == kScenarioPools.end()) {
        throw CurationError("no scenario pool for emotion: " + emotion);
    }
    return it->second;
}

std::string au_phrase(int au_id) {
    auto it = kAuPhrases.find(au_id);
    if (it != kAuPhrases.end()) {
        return it->second;
    }
    return "action unit " + std::to_string(au_id) + " activates";
}

std::string intensity_adverb(double peak) {
    if (peak < 0.45) return "slightly";
    if (peak < 0.8) return "moderately";
    return "strongly";
}

std::string render_annotation_field(PromptKind kind, const PromptEvidence& evidence) {
    switch (kind) {
        case PromptKind::abstract_action: {
            if (!evidence.action.empty()) {
                const auto& texts = predefined_action_texts(evidence.action);
                return texts[style_hash(evidence, kind) % texts.size()];
            }
            if (!evidence.au_events.empty()) {
                return "The person moves the face: " + au_phrase(evidence.au_events.front().au_id) +
                       ".";
            }
            if (!evidence.pose_segments.empty()) {
                return "The person moves: " + to_string(evidence.pose_segments.front().label) + ".";
            }
            throw CurationError("cannot render abstract_action without evidence");
        }
        case PromptKind::abstract_emotion: {
            if (evidence.emotion.empty()) {
                throw CurationError("cannot render abstract_emotion without an emotion label");
            }
            static const std::vector<std::string> skeletons = {
                "The person appears {e} throughout the clip.",
                "The person seems {e}.",
                "An overall {e} mood shows on the face.",
                "The face conveys a {e} feeling.",
                "The person looks {e} here.",
            };
            std::string text = skeletons[style_hash(evidence, kind) % skeletons.size()];
            const auto pos = text.find("{e}");
            text.replace(pos, 3, evidence.emotion);
            return text;
        }
        case PromptKind::expression_detail: {
            if (evidence.au_events.empty()) {
                return "The face stays relaxed with no distinct action unit activity.";
            }
            std::string text;
            for (size_t i = 0; i < evidence.au_events.size(); ++i) {
                const auto& e = evidence.au_events[i];
                if (i == 0) {
                    text += "First ";
                } else {
                    text += " Then ";
                }
                char buf[200];
                std::snprintf(buf, sizeof(buf), "the %s %s between frames %d and %d.",
                              au_phrase(e.au_id).c_str(), intensity_adverb(e.peak).c_str(), e.start,
                              e.end);
                text += buf;
            }
            return text;
        }
        case PromptKind::headpose_detail: {
            if (evidence.pose_segments.empty()) {
                return "The head stays still throughout.";
            }
            std::string text;
            for (size_t i = 0; i < evidence.pose_segments.size(); ++i) {
                if (i == 0) {
                    text += "First ";
                } else {
                    text += " Then ";
                }
                text += describe_pose_segment(evidence.pose_segments[i]);
                text += ".";
            }
            return text;
        }
        case PromptKind::scenarios: {
            const auto& pool = scenario_pool(evidence.emotion);
            Rng rng(style_hash(evidence, kind, 0x5c3));
            std::vector<size_t> order(pool.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
            std::string text;
            for (size_t i = 0; i < 3; ++i) {
                if (i > 0) text += "\n";
                text += pool[order[i]];
            }
            return text;
        }
    }
    throw ValidationError("unknown prompt kind");
}

data::AnnotationBundle render_annotation_bundle(const PromptEvidence& evidence) {
    data::AnnotationBundle bundle;
    bundle.abstract_action = render_annotation_field(PromptKind::abstract_action, evidence);
    bundle.abstract_emotion = render_annotation_field(PromptKind::abstract_emotion, evidence);
    bundle.expression_detail = render_annotation_field(PromptKind::expression_detail, evidence);
    bundle.headpose_detail = render_annotation_field(PromptKind::headpose_detail, evidence);
    const std::string scenarios = render_annotation_field(PromptKind::scenarios, evidence);
    size_t start = 0;
    for (int i = 0; i < 3; ++i) {
        const size_t nl = scenarios.find('\n', start);
        bundle.scenarios[static_cast<size_t>(i)] =
            scenarios.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        start = nl == std::string::npos ? scenarios.size() : nl + 1;
    }
    return bundle;
}

}  // namespace facemotion::curation
