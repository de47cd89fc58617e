#pragma once

#include <memory>

#include "facemotion/curation/prompts.hpp"
#include "facemotion/curation/templates.hpp"
#include "facemotion/data/manifest.hpp"

namespace facemotion::curation {

// Text-completion backend. Implementations must be safe for concurrent
// complete() calls; transport failures are reported by throwing.
class TextCompletionClient {
public:
    virtual ~TextCompletionClient() = default;
    virtual std::string complete(const PromptRequest& request) = 0;
};

// Offline default: answers from the deterministic template set, i.e. exactly
// the ground-truth text the synthetic corpus carries for the same evidence.
class StubClient : public TextCompletionClient {
public:
    std::string complete(const PromptRequest& request) override {
        return render_annotation_field(request.kind, request.evidence);
    }
};

// HTTP client POSTing {"prompt", "kind", "max_tokens"} and expecting
// {"text": ...}. Endpoint and key come from FACEMOTION_LLM_ENDPOINT and
// FACEMOTION_LLM_API_KEY unless given explicitly.
class HttpCompletionClient : public TextCompletionClient {
public:
    HttpCompletionClient();  // reads environment configuration
    HttpCompletionClient(std::string host, int port, std::string path, std::string api_key);
    std::string complete(const PromptRequest& request) override;

private:
    std::string host_;
    int port_ = 80;
    std::string path_ = "/v1/complete";
    std::string api_key_;
};

// Per-entry action/emotion labels recorded by the corpus generator; the
// annotation stage reads them as prompt evidence.
struct EntryLabels {
    std::string action;
    std::string emotion;
};

void save_entry_labels(const EntryLabels& labels, const std::filesystem::path& path);
EntryLabels load_entry_labels(const std::filesystem::path& path);

struct AnnotateConfig {
    int retries = 2;              // attempts = retries + 1
    int workers = 2;              // parallel entries
    int max_in_flight = 4;        // cap on concurrent client calls
    double min_request_interval_s = 0.0;  // politeness rate limit
    double pose_threshold = 0.05;
    double au_threshold = 0.25;  // matches the synthetic ground-truth summarization
    int au_min_duration = 2;
};

struct AnnotateOutcome {
    size_t annotated = 0;
    std::vector<std::string> unannotated_ids;
    size_t attempts = 0;  // total client calls issued
};

// Fills the five text fields for every manifest entry and writes them to the
// entry's annotation path. Entries whose client calls keep failing are left
// unannotated; the pipeline continues.
AnnotateOutcome annotate(const data::CorpusManifest& manifest, TextCompletionClient& client,
                         const AnnotateConfig& cfg);

// Evidence assembly for a single entry (exposed for tests and the CLI).
PromptEvidence gather_evidence(const data::CorpusManifest& manifest,
                               const data::CorpusEntry& entry, const AnnotateConfig& cfg);

}  // namespace facemotion::curation
