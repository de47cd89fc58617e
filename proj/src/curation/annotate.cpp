#include "facemotion/curation/annotate.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "facemotion/parallel.hpp"

namespace facemotion::curation {

HttpCompletionClient::HttpCompletionClient() {
    const char* endpoint = std::getenv("FACEMOTION_LLM_ENDPOINT");
    if (endpoint == nullptr) {
        throw ConfigError("FACEMOTION_LLM_ENDPOINT is not set");
    }
    // endpoint format: host:port/path
    std::string s = endpoint;
    const auto slash = s.find('/');
    std::string hostport = slash == std::string::npos ? s : s.substr(0, slash);
    path_ = slash == std::string::npos ? "/v1/complete" : s.substr(slash);
    const auto colon = hostport.find(':');
    host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
    port_ = colon == std::string::npos ? 80 : std::stoi(hostport.substr(colon + 1));
    if (const char* key = std::getenv("FACEMOTION_LLM_API_KEY")) {
        api_key_ = key;
    }
}

HttpCompletionClient::HttpCompletionClient(std::string host, int port, std::string path,
                                           std::string api_key)
    : host_(std::move(host)), port_(port), path_(std::move(path)), api_key_(std::move(api_key)) {}

std::string HttpCompletionClient::complete(const PromptRequest& request) {
    httplib::Client client(host_, port_);
    client.set_read_timeout(30, 0);
    nlohmann::json body;
    body["prompt"] = request.prompt;
    body["kind"] = to_string(request.kind);
    body["max_tokens"] = request.max_tokens;
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw CurationError("completion transport failure");
    }
    if (res->status != 200) {
        throw CurationError("completion HTTP status " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw CurationError("completion response malformed: " + std::string(e.what()));
    }
}

void save_entry_labels(const EntryLabels& labels, const std::filesystem::path& path) {
    nlohmann::json j;
    j["action"] = labels.action;
    j["emotion"] = labels.emotion;
    std::ofstream out(path);
    if (!out) {
        throw ContainerFormatError("cannot write labels: " + path.string());
    }
    out << j.dump() << "\n";
}

EntryLabels load_entry_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContainerFormatError("cannot read labels: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("bad labels JSON: " + std::string(e.what()));
    }
    EntryLabels labels;
    labels.action = j.value("action", std::string());
    labels.emotion = j.value("emotion", std::string());
    return labels;
}

PromptEvidence gather_evidence(const data::CorpusManifest& manifest,
                               const data::CorpusEntry& entry, const AnnotateConfig& cfg) {
    PromptEvidence evidence;
    evidence.entry_id = entry.id;

    const auto labels_path = manifest.root / "labels" / (entry.id + ".json");
    if (std::filesystem::exists(labels_path)) {
        const EntryLabels labels = load_entry_labels(labels_path);
        evidence.action = labels.action;
        evidence.emotion = labels.emotion;
    }

    const data::MotionSequence motion = data::read_container(manifest.root / entry.motion_path);
    evidence.n_frames = static_cast<int>(motion.length());
    evidence.pose_segments =
        summarize_pose_states(label_head_pose(motion, cfg.pose_threshold));

    const auto au_path = manifest.root / "au" / (entry.id + ".json");
    if (std::filesystem::exists(au_path)) {
        evidence.has_au_track = true;
        evidence.au_events =
            summarize_au_events(load_au_track(au_path), cfg.au_threshold, cfg.au_min_duration);
    }
    return evidence;
}

namespace {

// Serializes request starts to honor the politeness interval and caps the
// number of concurrent in-flight completions.
class ClientGate {
public:
    ClientGate(int max_in_flight, double min_interval_s)
        : max_in_flight_(max_in_flight > 0 ? max_in_flight : 1),
          min_interval_(min_interval_s) {}

    std::string call(TextCompletionClient& client, const PromptRequest& request) {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            slots_free_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
            ++in_flight_;
            if (min_interval_ > 0.0) {
                const auto now = std::chrono::steady_clock::now();
                const auto earliest = last_start_ + std::chrono::duration<double>(min_interval_);
                if (now < earliest) {
                    lock.unlock();
                    std::this_thread::sleep_until(earliest);
                    lock.lock();
                }
                last_start_ = std::chrono::steady_clock::now();
            }
        }
        try {
            std::string text = client.complete(request);
            release();
            return text;
        } catch (...) {
            release();
            throw;
        }
    }

private:
    void release() {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
        slots_free_.notify_one();
    }

    int max_in_flight_;
    double min_interval_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable slots_free_;
    std::chrono::steady_clock::time_point last_start_{};
};

}  // namespace

AnnotateOutcome annotate(const data::CorpusManifest& manifest, TextCompletionClient& client,
                         const AnnotateConfig& cfg) {
    manifest.validate();
    AnnotateOutcome outcome;
    const size_t n = manifest.entries.size();
    std::vector<char> ok(n, 0);
    std::vector<size_t> attempts(n, 0);
    ClientGate gate(cfg.max_in_flight, cfg.min_request_interval_s);

    parallel_for(n, cfg.workers, [&](size_t i) {
        const auto& entry = manifest.entries[i];
        const PromptEvidence evidence = gather_evidence(manifest, entry, cfg);
        static const PromptKind kinds[5] = {
            PromptKind::abstract_action, PromptKind::abstract_emotion,
            PromptKind::expression_detail, PromptKind::headpose_detail, PromptKind::scenarios};
        std::array<std::string, 5> answers;
        bool entry_ok = true;
        for (int k = 0; k < 5 && entry_ok; ++k) {
            const PromptRequest request = build_prompt(kinds[k], evidence);
            bool got = false;
            for (int attempt = 0; attempt <= cfg.retries && !got; ++attempt) {
                ++attempts[i];
                try {
                    answers[static_cast<size_t>(k)] = gate.call(client, request);
                    got = true;
                } catch (const std::exception& e) {
                    log_json(2, "annotate_attempt_failed",
                             {{"id", entry.id},
                              {"kind", to_string(kinds[k])},
                              {"attempt", std::to_string(attempt + 1)},
                              {"error", e.what()}});
                }
            }
            entry_ok = got;
        }
        if (!entry_ok) {
            log_json(1, "annotate_entry_failed", {{"id", entry.id}});
            return;
        }
        data::AnnotationBundle bundle;
        bundle.abstract_action = answers[0];
        bundle.abstract_emotion = answers[1];
        bundle.expression_detail = answers[2];
        bundle.headpose_detail = answers[3];
        size_t start = 0;
        for (int s = 0; s < 3; ++s) {
            const size_t nl = answers[4].find('\n', start);
            bundle.scenarios[static_cast<size_t>(s)] =
                answers[4].substr(start, nl == std::string::npos ? std::string::npos : nl - start);
            start = nl == std::string::npos ? answers[4].size() : nl + 1;
        }
        save_annotation(bundle, manifest.root / entry.annotation_path);
        ok[i] = 1;
    });

    for (size_t i = 0; i < n; ++i) {
        outcome.attempts += attempts[i];
        if (ok[i]) {
            ++outcome.annotated;
        } else {
            outcome.unannotated_ids.push_back(manifest.entries[i].id);
        }
    }
    return outcome;
}

}  // namespace facemotion::curation
