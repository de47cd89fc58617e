#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "facemotion/common.hpp"

namespace facemotion::harness {

struct CheckpointMeta {
    std::string stage;  // "codec", "generator", "retrieval-text", ...
    nlohmann::json config;
    uint64_t seed = 0;
    int64_t step = 0;
    double val_loss = 0.0;
};

// Checkpoints are stored as: magic "FMCK", format version, FNV-1a hash of the
// payload, meta JSON, payload (the model's own serialized bytes). Filenames
// are content-addressed by (stage, config, seed).
class CheckpointStore {
public:
    explicit CheckpointStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    static uint64_t config_hash(const CheckpointMeta& meta);

    std::filesystem::path path_for(const CheckpointMeta& meta) const;
    std::filesystem::path save(const CheckpointMeta& meta, const std::string& payload) const;

    // Verifies the payload hash; throws IntegrityError on mismatch/truncation.
    static std::pair<CheckpointMeta, std::string> load(const std::filesystem::path& path);
    static CheckpointMeta peek_meta(const std::filesystem::path& path);

    std::vector<std::pair<std::filesystem::path, CheckpointMeta>> list() const;

private:
    std::filesystem::path dir_;
};

}  // namespace facemotion::harness
