#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facemotion/common.hpp"

namespace facemotion::data {

enum class Split { train, val, test };

std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct CorpusEntry {
    std::string id;
    std::string motion_path;  // relative to the corpus root
    std::optional<std::string> audio_path;
    std::string annotation_path;
    std::string source;  // e.g. "synthetic-lab"
    Split split = Split::train;
};

struct CorpusManifest {
    std::vector<CorpusEntry> entries;
    nlohmann::json config_echo;  // the exact spec/seed that produced the corpus
    std::filesystem::path root;  // directory the relative paths resolve against

    void validate() const;  // unique ids, paths non-empty
    std::vector<const CorpusEntry*> split_entries(Split split) const;
    std::array<size_t, 3> split_sizes() const;
};

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

// Reassigns split tags by a seeded shuffle. Ratios must sum to 1 within 1e-9;
// the partition is exact, with counts chosen by largest remainder.
CorpusManifest split_corpus(const CorpusManifest& manifest, const std::array<double, 3>& ratios,
                            uint64_t seed);

std::array<size_t, 3> split_counts(size_t n, const std::array<double, 3>& ratios);

}  // namespace facemotion::data
