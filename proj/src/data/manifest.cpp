#include "facemotion/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace facemotion::data {

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw ValidationError("unknown split");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split tag: " + s);
}

void CorpusManifest::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& e : entries) {
        if (e.id.empty() || e.motion_path.empty() || e.annotation_path.empty()) {
            throw ValidationError("manifest entry with empty id or path");
        }
        if (!ids.insert(e.id).second) {
            throw ValidationError("duplicate corpus id: " + e.id);
        }
    }
}

std::vector<const CorpusEntry*> CorpusManifest::split_entries(Split split) const {
    std::vector<const CorpusEntry*> out;
    for (const auto& e : entries) {
        if (e.split == split) {
            out.push_back(&e);
        }
    }
    return out;
}

std::array<size_t, 3> CorpusManifest::split_sizes() const {
    std::array<size_t, 3> sizes{0, 0, 0};
    for (const auto& e : entries) {
        sizes[static_cast<size_t>(e.split)]++;
    }
    return sizes;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
    manifest.validate();
    nlohmann::json j;
    j["config"] = manifest.config_echo;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json je;
        je["id"] = e.id;
        je["motion"] = e.motion_path;
        if (e.audio_path) {
            je["audio"] = *e.audio_path;
        } else {
            je["audio"] = nullptr;
        }
        je["annotation"] = e.annotation_path;
        je["source"] = e.source;
        je["split"] = to_string(e.split);
        arr.push_back(std::move(je));
    }
    j["entries"] = std::move(arr);
    std::ofstream out(path);
    if (!out) {
        throw ContainerFormatError("cannot write manifest: " + path.string());
    }
    out << j.dump(2) << "\n";
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContainerFormatError("cannot read manifest: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("bad manifest JSON: " + std::string(e.what()));
    }
    CorpusManifest manifest;
    manifest.root = path.parent_path();
    if (j.contains("config")) {
        manifest.config_echo = j["config"];
    }
    try {
        for (const auto& je : j.at("entries")) {
            CorpusEntry e;
            e.id = je.at("id").get<std::string>();
            e.motion_path = je.at("motion").get<std::string>();
            if (je.contains("audio") && !je["audio"].is_null()) {
                e.audio_path = je["audio"].get<std::string>();
            }
            e.annotation_path = je.at("annotation").get<std::string>();
            e.source = je.value("source", std::string("unknown"));
            e.split = split_from_string(je.at("split").get<std::string>());
            manifest.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("manifest missing field: " + std::string(e.what()));
    }
    manifest.validate();
    return manifest;
}

std::array<size_t, 3> split_counts(size_t n, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (const double r : ratios) {
        if (r < 0.0) {
            throw SpecError("split ratios must be non-negative");
        }
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw SpecError("split ratios must sum to 1");
    }
    // Largest remainder: floors first, then hand out leftovers by fractional
    // part (ties broken in split order).
    std::array<size_t, 3> counts{};
    std::array<double, 3> fractional{};
    size_t assigned = 0;
    for (size_t i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<size_t>(std::floor(exact + 1e-9));
        fractional[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::array<size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return fractional[a] > fractional[b]; });
    for (size_t i = 0; assigned < n; ++i) {
        counts[order[i % 3]]++;
        assigned++;
    }
    return counts;
}

CorpusManifest split_corpus(const CorpusManifest& manifest, const std::array<double, 3>& ratios,
                            uint64_t seed) {
    const auto counts = split_counts(manifest.entries.size(), ratios);
    std::vector<size_t> order(manifest.entries.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    CorpusManifest out = manifest;
    for (size_t i = 0; i < order.size(); ++i) {
        Split split = Split::test;
        if (i < counts[0]) {
            split = Split::train;
        } else if (i < counts[0] + counts[1]) {
            split = Split::val;
        }
        out.entries[order[i]].split = split;
    }
    return out;
}

}  // namespace facemotion::data
