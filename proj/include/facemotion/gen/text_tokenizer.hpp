#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "facemotion/common.hpp"

namespace facemotion::gen {

// Greedy longest-match subword vocabulary: frequent whole words plus all
// single characters seen in training text, so any string tokenizes without
// loss. Shared across the full-text, hierarchical and retrieval text encoders.
class SubwordVocab {
public:
    static SubwordVocab build(const std::vector<std::string>& texts, size_t max_words = 2000);

    std::vector<int> encode(const std::string& text) const;
    int size() const { return static_cast<int>(units_.size()); }
    const std::string& unit(int id) const { return units_[static_cast<size_t>(id)]; }

    void write(std::ostream& out) const;
    static SubwordVocab read(std::istream& in);

private:
    static constexpr int kUnknown = 0;
    std::vector<std::string> units_;  // id -> unit; id 0 is <unk>
    std::unordered_map<std::string, int> lookup_;
    size_t max_unit_len_ = 1;

    void rebuild_lookup();
};

}  // namespace facemotion::gen
