#include "facemotion/gen/text_tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>

namespace facemotion::gen {

namespace {
std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (const char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(c);
        } else {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}
}  // namespace

SubwordVocab SubwordVocab::build(const std::vector<std::string>& texts, size_t max_words) {
    std::map<std::string, int64_t> word_counts;
    std::map<char, int64_t> char_counts;
    for (const auto& text : texts) {
        for (const auto& word : split_words(text)) {
            word_counts[word]++;
            for (const char c : word) {
                char_counts[c]++;
            }
        }
    }

    SubwordVocab vocab;
    vocab.units_.push_back("<unk>");
    for (const auto& [c, count] : char_counts) {
        vocab.units_.push_back(std::string(1, c));
    }
    // frequent words, count-descending with lexicographic tie break
    std::vector<std::pair<std::string, int64_t>> ranked(word_counts.begin(), word_counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [word, count] : ranked) {
        if (vocab.units_.size() >= max_words) break;
        if (word.size() > 1) {
            vocab.units_.push_back(word);
        }
    }
    vocab.rebuild_lookup();
    return vocab;
}

void SubwordVocab::rebuild_lookup() {
    lookup_.clear();
    max_unit_len_ = 1;
    for (size_t i = 0; i < units_.size(); ++i) {
        if (i == 0) continue;  // <unk> is not matchable text
        lookup_.emplace(units_[i], static_cast<int>(i));
        max_unit_len_ = std::max(max_unit_len_, units_[i].size());
    }
}

std::vector<int> SubwordVocab::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& word : split_words(text)) {
        size_t pos = 0;
        while (pos < word.size()) {
            const size_t longest = std::min(max_unit_len_, word.size() - pos);
            int matched = kUnknown;
            size_t matched_len = 1;
            for (size_t len = longest; len >= 1; --len) {
                const auto it = lookup_.find(word.substr(pos, len));
                if (it != lookup_.end()) {
                    matched = it->second;
                    matched_len = len;
                    break;
                }
            }
            ids.push_back(matched);
            pos += matched_len;
        }
    }
    if (ids.empty()) {
        ids.push_back(kUnknown);
    }
    return ids;
}

void SubwordVocab::write(std::ostream& out) const {
    const uint32_t count = static_cast<uint32_t>(units_.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& unit : units_) {
        const uint32_t len = static_cast<uint32_t>(unit.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(unit.data(), len);
    }
}

SubwordVocab SubwordVocab::read(std::istream& in) {
    uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    if (!in || count == 0 || count > (1u << 22)) {
        throw IntegrityError("vocabulary blob malformed");
    }
    SubwordVocab vocab;
    vocab.units_.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        if (!in || len > (1u << 16)) {
            throw IntegrityError("vocabulary blob malformed");
        }
        vocab.units_[i].resize(len);
        in.read(vocab.units_[i].data(), len);
    }
    if (!in) {
        throw IntegrityError("vocabulary blob truncated");
    }
    vocab.rebuild_lookup();
    return vocab;
}

}  // namespace facemotion::gen
