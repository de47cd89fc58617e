#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "facemotion/common.hpp"

namespace facemotion::data {

// The five hierarchical text fields attached to every motion.
struct AnnotationBundle {
    std::string abstract_action;
    std::string abstract_emotion;
    std::string expression_detail;
    std::string headpose_detail;
    std::array<std::string, 3> scenarios;

    void validate() const;  // all five fields non-empty, exactly 3 scenarios
    std::string full_text() const;  // all fields concatenated, in order
};

void save_annotation(const AnnotationBundle& bundle, const std::filesystem::path& path);
AnnotationBundle load_annotation(const std::filesystem::path& path);

}  // namespace facemotion::data
