#include "facemotion/data/annotation.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace facemotion::data {

void AnnotationBundle::validate() const {
    if (abstract_action.empty() || abstract_emotion.empty() || expression_detail.empty() ||
        headpose_detail.empty()) {
        throw ValidationError("annotation bundle has an empty field");
    }
    for (const auto& s : scenarios) {
        if (s.empty()) {
            throw ValidationError("annotation bundle needs exactly 3 non-empty scenarios");
        }
    }
}

std::string AnnotationBundle::full_text() const {
    std::string text = abstract_action;
    for (const std::string* part :
         {&abstract_emotion, &expression_detail, &headpose_detail}) {
        text += " ";
        text += *part;
    }
    for (const auto& s : scenarios) {
        text += " ";
        text += s;
    }
    return text;
}

void save_annotation(const AnnotationBundle& bundle, const std::filesystem::path& path) {
    bundle.validate();
    nlohmann::json j;
    j["abstract_action"] = bundle.abstract_action;
    j["abstract_emotion"] = bundle.abstract_emotion;
    j["expression_detail"] = bundle.expression_detail;
    j["headpose_detail"] = bundle.headpose_detail;
    j["scenarios"] = bundle.scenarios;
    std::ofstream out(path);
    if (!out) {
        throw ContainerFormatError("cannot write annotation: " + path.string());
    }
    out << j.dump(2) << "\n";
}

AnnotationBundle load_annotation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ContainerFormatError("cannot read annotation: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("bad annotation JSON: " + std::string(e.what()));
    }
    AnnotationBundle bundle;
    try {
        bundle.abstract_action = j.at("abstract_action").get<std::string>();
        bundle.abstract_emotion = j.at("abstract_emotion").get<std::string>();
        bundle.expression_detail = j.at("expression_detail").get<std::string>();
        bundle.headpose_detail = j.at("headpose_detail").get<std::string>();
        const auto arr = j.at("scenarios");
        if (!arr.is_array() || arr.size() != 3) {
            throw ValidationError("scenarios must be a 3-element array");
        }
        for (size_t i = 0; i < 3; ++i) {
            bundle.scenarios[i] = arr[i].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContainerFormatError("annotation missing field: " + std::string(e.what()));
    }
    bundle.validate();
    return bundle;
}

}  // namespace facemotion::data
