#include <cstring>
#include "facemotion/harness/checkpoint.hpp"

#include <algorithm>
#include <fstream>

namespace facemotion::harness {

namespace {
constexpr char kMagic[4] = {'F', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ofstream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t get_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

nlohmann::json meta_to_json(const CheckpointMeta& meta) {
    return {
        {"stage", meta.stage}, {"config", meta.config},     {"seed", meta.seed},
        {"step", meta.step},   {"val_loss", meta.val_loss},
    };
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta meta;
    meta.stage = j.at("stage").get<std::string>();
    meta.config = j.at("config");
    meta.seed = j.at("seed").get<uint64_t>();
    meta.step = j.value("step", int64_t{0});
    meta.val_loss = j.value("val_loss", 0.0);
    return meta;
}
}  // namespace

CheckpointStore::CheckpointStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

uint64_t CheckpointStore::config_hash(const CheckpointMeta& meta) {
    nlohmann::json identity = {
        {"stage", meta.stage},
        {"config", meta.config},
        {"seed", meta.seed},
    };
    return fnv1a64(identity.dump());
}

std::filesystem::path CheckpointStore::path_for(const CheckpointMeta& meta) const {
    return dir_ / (meta.stage + "-" + to_hex(config_hash(meta)) + ".fmck");
}

std::filesystem::path CheckpointStore::save(const CheckpointMeta& meta,
                                            const std::string& payload) const {
    const std::filesystem::path path = path_for(meta);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContainerFormatError("cannot write checkpoint: " + path.string());
    }
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, fnv1a64(payload));
    const std::string meta_text = meta_to_json(meta).dump();
    put_u32(out, static_cast<uint32_t>(meta_text.size()));
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    put_u64(out, static_cast<uint64_t>(payload.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw ContainerFormatError("short checkpoint write: " + path.string());
    }
    return path;
}

std::pair<CheckpointMeta, std::string> CheckpointStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IntegrityError("cannot open checkpoint: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IntegrityError("not a checkpoint file: " + path.string());
    }
    const uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw IntegrityError("unsupported checkpoint version");
    }
    const uint64_t expected_hash = get_u64(in);
    const uint32_t meta_len = get_u32(in);
    if (!in || meta_len > (1u << 24)) {
        throw IntegrityError("checkpoint meta malformed");
    }
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), meta_len);
    const uint64_t payload_len = get_u64(in);
    if (!in || payload_len > (1ull << 33)) {
        throw IntegrityError("checkpoint payload header malformed");
    }
    std::string payload(payload_len, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_len));
    if (!in || static_cast<uint64_t>(in.gcount()) != payload_len) {
        throw IntegrityError("checkpoint truncated: " + path.string());
    }
    if (fnv1a64(payload) != expected_hash) {
        throw IntegrityError("checkpoint hash mismatch: " + path.string());
    }
    CheckpointMeta meta;
    try {
        meta = meta_from_json(nlohmann::json::parse(meta_text));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("checkpoint meta unparseable: " + std::string(e.what()));
    }
    return {std::move(meta), std::move(payload)};
}

CheckpointMeta CheckpointStore::peek_meta(const std::filesystem::path& path) {
    return load(path).first;
}

std::vector<std::pair<std::filesystem::path, CheckpointMeta>> CheckpointStore::list() const {
    std::vector<std::pair<std::filesystem::path, CheckpointMeta>> out;
    if (!std::filesystem::exists(dir_)) {
        return out;
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() == ".fmck") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        out.emplace_back(file, peek_meta(file));
    }
    return out;
}

}  // namespace facemotion::harness
