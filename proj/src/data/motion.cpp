#include "facemotion/data/motion.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

namespace facemotion::data {

namespace {
constexpr char kMagic[4] = {'M', 'M', 'H', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
}  // namespace

void MotionSequence::validate() const {
    if (frames.rows() < 1) {
        throw ValidationError("motion sequence must have at least one frame");
    }
    if (frames.cols() != kParamDim) {
        throw ValidationError("motion sequence must have 56 parameter columns");
    }
    if (fps <= 0) {
        throw ValidationError("fps must be positive");
    }
    if (!frames.allFinite()) {
        throw ValidationError("motion sequence contains non-finite values");
    }
    const float pi = std::numbers::pi_v<float>;
    const auto pose = frames.rightCols(kPoseDim);
    if ((pose.array() < -pi).any() || (pose.array() > pi).any()) {
        throw ValidationError("pose columns must lie within [-pi, pi]");
    }
}

void MotionSequence::validate_for_corpus() const {
    validate();
    if (length() < kMinCorpusFrames || length() > kMaxCorpusFrames) {
        throw ValidationError("corpus sequences must have between 25 and 200 frames");
    }
}

void write_container(const MotionSequence& seq, const std::filesystem::path& path) {
    if (seq.frames.rows() < 1 || seq.frames.cols() != kParamDim) {
        throw ValidationError("refusing to write empty or mis-shaped motion sequence");
    }
    if (!seq.frames.allFinite()) {
        throw ValidationError("refusing to write non-finite motion values");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContainerFormatError("cannot open for writing: " + path.string());
    }
    out.write(kMagic, 4);
    write_u32(out, static_cast<uint32_t>(seq.frames.rows()));
    write_u32(out, static_cast<uint32_t>(kParamDim));
    write_u32(out, static_cast<uint32_t>(seq.fps));
    // row-major frame blob
    std::vector<float> row(kParamDim);
    for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
        for (int c = 0; c < kParamDim; ++c) {
            row[static_cast<size_t>(c)] = seq.frames(t, c);
        }
        out.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * kParamDim);
    }
    if (!out) {
        throw ContainerFormatError("short write: " + path.string());
    }
}

MotionSequence read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContainerFormatError("cannot open for reading: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ContainerFormatError("bad magic in " + path.string());
    }
    const uint32_t t = read_u32(in);
    const uint32_t d = read_u32(in);
    const uint32_t fps = read_u32(in);
    if (!in || d != kParamDim) {
        throw ContainerFormatError("unexpected parameter dimension " + std::to_string(d));
    }
    if (t == 0) {
        throw ValidationError("container holds an empty sequence");
    }
    if (fps == 0) {
        throw ValidationError("container declares fps = 0");
    }
    MotionSequence seq;
    seq.fps = static_cast<int>(fps);
    seq.frames.resize(static_cast<Eigen::Index>(t), kParamDim);
    std::vector<float> row(kParamDim);
    for (uint32_t r = 0; r < t; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * kParamDim);
        if (!in) {
            throw ContainerFormatError("container truncated: " + path.string());
        }
        for (int c = 0; c < kParamDim; ++c) {
            seq.frames(static_cast<Eigen::Index>(r), c) = row[static_cast<size_t>(c)];
        }
    }
    if (!seq.frames.allFinite()) {
        throw ValidationError("container holds non-finite values");
    }
    return seq;
}

}  // namespace facemotion::data
