#pragma once

#include <Eigen/Core>
#include <filesystem>

#include "facemotion/common.hpp"

namespace facemotion::data {

// Per-frame parameter layout: 50 expression coefficients followed by a 6-dim
// pose block stored as jaw (x,y,z) then neck (x,y,z) axis-angle components.
inline constexpr int kParamDim = 56;
inline constexpr int kExpressionDim = 50;
inline constexpr int kPoseDim = 6;
inline constexpr int kJawStart = 50;
inline constexpr int kNeckStart = 53;  // the head-pose labeler reads this triple
inline constexpr int kFps = 25;
inline constexpr int kMinCorpusFrames = 25;
inline constexpr int kMaxCorpusFrames = 200;
// Expression channel driven by speech in the synthetic corpus; the audio
// amplitude envelope tracks it by construction.
inline constexpr int kLipChannel = 0;

struct MotionSequence {
    Eigen::MatrixXf frames;  // T x 56, 25 frames per second
    int fps = kFps;

    Eigen::Index length() const { return frames.rows(); }

    // Finite entries, pose columns within [-pi, pi], at least one frame.
    void validate() const;
    // Corpus membership additionally bounds the frame count to [25, 200].
    void validate_for_corpus() const;
};

// Binary container: 16-byte header (magic "MMH1", u32 frame count, u32
// parameter dim = 56, u32 fps) followed by row-major little-endian float32
// frames. Round trips are bit-exact.
void write_container(const MotionSequence& seq, const std::filesystem::path& path);
MotionSequence read_container(const std::filesystem::path& path);

}  // namespace facemotion::data
