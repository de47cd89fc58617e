#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "facemotion/data/motion.hpp"

namespace facemotion::data {

inline constexpr int kSampleRate = 16000;

// Mono 16 kHz waveform with values in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = kSampleRate;

    double duration_seconds() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
    void validate() const;
};

// PCM16 mono WAV I/O.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);
AudioClip read_wav(const std::filesystem::path& path);

// RMS amplitude per video-rate frame (40 ms windows at 25 Hz).
Eigen::VectorXf rms_envelope(const AudioClip& clip, int fps = kFps);

// Paired clips must be time-aligned to within one video frame (0.04 s).
void check_aligned(const AudioClip& clip, const MotionSequence& seq);

// Pearson correlation helper used by synthesis checks and tests.
double pearson(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

}  // namespace facemotion::data
