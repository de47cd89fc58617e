#pragma once

#include "facemotion/data/audio.hpp"
#include "facemotion/nn/tensor.hpp"

namespace facemotion::gen {

// Log-mel filterbank frontend: 80 bands, 25 ms Hann window, 40 ms hop, so the
// frame rate matches the 25 fps motion clock.
struct MelConfig {
    int bands = 80;
    int window = 400;  // samples @ 16 kHz
    int hop = 640;
    int fft_size = 512;
    double fmin = 20.0;
    double fmax = 8000.0;
};

// frames x bands, per-clip standardized. Frame count = floor(samples / hop),
// at least 1; windows past the signal end are zero padded.
nn::Mat log_mel_frames(const data::AudioClip& clip, const MelConfig& cfg = {});

// In-place radix-2 FFT over interleaved (re, im); n must be a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace facemotion::gen
