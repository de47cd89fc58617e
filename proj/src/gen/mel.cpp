#include "facemotion/gen/mel.hpp"

#include <cmath>

namespace facemotion::gen {

namespace {
constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
}  // namespace

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
        throw ValidationError("fft size must be a power of two");
    }
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * kPi / static_cast<double>(len);
        const double w_re = std::cos(angle);
        const double w_im = std::sin(angle);
        for (size_t i = 0; i < n; i += len) {
            double cur_re = 1.0, cur_im = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const double u_re = re[i + k];
                const double u_im = im[i + k];
                const double v_re = re[i + k + len / 2] * cur_re - im[i + k + len / 2] * cur_im;
                const double v_im = re[i + k + len / 2] * cur_im + im[i + k + len / 2] * cur_re;
                re[i + k] = u_re + v_re;
                im[i + k] = u_im + v_im;
                re[i + k + len / 2] = u_re - v_re;
                im[i + k + len / 2] = u_im - v_im;
                const double next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
        }
    }
}

nn::Mat log_mel_frames(const data::AudioClip& clip, const MelConfig& cfg) {
    if (clip.samples.empty()) {
        throw ValidationError("cannot compute mel features of empty audio");
    }
    const int n_frames =
        std::max<int>(1, static_cast<int>(clip.samples.size() / static_cast<size_t>(cfg.hop)));
    const int n_bins = cfg.fft_size / 2 + 1;

    // triangular filterbank on the mel scale
    std::vector<double> centers(static_cast<size_t>(cfg.bands) + 2);
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(std::min(cfg.fmax, clip.sample_rate / 2.0));
    for (size_t i = 0; i < centers.size(); ++i) {
        const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        static_cast<double>(centers.size() - 1);
        centers[i] = mel_to_hz(mel) / clip.sample_rate * cfg.fft_size;
    }

    std::vector<double> window(static_cast<size_t>(cfg.window));
    for (int i = 0; i < cfg.window; ++i) {
        window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (cfg.window - 1));
    }

    nn::Mat mel(n_frames, cfg.bands);
    std::vector<double> re(static_cast<size_t>(cfg.fft_size));
    std::vector<double> im(static_cast<size_t>(cfg.fft_size));
    for (int f = 0; f < n_frames; ++f) {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        const size_t start = static_cast<size_t>(f) * static_cast<size_t>(cfg.hop);
        for (int i = 0; i < cfg.window; ++i) {
            const size_t idx = start + static_cast<size_t>(i);
            if (idx < clip.samples.size()) {
                re[static_cast<size_t>(i)] = clip.samples[idx] * window[static_cast<size_t>(i)];
            }
        }
        fft_radix2(re, im);
        for (int b = 0; b < cfg.bands; ++b) {
            const double left = centers[static_cast<size_t>(b)];
            const double center = centers[static_cast<size_t>(b) + 1];
            const double right = centers[static_cast<size_t>(b) + 2];
            double acc = 0.0;
            for (int k = 0; k < n_bins; ++k) {
                const double freq = static_cast<double>(k);
                double weight = 0.0;
                if (freq > left && freq < right) {
                    weight = freq <= center ? (freq - left) / std::max(1e-9, center - left)
                                            : (right - freq) / std::max(1e-9, right - center);
                }
                if (weight > 0.0) {
                    acc += weight * (re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                                     im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)]);
                }
            }
            mel(f, b) = std::log(acc + 1e-10);
        }
    }

    // per-clip standardization
    const double mean = mel.mean();
    const double var = (mel.array() - mean).square().mean();
    mel.array() -= mean;
    mel.array() /= std::sqrt(var + 1e-8);
    return mel;
}

}  // namespace facemotion::gen
