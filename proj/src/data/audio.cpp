#include "facemotion/data/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace facemotion::data {

void AudioClip::validate() const {
    if (samples.empty()) {
        throw ValidationError("audio clip has no samples");
    }
    if (sample_rate != kSampleRate) {
        throw ValidationError("audio clips must be 16 kHz mono");
    }
    for (const float s : samples) {
        if (!std::isfinite(s) || s < -1.0f || s > 1.0f) {
            throw ValidationError("audio samples must be finite and within [-1, 1]");
        }
    }
}

namespace {
void put_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u16(std::ofstream& out, uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); }

uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint16_t get_u16(std::ifstream& in) {
    uint16_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 2);
    return v;
}
}  // namespace

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
    clip.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContainerFormatError("cannot open for writing: " + path.string());
    }
    const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<uint32_t>(clip.sample_rate * 2));
    put_u16(out, 2);
    put_u16(out, 16);
    out.write("data", 4);
    put_u32(out, data_bytes);
    for (const float s : clip.samples) {
        const float clamped = std::clamp(s, -1.0f, 1.0f);
        const int16_t q = static_cast<int16_t>(std::lround(clamped * 32767.0f));
        out.write(reinterpret_cast<const char*>(&q), 2);
    }
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContainerFormatError("cannot open for reading: " + path.string());
    }
    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) {
        throw ContainerFormatError("not a RIFF file: " + path.string());
    }
    get_u32(in);
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) {
        throw ContainerFormatError("not a WAVE file: " + path.string());
    }
    AudioClip clip;
    uint16_t channels = 0;
    uint16_t bits = 0;
    bool got_fmt = false;
    while (in) {
        in.read(tag, 4);
        if (!in) break;
        const uint32_t size = get_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const uint16_t format = get_u16(in);
            channels = get_u16(in);
            clip.sample_rate = static_cast<int>(get_u32(in));
            get_u32(in);
            get_u16(in);
            bits = get_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            if (format != 1) {
                throw ContainerFormatError("only PCM WAV supported");
            }
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt || channels != 1 || bits != 16) {
                throw ContainerFormatError("expected 16-bit mono PCM");
            }
            const size_t count = size / 2;
            clip.samples.resize(count);
            for (size_t i = 0; i < count; ++i) {
                int16_t q = 0;
                in.read(reinterpret_cast<char*>(&q), 2);
                clip.samples[i] = static_cast<float>(q) / 32767.0f;
            }
            if (!in) {
                throw ContainerFormatError("WAV data truncated");
            }
            return clip;
        } else {
            in.seekg(size, std::ios::cur);
        }
    }
    throw ContainerFormatError("WAV has no data chunk: " + path.string());
}

Eigen::VectorXf rms_envelope(const AudioClip& clip, int fps) {
    const size_t hop = static_cast<size_t>(clip.sample_rate / fps);
    const size_t frames = clip.samples.size() / hop;
    Eigen::VectorXf env(static_cast<Eigen::Index>(frames));
    for (size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (size_t i = f * hop; i < (f + 1) * hop; ++i) {
            acc += static_cast<double>(clip.samples[i]) * clip.samples[i];
        }
        env(static_cast<Eigen::Index>(f)) = static_cast<float>(std::sqrt(acc / hop));
    }
    return env;
}

void check_aligned(const AudioClip& clip, const MotionSequence& seq) {
    const double audio_s = clip.duration_seconds();
    const double motion_s = static_cast<double>(seq.length()) / seq.fps;
    if (std::abs(audio_s - motion_s) > 0.04 + 1e-9) {
        throw ValidationError("audio and motion differ by more than one frame");
    }
}

double pearson(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ValidationError("pearson: need two equal-length vectors");
    }
    const double ma = a.mean();
    const double mb = b.mean();
    double num = 0.0, da = 0.0, db = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double xa = a(i) - ma;
        const double xb = b(i) - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if (da == 0.0 || db == 0.0) {
        return 0.0;
    }
    return num / std::sqrt(da * db);
}

}  // namespace facemotion::data
