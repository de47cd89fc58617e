#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace facemotion {

// All library failures carry a machine-readable category so the CLI can map
// them to exit codes and structured log lines.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}
    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

#define FACEMOTION_DEFINE_ERROR(Name, category_literal)              \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& message)                    \
            : Error(category_literal, message) {}                    \
    }

FACEMOTION_DEFINE_ERROR(ContainerFormatError, "container-format");
FACEMOTION_DEFINE_ERROR(ValidationError, "validation");
FACEMOTION_DEFINE_ERROR(SpecError, "spec");
FACEMOTION_DEFINE_ERROR(CurationError, "curation");
FACEMOTION_DEFINE_ERROR(CodecError, "codec");
FACEMOTION_DEFINE_ERROR(GeneratorError, "generator");
FACEMOTION_DEFINE_ERROR(EvalError, "eval");
FACEMOTION_DEFINE_ERROR(TrainingError, "training");
FACEMOTION_DEFINE_ERROR(IntegrityError, "integrity");
FACEMOTION_DEFINE_ERROR(ConfigError, "config");

#undef FACEMOTION_DEFINE_ERROR

// Deterministic RNG. mt19937_64 output is pinned by the standard, and the
// float/normal mappings below avoid the implementation-defined distributions
// in <random>, so identical seeds reproduce identical streams everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
    }

    // Box-Muller, cached second value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = u01();
        } while (u1 <= 1e-300);
        const double u2 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        cached_ = r * std::sin(two_pi * u2);
        has_cached_ = true;
        return r * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[below(items.size())];
    }

    // Derive an independent stream, e.g. per corpus entry.
    Rng fork(uint64_t salt) {
        return Rng(u64() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
    }

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// FNV-1a, used for config hashing and checkpoint integrity checks.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (const char c : bytes) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(uint64_t value);

// Line-delimited JSON logging to stderr. Levels: 0 quiet, 1 info, 2 debug.
void set_log_verbosity(int level);
int log_verbosity();
void log_json(int level, std::string_view event,
              const std::vector<std::pair<std::string, std::string>>& fields = {});

}  // namespace facemotion
