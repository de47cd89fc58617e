#include "facemotion/common.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>

namespace facemotion {

std::string to_hex(uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

namespace {
std::atomic<int> g_verbosity{1};
std::mutex g_log_mutex;
}  // namespace

void set_log_verbosity(int level) { g_verbosity.store(level); }
int log_verbosity() { return g_verbosity.load(); }

void log_json(int level, std::string_view event,
              const std::vector<std::pair<std::string, std::string>>& fields) {
    if (level > g_verbosity.load()) {
        return;
    }
    nlohmann::json line;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    line["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    line["event"] = std::string(event);
    for (const auto& [key, value] : fields) {
        line[key] = value;
    }
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::fprintf(stderr, "%s\n", line.dump().c_str());
}

}  // namespace facemotion
