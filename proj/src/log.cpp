#include "mfg/log.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>

namespace mfg {

namespace {

LogLevel level_from_env() {
    const char* env = std::getenv("MFG_LOG");
    if (env == nullptr) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    return LogLevel::error;
}

std::atomic<int>& level_store() {
    static std::atomic<int> level{static_cast<int>(level_from_env())};
    return level;
}

const char* tag(LogLevel level) {
    switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    }
    return "?";
}

} // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_store().load()); }

void set_log_level(LogLevel level) { level_store().store(static_cast<int>(level)); }

void log_message(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > level_store().load()) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[mfg " << tag(level) << "] " << message << '\n';
}

} // namespace mfg
