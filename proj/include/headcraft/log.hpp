// log.hpp — structured one-line logging to stderr: `ts level module msg`.
#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <string>

namespace headcraft {

enum class LogLevel { debug, info, warn, error };

namespace detail {
inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
inline LogLevel& log_threshold() {
    static LogLevel lvl = LogLevel::info;
    return lvl;
}
}  // namespace detail

inline void set_log_level(LogLevel lvl) { detail::log_threshold() = lvl; }

inline void log_line(LogLevel lvl, const std::string& module, const std::string& msg) {
    if (static_cast<int>(lvl) < static_cast<int>(detail::log_threshold())) return;
    const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
#if defined(_WIN32)
    gmtime_s(&tm, &t);
#else
    gmtime_r(&t, &tm);
#endif
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::lock_guard<std::mutex> lock(detail::log_mutex());
    std::fprintf(stderr, "%s %s %s %s\n", ts, names[static_cast<int>(lvl)], module.c_str(),
                 msg.c_str());
}

inline void log_info(const std::string& module, const std::string& msg) {
    log_line(LogLevel::info, module, msg);
}
inline void log_warn(const std::string& module, const std::string& msg) {
    log_line(LogLevel::warn, module, msg);
}
inline void log_error(const std::string& module, const std::string& msg) {
    log_line(LogLevel::error, module, msg);
}

}  // namespace headcraft
