#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace nrep {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Replaces the process-wide sink and returns the previous one. The default
// sink writes Warn and Error to stderr.
LogSink set_log_sink(LogSink sink);

void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view message) { log(LogLevel::Info, message); }
inline void log_warn(std::string_view message) { log(LogLevel::Warn, message); }
inline void log_error(std::string_view message) { log(LogLevel::Error, message); }

// RAII capture of warnings, used by tests and by callers that want to report
// warnings alongside results.
class ScopedLogCapture {
public:
    ScopedLogCapture();
    ~ScopedLogCapture();
    ScopedLogCapture(const ScopedLogCapture&) = delete;
    ScopedLogCapture& operator=(const ScopedLogCapture&) = delete;

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    LogSink previous_;
    std::vector<std::string> warnings_;
};

}  // namespace nrep
