#include "nrep/log.hpp"

#include <iostream>
#include <mutex>

namespace nrep {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

void stderr_sink(LogLevel level, std::string_view message) {
    if (level == LogLevel::Warn) {
        std::cerr << "[warn] " << message << '\n';
    } else if (level == LogLevel::Error) {
        std::cerr << "[error] " << message << '\n';
    }
}

LogSink& current_sink() {
    static LogSink sink = stderr_sink;
    return sink;
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
    std::lock_guard lock(sink_mutex());
    LogSink previous = std::move(current_sink());
    current_sink() = sink ? std::move(sink) : LogSink(stderr_sink);
    return previous;
}

void log(LogLevel level, std::string_view message) {
    std::lock_guard lock(sink_mutex());
    current_sink()(level, message);
}

ScopedLogCapture::ScopedLogCapture() {
    previous_ = set_log_sink([this](LogLevel level, std::string_view message) {
        if (level == LogLevel::Warn || level == LogLevel::Error) warnings_.emplace_back(message);
    });
}

ScopedLogCapture::~ScopedLogCapture() { set_log_sink(std::move(previous_)); }

}  // namespace nrep
