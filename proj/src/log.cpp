#include "rekey/log.hpp"

#include <iostream>
#include <mutex>

namespace rekey::log {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

Sink& current_sink() {
    static Sink sink;
    return sink;
}

Level& current_level() {
    static Level lvl = Level::info;
    return lvl;
}

std::string_view level_name(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        case Level::off: break;
    }
    return "off";
}

}  // namespace

void set_sink(Sink sink) {
    std::lock_guard lock(sink_mutex());
    current_sink() = std::move(sink);
}

void set_level(Level level) {
    std::lock_guard lock(sink_mutex());
    current_level() = level;
}

Level level() {
    std::lock_guard lock(sink_mutex());
    return current_level();
}

void write(Level lvl, std::string_view message) {
    std::lock_guard lock(sink_mutex());
    if (lvl < current_level() || lvl == Level::off) return;
    if (current_sink()) {
        current_sink()(lvl, message);
        return;
    }
    std::cerr << '[' << level_name(lvl) << "] " << message << '\n';
}

}  // namespace rekey::log
