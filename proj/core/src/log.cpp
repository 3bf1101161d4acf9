#include "mfusion/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace mfusion::log {

namespace {

Level parse_env() {
    const char* v = std::getenv("MF_LOG");
    if (v == nullptr) return Level::Info;
    std::string s(v);
    if (s == "error") return Level::Error;
    if (s == "debug") return Level::Debug;
    return Level::Info;
}

Level g_level = parse_env();
std::mutex g_mutex;

const char* tag(Level lv) {
    switch (lv) {
        case Level::Error: return "[error] ";
        case Level::Info: return "[info] ";
        case Level::Debug: return "[debug] ";
    }
    return "";
}

}  // namespace

Level level() { return g_level; }

void set_level(Level lv) { g_level = lv; }

void write(Level lv, const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << tag(lv) << msg << '\n';
}

}  // namespace mfusion::log
