#pragma once

#include <sstream>
#include <string>

namespace mfusion::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

// Current verbosity. Initialized from the MF_LOG environment variable
// ({error, info, debug}, default info) on first use.
Level level();
void set_level(Level lv);

void write(Level lv, const std::string& msg);

template <typename... Args>
void emit(Level lv, Args&&... args) {
    if (lv > level()) return;
    std::ostringstream os;
    (os << ... << args);
    write(lv, os.str());
}

template <typename... Args>
void error(Args&&... args) {
    emit(Level::Error, std::forward<Args>(args)...);
}
template <typename... Args>
void info(Args&&... args) {
    emit(Level::Info, std::forward<Args>(args)...);
}
template <typename... Args>
void debug(Args&&... args) {
    emit(Level::Debug, std::forward<Args>(args)...);
}

}  // namespace mfusion::log
