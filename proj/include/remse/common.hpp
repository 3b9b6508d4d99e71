#pragma once

#include <atomic>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace remse {

// Ingestion / configuration problems: the caller gave us something invalid.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures: non-convergence, rank deficiency, degenerate data.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::atomic<bool>& quiet_flag() {
    static std::atomic<bool> q{false};
    return q;
}

inline void set_quiet(bool q) { quiet_flag().store(q); }

inline void warn(const std::string& msg) {
    if (!quiet_flag().load()) std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

}  // namespace remse
