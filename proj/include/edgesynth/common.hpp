#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace edgesynth {

// Bad user-supplied configuration (flags, config files, out-of-range knobs).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-system / serialization failures; message carries the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant (shape mismatch, geometry mismatch, ...).
struct CheckError : std::logic_error {
  using std::logic_error::logic_error;
};

namespace detail {
[[noreturn]] inline void check_fail(const char* expr, const std::string& msg,
                                    const char* file, int line) {
  std::ostringstream os;
  os << file << ":" << line << ": check failed: " << expr;
  if (!msg.empty()) os << " (" << msg << ")";
  throw CheckError(os.str());
}
}  // namespace detail

#define ES_CHECK(cond, msg)                                              \
  do {                                                                   \
    if (!(cond)) ::edgesynth::detail::check_fail(#cond, (msg), __FILE__, \
                                                 __LINE__);              \
  } while (0)

#define ES_CONFIG_CHECK(cond, msg)                       \
  do {                                                   \
    if (!(cond)) throw ::edgesynth::ConfigError((msg));  \
  } while (0)

}  // namespace edgesynth
