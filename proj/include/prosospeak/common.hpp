#pragma once

#include <stdexcept>
#include <string>

namespace prosospeak {

/// Error type thrown by every operation in the library. The message is
/// human-readable and stable enough to match on in tests.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace prosospeak
