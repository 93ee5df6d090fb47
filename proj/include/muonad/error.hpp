#pragma once

#include <concepts>
#include <stdexcept>
#include <string>

namespace muonad {

/// Raised on any contract violation (bad shapes, degenerate inputs, invalid config).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem read/write failures; the CLI maps these to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) {
    throw Error(msg);
  }
}

/// Builds the message only on failure; used on hot paths.
template <std::invocable F>
void require(bool cond, F&& make_msg) {
  if (!cond) {
    throw Error(std::string(make_msg()));
  }
}

}  // namespace muonad
