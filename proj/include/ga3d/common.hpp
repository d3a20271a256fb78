#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ga3d {

inline constexpr double kPi = std::numbers::pi;

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad external input: missing files, malformed text, unknown keys.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Text parsing failure; message names the offending line.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

/// Invalid run configuration.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// Geometric preconditions violated (nonpositive depth, behind-camera box).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Numeric grid dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle to [-pi, pi). Half-open so every angle has a unique
/// representative.
inline double normalize_angle(double a) {
  double x = std::fmod(a + kPi, 2.0 * kPi);
  if (x < 0) x += 2.0 * kPi;
  return x - kPi;
}

/// Shortest decimal string that round-trips the exact binary64 value.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index must write
/// only to its own output slot; merging stays with the caller so results are
/// independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ga3d
