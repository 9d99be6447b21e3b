#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace termnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when inputs violate an operation's shape or domain contract.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised on file-system and parse failures.
class IoError : public Error {
 public:
  using Error::Error;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double x) { return !std::isfinite(x); }

/// Incremental 64-bit FNV-1a. Stable across platforms, used for fingerprints.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n);
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(double x) { update(&x, sizeof x); }
  void update(std::int64_t x) { update(&x, sizeof x); }
  template <typename T>
  void update_span(const std::vector<T>& v) {
    update(v.data(), v.size() * sizeof(T));
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Shortest round-trip decimal form of a double ("nan" for missing).
std::string format_double(double x);

/// Splits one CSV line on commas. No quoting support; the formats here never need it.
std::vector<std::string_view> split_csv(std::string_view line);

/// Linear-interpolation quantile of an unsorted sample (q in [0,1]).
double quantile(std::vector<double> values, double q);

}  // namespace termnet
