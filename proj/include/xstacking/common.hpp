/*
 * Copyright 2026 The XStacking Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XSTACKING_COMMON_HPP_
#define XSTACKING_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xstacking {

/// Broad failure classes. They map one-to-one onto the C API status codes and
/// the CLI exit codes.
enum class ErrorKind {
  kUsage = 1,
  kData = 2,
  kTraining = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void ThrowUsage(const std::string& msg) {
  throw Error(ErrorKind::kUsage, msg);
}
[[noreturn]] inline void ThrowData(const std::string& msg) {
  throw Error(ErrorKind::kData, msg);
}
[[noreturn]] inline void ThrowTraining(const std::string& msg) {
  throw Error(ErrorKind::kTraining, msg);
}

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;

  /// Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Portable pseudo-random generator. std distributions differ between
/// standard libraries, so every draw used by training goes through here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

std::uint64_t SplitMix64(std::uint64_t x);

/// Combines a seed with a list of integers into a derived seed. Used for per
/// fold, per learner and per instance streams so that results do not depend
/// on scheduling.
std::uint64_t DeriveSeed(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> parts);

/// Number of worker threads used by ParallelFor. Defaults to the hardware
/// concurrency.
void SetNumThreads(int n);
int NumThreads();

/// Runs body(i) for i in [0, n). Nested calls run inline on the calling
/// thread. Exceptions from the body are rethrown on the caller (first one
/// by index wins so the reported error is deterministic).
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

/// Decimal representation with 17 significant digits; round-trips exactly.
std::string FormatDouble(double v);
/// Parses a full decimal token. Returns false if the token is not a number.
bool ParseDouble(std::string_view text, double& out);

std::string Trim(std::string_view s);
std::vector<std::string> Split(std::string_view s, char sep);

}  // namespace xstacking

#endif  // XSTACKING_COMMON_HPP_
