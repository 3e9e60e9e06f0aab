#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace windbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  // data pipeline
  MissingColumn,
  MalformedTimestamp,
  EmptyFile,
  EmptyInput,
  NoCompleteRows,
  DegenerateSplit,
  Io,
  Format,
  // numerics / models
  InvalidArgument,
  ShapeMismatch,
  LengthMismatch,
  Empty,
  ZeroVariance,
  SingularCovariance,
  NotFitted,
  DivergedLoss,
  SequenceTooShort,
  // orchestration
  Usage,
};

std::string_view to_string(ErrorKind kind);

/// True for the kinds the CLI maps onto the "data error" exit code.
bool is_data_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// splitmix64 finalizer; used to turn small structured seeds into well-mixed ones.
std::uint64_t mix_seed(std::uint64_t seed);

/// Seeded generator whose derived draws do not depend on the standard library's
/// distribution implementations, so streams are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace windbench
