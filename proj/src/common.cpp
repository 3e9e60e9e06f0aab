#include "windbench/common.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace windbench {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoCompleteRows: return "NoCompleteRows";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::NotFitted: return "NotFitted";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::SequenceTooShort: return "SequenceTooShort";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

bool is_data_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn:
    case ErrorKind::MalformedTimestamp:
    case ErrorKind::EmptyFile:
    case ErrorKind::EmptyInput:
    case ErrorKind::NoCompleteRows:
    case ErrorKind::DegenerateSplit:
    case ErrorKind::Io:
    case ErrorKind::Format:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  const std::uint64_t bound = n;
  // rejection keeps the draw unbiased
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<std::size_t>(v % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace windbench
