#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <string_view>

namespace prime {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  MalformedRecord,
  EmptyStructure,
  MalformedHeader,
  IndexOutOfRange,
  TooFewPoints,
  NoAtoms,
  MissingBackbone,
  BadSegmentation,
  ShapeMismatch,
  NegativeWeight,
  MissingEmbedding,
  DimensionMismatch,
  Divergence,
  NonScalarLoss,
  MissingGrad,
  LabelOutOfRange,
  EmptyLevel,
  NoPositives,
  OneClassOnly,
  ConfigError,
  FormatError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a code, so
// callers (the CLI in particular) can map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace prime
