#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rismask {

enum class ErrorCode {
  near_field_violation,
  far_field_violation,
  non_positive_dimension,
  invalid_config,
  sizing,
  dimension_mismatch,
  coincident_points,
  unsupported_order,
  insufficient_measurements,
  empty_mask_set,
  svd_failure,
  zero_solution,
  kind_mismatch,
  empty_set,
  zero_truth,
  malformed_image,
  size_mismatch,
  malformed_volume,
  malformed_file,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::near_field_violation: return "NearFieldViolation";
    case ErrorCode::far_field_violation: return "FarFieldViolation";
    case ErrorCode::non_positive_dimension: return "NonPositiveDimension";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::sizing: return "SizingError";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::coincident_points: return "CoincidentPoints";
    case ErrorCode::unsupported_order: return "UnsupportedOrder";
    case ErrorCode::insufficient_measurements: return "InsufficientMeasurements";
    case ErrorCode::empty_mask_set: return "EmptyMaskSet";
    case ErrorCode::svd_failure: return "SvdFailure";
    case ErrorCode::zero_solution: return "ZeroSolution";
    case ErrorCode::kind_mismatch: return "KindMismatch";
    case ErrorCode::empty_set: return "EmptySet";
    case ErrorCode::zero_truth: return "ZeroTruth";
    case ErrorCode::malformed_image: return "MalformedImage";
    case ErrorCode::size_mismatch: return "SizeMismatch";
    case ErrorCode::malformed_volume: return "MalformedVolume";
    case ErrorCode::malformed_file: return "MalformedFile";
    case ErrorCode::io: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rismask
