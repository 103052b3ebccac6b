#pragma once

#include <stdexcept>
#include <string>

namespace udm {

/// Error conditions raised by the library. Loading and configuration
/// problems are user errors; the rest indicate broken invariants.
enum class errc {
  malformed_row,
  dimension_mismatch,
  duplicate_instance_id,
  malformed_line,
  invalid_utf8,
  too_few_objects,
  non_positive_variance,
  empty_training_set,
  non_finite_loss,
  degenerate_dimension,
  empty_class,
  no_negatives_available,
  corpus_too_small,
  zero_vector,
  insufficient_test_instances,
  missing_category_manifest,
  unknown_category,
  fraction_too_small,
  io_error,
  invalid_config,
};

inline const char* to_string(errc code) noexcept {
  switch (code) {
    case errc::malformed_row: return "MalformedRow";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::duplicate_instance_id: return "DuplicateInstanceId";
    case errc::malformed_line: return "MalformedLine";
    case errc::invalid_utf8: return "InvalidUtf8";
    case errc::too_few_objects: return "TooFewObjects";
    case errc::non_positive_variance: return "NonPositiveVariance";
    case errc::empty_training_set: return "EmptyTrainingSet";
    case errc::non_finite_loss: return "NonFiniteLoss";
    case errc::degenerate_dimension: return "DegenerateDimension";
    case errc::empty_class: return "EmptyClass";
    case errc::no_negatives_available: return "NoNegativesAvailable";
    case errc::corpus_too_small: return "CorpusTooSmall";
    case errc::zero_vector: return "ZeroVector";
    case errc::insufficient_test_instances: return "InsufficientTestInstances";
    case errc::missing_category_manifest: return "MissingCategoryManifest";
    case errc::unknown_category: return "UnknownCategory";
    case errc::fraction_too_small: return "FractionTooSmall";
    case errc::io_error: return "IoError";
    case errc::invalid_config: return "InvalidConfig";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  errc code() const noexcept { return code_; }

  /// True for conditions caused by user input (bad files, bad flags)
  /// rather than an internal failure. Drives CLI exit codes.
  bool is_user_error() const noexcept {
    switch (code_) {
      case errc::non_finite_loss:
        return false;
      default:
        return true;
    }
  }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace udm
