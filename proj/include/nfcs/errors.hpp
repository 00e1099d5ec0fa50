#pragma once

#include <stdexcept>
#include <string>

namespace nfcs {

// Exit-code families used by the command-line tool.
enum class ErrorCategory {
  kConfig = 2,
  kMissingArtifact = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define NFCS_DEFINE_ERROR(Name, Category)                          \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what)                         \
        : Error(ErrorCategory::Category, #Name ": " + what) {}     \
  }

NFCS_DEFINE_ERROR(DimensionMismatch, kNumerical);
NFCS_DEFINE_ERROR(NonConvergence, kNumerical);
NFCS_DEFINE_ERROR(DegenerateGeometry, kNumerical);
NFCS_DEFINE_ERROR(InvalidAngle, kNumerical);
NFCS_DEFINE_ERROR(ZeroColumn, kNumerical);
NFCS_DEFINE_ERROR(ZeroSignal, kNumerical);
NFCS_DEFINE_ERROR(SingularRefit, kNumerical);
NFCS_DEFINE_ERROR(TapeMismatch, kNumerical);
NFCS_DEFINE_ERROR(ZeroReference, kNumerical);
NFCS_DEFINE_ERROR(MissingCheckpoint, kMissingArtifact);
NFCS_DEFINE_ERROR(MissingArtifact, kMissingArtifact);
NFCS_DEFINE_ERROR(ConfigError, kConfig);
NFCS_DEFINE_ERROR(FormatError, kConfig);

#undef NFCS_DEFINE_ERROR

}  // namespace nfcs
