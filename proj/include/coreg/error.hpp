#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coreg {

enum class Errc {
  BadMagic,
  BadHeader,
  ShapeMismatch,
  UnsupportedDtype,
  IoFailure,
  MissingFile,
  ValueOutOfRange,
  ZeroDimension,
  IndexOutOfRange,
  EmptyPromptSet,
  TooManySegments,
  EmptyDataset,
  MissingGroundTruth,
  SpecInvalid,
  InvalidConfig,
  UnknownClass,
  Internal,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadHeader: return "BadHeader";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::IoFailure: return "IoFailure";
    case Errc::MissingFile: return "MissingFile";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptyPromptSet: return "EmptyPromptSet";
    case Errc::TooManySegments: return "TooManySegments";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::SpecInvalid: return "SpecInvalid";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::Internal: return "Internal";
  }
  return "Unknown";
}

/// Typed failure raised by every stage of the engine. The code is stable and
/// is what callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix, for re-raising with added context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace coreg
