#pragma once

#include <stdexcept>
#include <string>

namespace lulcseg {

// Every failure mode the pipeline can raise. Codes map onto process exit
// classes: usage/config (1), data (2), numeric (3).
enum class Errc {
  // raster-io
  MissingHeader,
  PayloadSizeMismatch,
  UnsupportedDtype,
  SampleOutOfRange,
  IoFailure,
  BandOutOfRange,
  // tiling
  DimensionMismatch,
  TileLargerThanMosaic,
  EmptyTileSet,
  InvalidZoomFraction,
  CoverageGap,
  // cloudmask
  DegenerateHistogram,
  BitOutOfRange,
  // nn
  ShapeMismatch,
  EmptyOutput,
  TargetOutOfRange,
  // segnet
  InvalidOutputStride,
  WidthMismatch,
  ConfigMismatch,
  // trainer
  LabelOutOfRange,
  EmptyTrainingSplit,
  ChannelMismatch,
  // metrics
  EmptyMatrix,
  EmptyReportList,
  WeightSumInvalid,
  // cli / config
  ConfigParse,
  UnknownSubcommand,
  InvalidArgument,
  // numerics
  NumericFailure,
};

enum class ErrorClass : int { usage = 1, data = 2, numeric = 3 };

const char* errc_name(Errc code) noexcept;
ErrorClass errc_class(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return errc_class(code_); }
  int exit_code() const noexcept { return static_cast<int>(error_class()); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, Errc code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace lulcseg
