#include "lulcseg/error.hpp"

namespace lulcseg {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingHeader: return "MissingHeader";
    case Errc::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::SampleOutOfRange: return "SampleOutOfRange";
    case Errc::IoFailure: return "IoFailure";
    case Errc::BandOutOfRange: return "BandOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TileLargerThanMosaic: return "TileLargerThanMosaic";
    case Errc::EmptyTileSet: return "EmptyTileSet";
    case Errc::InvalidZoomFraction: return "InvalidZoomFraction";
    case Errc::CoverageGap: return "CoverageGap";
    case Errc::DegenerateHistogram: return "DegenerateHistogram";
    case Errc::BitOutOfRange: return "BitOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyOutput: return "EmptyOutput";
    case Errc::TargetOutOfRange: return "TargetOutOfRange";
    case Errc::InvalidOutputStride: return "InvalidOutputStride";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyTrainingSplit: return "EmptyTrainingSplit";
    case Errc::ChannelMismatch: return "ChannelMismatch";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::EmptyReportList: return "EmptyReportList";
    case Errc::WeightSumInvalid: return "WeightSumInvalid";
    case Errc::ConfigParse: return "ConfigParse";
    case Errc::UnknownSubcommand: return "UnknownSubcommand";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NumericFailure: return "NumericFailure";
  }
  return "UnknownError";
}

ErrorClass errc_class(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigParse:
    case Errc::UnknownSubcommand:
    case Errc::InvalidArgument:
    case Errc::InvalidOutputStride:
    case Errc::InvalidZoomFraction:
    case Errc::WidthMismatch:
      return ErrorClass::usage;
    case Errc::NumericFailure:
      return ErrorClass::numeric;
    default:
      return ErrorClass::data;
  }
}

}  // namespace lulcseg
