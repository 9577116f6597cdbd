#include "essc/error.hpp"

namespace essc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::TruncatedData: return "TruncatedData";
    case ErrorKind::RangeOverflow: return "RangeOverflow";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::FrequencyOutOfRange: return "FrequencyOutOfRange";
    case ErrorKind::SampleRateMismatch: return "SampleRateMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidLatentDim: return "InvalidLatentDim";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NoForwardCache: return "NoForwardCache";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::TooFewItems: return "TooFewItems";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace essc
