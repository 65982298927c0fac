// SPDX-License-Identifier: Apache-2.0
#include "spotkit/error.hpp"

namespace spotkit {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::UnknownVersion: return "UnknownVersion";
    case Errc::InvalidManifest: return "InvalidManifest";
    case Errc::MissingLabelFile: return "MissingLabelFile";
    case Errc::UnparseableGameTime: return "UnparseableGameTime";
    case Errc::UnknownLegacyLabel: return "UnknownLegacyLabel";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::CorruptFeatureFile: return "CorruptFeatureFile";
    case Errc::NonFiniteValues: return "NonFiniteValues";
    case Errc::DecoderUnavailable: return "DecoderUnavailable";
    case Errc::DecodeFailure: return "DecodeFailure";
    case Errc::UnsupportedCodec: return "UnsupportedCodec";
    case Errc::DataError: return "DataError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::AllMasked: return "AllMasked";
    case Errc::EmptyHalf: return "EmptyHalf";
    case Errc::InvalidZoneParams: return "InvalidZoneParams";
    case Errc::NonPositiveTolerance: return "NonPositiveTolerance";
    case Errc::VocabularyMismatch: return "VocabularyMismatch";
    case Errc::UnknownVideoInPredictions: return "UnknownVideoInPredictions";
    case Errc::ConfigError: return "ConfigError";
    case Errc::CheckpointMismatch: return "CheckpointMismatch";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace spotkit
