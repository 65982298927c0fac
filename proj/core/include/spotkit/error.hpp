// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spotkit {

/// Failure categories raised by spotkit operations.
enum class Errc {
  MalformedDocument,
  SchemaViolation,
  UnknownVersion,
  InvalidManifest,
  MissingLabelFile,
  UnparseableGameTime,
  UnknownLegacyLabel,
  FileNotFound,
  CorruptFeatureFile,
  NonFiniteValues,
  DecoderUnavailable,
  DecodeFailure,
  UnsupportedCodec,
  DataError,
  ShapeMismatch,
  AllMasked,
  EmptyHalf,
  InvalidZoneParams,
  NonPositiveTolerance,
  VocabularyMismatch,
  UnknownVideoInPredictions,
  ConfigError,
  CheckpointMismatch,
  InvalidSpec,
  IoError,
  InvalidArgument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spotkit
