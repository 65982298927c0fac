// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spotkit/dataset_format.hpp"
#include "spotkit/nn/tensor.hpp"

namespace spotkit {

struct Window {
  std::int64_t start = 0;
  std::int64_t pad = 0;  // zero rows appended past the end of the timeline

  friend bool operator==(const Window&, const Window&) = default;
};

/// Windows of `clip_length` starting at 0, stride, 2*stride, ... while the
/// start lies inside the timeline. A stride larger than the clip length is
/// clamped to the clip length so every index stays covered.
std::vector<Window> window_clips(std::int64_t seq_length, std::int64_t clip_length, std::int64_t stride);

/// Window origins (possibly negative) for windows of `clip_length` whose
/// midpoint row is `center`. Centers lie on the grid clip_length/2 + k*stride
/// (any integer k) inside [0, seq_length), so a window starting at row 0 is
/// always among them.
struct CenteredWindow {
  std::int64_t center = 0;
  std::int64_t origin = 0;  // timeline index of window row 0
};
std::vector<CenteredWindow> centered_windows(std::int64_t seq_length, std::int64_t clip_length, std::int64_t stride);

/// An annotation resolved against the class vocabulary.
struct LabeledEvent {
  std::size_t class_index = 0;
  std::int64_t position_ms = 0;
};

std::vector<LabeledEvent> resolve_events(const VideoEntry& entry, const DatasetManifest& manifest);

enum class TargetMode { clip_label, frame_label };

struct ClipTargets {
  TargetMode mode = TargetMode::clip_label;
  std::vector<int> clip_classes;  // [C] event counts, clip_label mode
  nn::Tensor frame_classes;       // [length, C+1] one-hot, column C = background
};

/// Labels the window [start, start+length) of a timeline sampled at rate_hz.
///
/// clip_label: counts the events of each class lying in
/// [start/rate, (start+length)/rate). frame_label: rows within frame_radius of
/// an event's nearest row take its class (nearest event wins, then the lower
/// class index); all other rows are background.
ClipTargets assign_targets(std::int64_t start, std::int64_t length, std::span<const LabeledEvent> events,
                           double rate_hz, TargetMode mode, std::int64_t frame_radius, std::size_t num_classes);

/// Nearest timeline row for a millisecond position.
std::int64_t nearest_row(std::int64_t position_ms, double rate_hz);

}  // namespace spotkit
