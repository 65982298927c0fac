// SPDX-License-Identifier: Apache-2.0
#include "spotkit/clips.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spotkit/error.hpp"

namespace spotkit {

std::vector<Window> window_clips(std::int64_t seq_length, std::int64_t clip_length, std::int64_t stride) {
  if (clip_length < 1 || stride < 1) throw Error(Errc::InvalidArgument, "clip_length and stride must be >= 1");
  stride = std::min(stride, clip_length);
  std::vector<Window> out;
  for (std::int64_t start = 0; start < seq_length; start += stride) {
    out.push_back({start, std::max<std::int64_t>(0, start + clip_length - seq_length)});
  }
  return out;
}

std::vector<CenteredWindow> centered_windows(std::int64_t seq_length, std::int64_t clip_length, std::int64_t stride) {
  if (clip_length < 1 || stride < 1) throw Error(Errc::InvalidArgument, "clip_length and stride must be >= 1");
  std::vector<CenteredWindow> out;
  const std::int64_t half = clip_length / 2;
  for (std::int64_t c = half % stride; c < seq_length; c += stride) out.push_back({c, c - half});
  return out;
}

std::vector<LabeledEvent> resolve_events(const VideoEntry& entry, const DatasetManifest& manifest) {
  std::vector<LabeledEvent> events;
  events.reserve(entry.annotations.size());
  for (const auto& a : entry.annotations) {
    auto idx = manifest.class_index(a.label);
    if (!idx) throw Error(Errc::DataError, "video '" + entry.id() + "': unknown label '" + a.label + "'");
    events.push_back({*idx, a.position_ms});
  }
  return events;
}

std::int64_t nearest_row(std::int64_t position_ms, double rate_hz) {
  return std::llround(static_cast<double>(position_ms) * rate_hz / 1000.0);
}

ClipTargets assign_targets(std::int64_t start, std::int64_t length, std::span<const LabeledEvent> events,
                           double rate_hz, TargetMode mode, std::int64_t frame_radius, std::size_t num_classes) {
  if (!(rate_hz > 0.0) || frame_radius < 0 || length < 1) {
    throw Error(Errc::InvalidArgument, "assign_targets: invalid rate, radius or length");
  }
  ClipTargets targets;
  targets.mode = mode;
  const auto c = static_cast<std::int64_t>(num_classes);

  if (mode == TargetMode::clip_label) {
    targets.clip_classes.assign(num_classes, 0);
    // Compare in scaled milliseconds: start/rate s <= pos < (start+length)/rate s.
    const double lo = static_cast<double>(start) * 1000.0;
    const double hi = static_cast<double>(start + length) * 1000.0;
    for (const auto& e : events) {
      const double scaled = static_cast<double>(e.position_ms) * rate_hz;
      if (scaled >= lo && scaled < hi && e.class_index < num_classes) targets.clip_classes[e.class_index] += 1;
    }
    return targets;
  }

  targets.frame_classes = nn::Tensor({length, c + 1}, 0.0);
  for (std::int64_t i = 0; i < length; ++i) {
    const auto row = start + i;
    double best_distance = std::numeric_limits<double>::infinity();
    std::int64_t best_class = c;  // background
    for (const auto& e : events) {
      if (e.class_index >= num_classes) continue;
      const auto center = nearest_row(e.position_ms, rate_hz);
      if (std::abs(row - center) > frame_radius) continue;
      const double distance = std::abs(static_cast<double>(row) - static_cast<double>(e.position_ms) * rate_hz / 1000.0);
      const auto cls = static_cast<std::int64_t>(e.class_index);
      if (distance < best_distance || (distance == best_distance && cls < best_class)) {
        best_distance = distance;
        best_class = cls;
      }
    }
    targets.frame_classes(i, best_class) = 1.0;
  }
  return targets;
}

}  // namespace spotkit
