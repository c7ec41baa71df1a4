#pragma once

#include <cstdint>
#include <vector>

namespace bookalign {

/// Half-open-ish time interval in seconds. start == end is allowed (empty span).
struct TimeSpan {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool valid() const { return start >= 0.0 && start <= end; }
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

/// Ordered, non-overlapping voiced intervals produced by VAD.
struct VoiceSegments {
  std::vector<TimeSpan> segments;

  double total_duration() const {
    double d = 0.0;
    for (const auto& s : segments) d += s.length();
    return d;
  }
  /// seg[i].end < seg[i+1].start and every span well formed.
  bool ordered() const {
    for (size_t i = 0; i < segments.size(); ++i) {
      if (!segments[i].valid()) return false;
      if (i + 1 < segments.size() && !(segments[i].end < segments[i + 1].start))
        return false;
    }
    return true;
  }
};

}  // namespace bookalign
