#include "bookalign/refine.hpp"

#include <algorithm>
#include <cmath>

#include "bookalign/errors.hpp"
#include "bookalign/util.hpp"

namespace bookalign {

namespace {

/// Voice segments within [lo_sec, hi_sec] of the audio, in absolute time.
/// Windows too small to hold a single VAD frame yield no segments.
VoiceSegments window_vad(const AudioBuffer& audio, double lo_sec, double hi_sec,
                         const VadConfig& cfg) {
  const auto sr = static_cast<double>(audio.sample_rate);
  const auto n = static_cast<long long>(audio.samples.size());
  long long s0 = std::llround(lo_sec * sr);
  long long s1 = std::llround(hi_sec * sr);
  s0 = std::clamp(s0, 0LL, n);
  s1 = std::clamp(s1, s0, n);

  AudioBuffer window;
  window.sample_rate = audio.sample_rate;
  window.samples.assign(audio.samples.begin() + s0, audio.samples.begin() + s1);

  VoiceSegments segs;
  try {
    segs = detect_voice(window, cfg);
  } catch (const EmptyAudio&) {
    return {};
  }
  const double offset = static_cast<double>(s0) / sr;
  for (auto& seg : segs.segments) {
    seg.start += offset;
    seg.end += offset;
  }
  return segs;
}

}  // namespace

RefineOutcome refine(const AlignmentResult& alignment, const AudioBuffer& audio,
                     const RefineConfig& cfg) {
  if (!(cfg.margin >= 0.0) || !(cfg.search_window > cfg.margin))
    throw ConfigError("refine: need search_window > margin >= 0");
  if (audio.sample_rate == 0) throw EmptyAudio();

  const double dur = audio.duration();
  const size_t n = alignment.entries.size();
  RefineOutcome out;
  out.result = alignment;
  if (n == 0) return out;

  constexpr double kSlack = 1e-6;  // forgive duration round-off between sources
  for (const auto& e : alignment.entries) {
    if (!(e.span.start >= -kSlack) || !(e.span.end <= dur + kSlack) ||
        !(e.span.end >= e.span.start))
      throw SpanOutOfRange("sentence " + std::to_string(e.sentence_index) +
                           " spans [" + to_compact_string(e.span.start) + ", " +
                           to_compact_string(e.span.end) +
                           "] outside audio of " + to_compact_string(dur) +
                           " s");
  }

  std::vector<double> starts(n), ends(n);
  std::vector<double> orig_starts(n), orig_ends(n);
  out.shifts.resize(n);
  for (size_t i = 0; i < n; ++i) {
    starts[i] = orig_starts[i] = std::clamp(alignment.entries[i].span.start, 0.0, dur);
    ends[i] = orig_ends[i] = std::clamp(alignment.entries[i].span.end, 0.0, dur);
    out.shifts[i].sentence_index = alignment.entries[i].sentence_index;
  }

  // Snap pass: each end moves to a voice-segment edge found near it; the
  // following start then moves to the first voice onset after the new end.
  for (size_t i = 0; i < n; ++i) {
    const double e = ends[i];
    const VoiceSegments segs =
        window_vad(audio, e - cfg.search_window, e + cfg.search_window, cfg.vad);

    double e_new = e;
    bool snapped = false;
    for (const TimeSpan& seg : segs.segments) {
      if (seg.start <= e && e <= seg.end) {  // inside voice: extend to its end
        e_new = seg.end;
        snapped = true;
        break;
      }
      if (seg.end <= e) {  // in silence: fall back to the nearest edge behind
        e_new = seg.end;
        snapped = true;
      }
    }
    ends[i] = e_new;
    out.shifts[i].end_snapped = snapped;

    if (i + 1 < n) {
      for (const TimeSpan& seg : segs.segments) {
        if (seg.start >= e_new) {
          starts[i + 1] = seg.start;
          out.shifts[i + 1].start_snapped = true;
          break;
        }
      }
    }
  }

  // The first start has no preceding end to govern it; snap it by the same
  // principle: inside voice it claims the segment's onset, in silence it moves
  // to the next onset.
  {
    const double s = starts[0];
    const VoiceSegments segs =
        window_vad(audio, s - cfg.search_window, s + cfg.search_window, cfg.vad);
    for (const TimeSpan& seg : segs.segments) {
      if ((seg.start <= s && s <= seg.end) || seg.start > s) {
        starts[0] = seg.start;
        out.shifts[0].start_snapped = true;
        break;
      }
    }
  }

  // Margin pass, with collisions split at the midpoint of the pre-margin gap.
  std::vector<double> pre_starts = starts, pre_ends = ends;
  for (size_t i = 0; i < n; ++i) {
    starts[i] -= cfg.margin;
    ends[i] += cfg.margin;
  }
  for (size_t i = 0; i + 1 < n; ++i) {
    if (ends[i] > starts[i + 1]) {
      const double mid = 0.5 * (pre_ends[i] + pre_starts[i + 1]);
      ends[i] = mid;
      starts[i + 1] = mid;
    }
  }

  // Ordering sweep: 0 <= s_i <= e_i <= s_{i+1} <= ... <= duration.
  double prev = 0.0;
  for (size_t i = 0; i < n; ++i) {
    starts[i] = std::clamp(starts[i], prev, dur);
    ends[i] = std::clamp(ends[i], starts[i], dur);
    prev = ends[i];
  }

  for (size_t i = 0; i < n; ++i) {
    out.result.entries[i].span = {starts[i], ends[i]};
    out.shifts[i].start_shift = starts[i] - orig_starts[i];
    out.shifts[i].end_shift = ends[i] - orig_ends[i];
  }
  return out;
}

}  // namespace bookalign
