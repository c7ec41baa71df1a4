#include "bookalign/vad.hpp"

#include <cmath>

#include "bookalign/errors.hpp"

namespace bookalign {

VoiceSegments detect_voice(const AudioBuffer& audio, const VadConfig& cfg) {
  const std::vector<double> energy = frame_energy(audio, cfg.frame_len, cfg.hop);
  const double sr = audio.sample_rate;
  const size_t frame_len = static_cast<size_t>(std::lround(cfg.frame_len * sr));
  const size_t hop =
      std::max<size_t>(1, static_cast<size_t>(std::lround(cfg.hop * sr)));

  // voiced frame runs, in frame indices [first, last]
  struct Run {
    size_t first, last;
  };
  std::vector<Run> runs;
  for (size_t i = 0; i < energy.size(); ++i) {
    if (energy[i] < cfg.threshold_db) continue;
    if (!runs.empty() && runs.back().last + 1 == i)
      runs.back().last = i;
    else
      runs.push_back({i, i});
  }

  const auto start_sec = [&](const Run& r) { return r.first * hop / sr; };
  const auto end_sec = [&](const Run& r) { return (r.last * hop + frame_len) / sr; };

  // hangover: merge runs whose silent gap is below min_silence. The gap is
  // measured between segment times, so overlapping frames always merge.
  std::vector<Run> merged;
  for (const Run& r : runs) {
    if (!merged.empty() && start_sec(r) - end_sec(merged.back()) < cfg.min_silence)
      merged.back().last = r.last;
    else
      merged.push_back(r);
  }

  VoiceSegments out;
  for (const Run& r : merged) {
    const TimeSpan span{start_sec(r), end_sec(r)};
    if (span.length() >= cfg.min_voice) out.segments.push_back(span);
  }
  return out;
}

}  // namespace bookalign
