#include "bookalign/snr.hpp"

#include <algorithm>
#include <cmath>

#include "bookalign/errors.hpp"
#include "bookalign/kernels/kernels.hpp"

namespace bookalign {

double compute_snr(const AudioBuffer& voice_stem, const AudioBuffer& accomp_stem,
                   const VoiceSegments& regions) {
  if (voice_stem.samples.size() != accomp_stem.samples.size())
    throw LengthMismatch(std::to_string(voice_stem.samples.size()) + " vs " +
                         std::to_string(accomp_stem.samples.size()) + " samples");
  if (voice_stem.sample_rate != accomp_stem.sample_rate)
    throw SampleRateMismatch(std::to_string(voice_stem.sample_rate) + " vs " +
                             std::to_string(accomp_stem.sample_rate));
  if (regions.segments.empty()) throw EmptyRegions();

  const auto& ops = kernels::active_ops();
  const double sr = voice_stem.sample_rate;
  const size_t n = voice_stem.samples.size();

  double voice_power = 0.0, accomp_power = 0.0;
  for (const TimeSpan& seg : regions.segments) {
    const size_t lo = std::min<size_t>(n, static_cast<size_t>(std::lround(seg.start * sr)));
    const size_t hi = std::min<size_t>(n, static_cast<size_t>(std::lround(seg.end * sr)));
    if (hi <= lo) continue;
    voice_power += ops.sum_squares(voice_stem.samples.data() + lo, hi - lo);
    accomp_power += ops.sum_squares(accomp_stem.samples.data() + lo, hi - lo);
  }

  if (voice_power <= 0.0) return -kSnrCapDb;
  if (accomp_power <= 0.0) return kSnrCapDb;
  return std::clamp(10.0 * std::log10(voice_power / accomp_power), -kSnrCapDb, kSnrCapDb);
}

SnrReport filter_audiobook(double snr_db, double voiced_duration, double threshold_db) {
  if (!std::isfinite(threshold_db)) throw ConfigError("snr threshold must be finite");
  SnrReport report;
  report.snr_db = snr_db;
  report.voiced_duration = voiced_duration;
  report.threshold_db = threshold_db;
  report.pass = snr_db >= threshold_db;
  return report;
}

SnrReport filter_audiobook(const AudioBuffer& voice_stem, const AudioBuffer& accomp_stem,
                           const VoiceSegments& regions, double threshold_db) {
  return filter_audiobook(compute_snr(voice_stem, accomp_stem, regions),
                          regions.total_duration(), threshold_db);
}

}  // namespace bookalign
