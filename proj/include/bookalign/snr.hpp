#pragma once

#include "bookalign/audio.hpp"
#include "bookalign/types.hpp"

namespace bookalign {

/// Per-audiobook SNR verdict.
struct SnrReport {
  double snr_db = 0.0;
  double voiced_duration = 0.0;  ///< seconds of voiced region the SNR was pooled over
  double threshold_db = 0.0;
  bool pass = false;             ///< snr_db >= threshold_db
};

/// SNR cap applied when one stem carries no power in the voiced regions.
inline constexpr double kSnrCapDb = 100.0;

/// 10*log10(voice power / accompaniment power) pooled over all samples inside
/// the voiced regions, clamped to [-kSnrCapDb, kSnrCapDb]. Zero accompaniment
/// power maps to +cap, zero voice power to -cap.
/// Throws LengthMismatch, SampleRateMismatch or EmptyRegions.
double compute_snr(const AudioBuffer& voice_stem, const AudioBuffer& accomp_stem,
                   const VoiceSegments& regions);

/// Builds the pass/fail report from an already-computed SNR.
SnrReport filter_audiobook(double snr_db, double voiced_duration, double threshold_db);

/// Convenience: compute_snr over the regions, then threshold.
SnrReport filter_audiobook(const AudioBuffer& voice_stem, const AudioBuffer& accomp_stem,
                           const VoiceSegments& regions, double threshold_db);

}  // namespace bookalign
