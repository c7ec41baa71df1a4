#pragma once

#include <cstddef>
#include <vector>

#include "bookalign/align.hpp"
#include "bookalign/audio.hpp"
#include "bookalign/vad.hpp"

namespace bookalign {

struct RefineConfig {
  VadConfig vad;
  double search_window = 1.0;  ///< seconds scanned either side of a sentence end
  double margin = 0.05;        ///< seconds added outside each snapped boundary
};

/// Movement of one sentence's boundaries, refined minus original, in seconds.
/// A boundary is "snapped" when a voice-segment edge governed its placement;
/// unsnapped boundaries (no voice found in the window) keep their CTC timing.
struct BoundaryShift {
  size_t sentence_index = 0;
  double start_shift = 0.0;
  double end_shift = 0.0;
  bool start_snapped = false;
  bool end_snapped = false;
};

struct RefineOutcome {
  AlignmentResult result;             ///< scores unchanged, spans refined
  std::vector<BoundaryShift> shifts;  ///< one per sentence, in order
};

/// Snaps each sentence end to the neighboring voice-segment edge found by VAD
/// in a window around it, pulls the next start to the first voice onset after
/// the new end, applies the margin outward, and resolves margin collisions at
/// the midpoint of the pre-margin gap. Refined spans stay ordered,
/// non-overlapping and inside [0, duration].
/// Throws SpanOutOfRange if the alignment does not fit the audio.
RefineOutcome refine(const AlignmentResult& alignment, const AudioBuffer& audio,
                     const RefineConfig& cfg = {});

}  // namespace bookalign
