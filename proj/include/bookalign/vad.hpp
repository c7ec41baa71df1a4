#pragma once

#include "bookalign/audio.hpp"
#include "bookalign/types.hpp"

namespace bookalign {

/// Energy-threshold VAD parameters.
struct VadConfig {
  double frame_len = 0.03;     ///< seconds
  double hop = 0.01;           ///< seconds, hop <= frame_len
  double threshold_db = -40;   ///< dBFS; a frame is voiced iff energy >= threshold
  double min_voice = 0.10;     ///< runs shorter than this are discarded
  double min_silence = 0.20;   ///< hangover: gaps shorter than this are bridged
};

/// Classifies frames by RMS energy, bridges sub-min_silence gaps, drops
/// sub-min_voice runs. Segment start is the first voiced frame's start time,
/// segment end the last voiced frame's start plus frame_len.
/// Throws EmptyAudio when the signal is shorter than one frame.
VoiceSegments detect_voice(const AudioBuffer& audio, const VadConfig& cfg);

}  // namespace bookalign
