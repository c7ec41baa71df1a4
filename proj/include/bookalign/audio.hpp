#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bookalign/types.hpp"

namespace bookalign {

/// Mono PCM audio, samples in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  uint32_t sample_rate = 0;

  double duration() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a RIFF/WAVE file: PCM 16-bit or IEEE float 32-bit, 1-2 channels.
/// Stereo is downmixed by averaging; 16-bit samples are scaled by 1/32768.
/// Throws UnsupportedFormat or CorruptHeader.
AudioBuffer read_wav(const std::filesystem::path& path);

/// dBFS floor reported for silent frames.
inline constexpr double kSilenceFloorDb = -120.0;

/// Per-frame RMS level in dBFS: 20*log10(rms), floored at kSilenceFloorDb.
/// Frame count is floor((N - L) / H) + 1 with no padding.
/// Throws EmptyAudio when the signal is shorter than one frame.
std::vector<double> frame_energy(const AudioBuffer& audio, double frame_len_sec,
                                 double hop_sec);

}  // namespace bookalign
