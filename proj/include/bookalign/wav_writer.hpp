#pragma once

#include <filesystem>

#include "bookalign/audio.hpp"

namespace bookalign {

/// Writes mono IEEE-float 32-bit WAV. Samples are stored as-is.
void write_wav_float32(const std::filesystem::path& path, const AudioBuffer& audio);

/// Writes mono PCM 16-bit WAV. Samples are clipped to [-1, 1] and scaled by 32767.
void write_wav_pcm16(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace bookalign
