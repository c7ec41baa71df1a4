#include "bookalign/wav_writer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bookalign/errors.hpp"

namespace bookalign {

namespace {

void push_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(uint8_t(v));
  b.push_back(uint8_t(v >> 8));
}
void push_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(uint8_t(v));
  b.push_back(uint8_t(v >> 8));
  b.push_back(uint8_t(v >> 16));
  b.push_back(uint8_t(v >> 24));
}
void push_tag(std::vector<uint8_t>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               uint16_t format, uint16_t bits) {
  const uint32_t n = static_cast<uint32_t>(audio.samples.size());
  const uint32_t bytes_per_sample = bits / 8;
  const uint32_t data_size = n * bytes_per_sample;

  std::vector<uint8_t> b;
  b.reserve(44 + data_size);
  push_tag(b, "RIFF");
  push_u32(b, 36 + data_size);
  push_tag(b, "WAVE");
  push_tag(b, "fmt ");
  push_u32(b, 16);
  push_u16(b, format);
  push_u16(b, 1);  // mono
  push_u32(b, audio.sample_rate);
  push_u32(b, audio.sample_rate * bytes_per_sample);
  push_u16(b, static_cast<uint16_t>(bytes_per_sample));
  push_u16(b, bits);
  push_tag(b, "data");
  push_u32(b, data_size);

  for (float s : audio.samples) {
    if (format == 3) {
      uint32_t raw;
      std::memcpy(&raw, &s, 4);
      push_u32(b, raw);
    } else {
      const float clipped = std::clamp(s, -1.0f, 1.0f);
      push_u16(b, static_cast<uint16_t>(
                      static_cast<int16_t>(std::lround(clipped * 32767.0f))));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace

void write_wav_float32(const std::filesystem::path& path, const AudioBuffer& audio) {
  write_wav(path, audio, 3, 32);
}

void write_wav_pcm16(const std::filesystem::path& path, const AudioBuffer& audio) {
  write_wav(path, audio, 1, 16);
}

}  // namespace bookalign
