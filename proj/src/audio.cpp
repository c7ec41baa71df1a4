#include "bookalign/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "bookalign/errors.hpp"
#include "bookalign/kernels/kernels.hpp"

namespace bookalign {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptHeader("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw CorruptHeader("missing RIFF/WAVE header");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t chunk_size = read_u32(&bytes[pos + 4]);
    const bool is_fmt = std::memcmp(&bytes[pos], "fmt ", 4) == 0;
    const bool is_data = std::memcmp(&bytes[pos], "data", 4) == 0;
    pos += 8;
    if (chunk_size > bytes.size() - pos)
      throw CorruptHeader("chunk extends past end of file");
    if (is_fmt) {
      if (chunk_size < 16) throw CorruptHeader("fmt chunk too small");
      format = read_u16(&bytes[pos]);
      channels = read_u16(&bytes[pos + 2]);
      sample_rate = read_u32(&bytes[pos + 4]);
      bits = read_u16(&bytes[pos + 14]);
      have_fmt = true;
    } else if (is_data) {
      data = &bytes[pos];
      data_size = chunk_size;
    }
    pos += chunk_size + (chunk_size & 1);  // chunks are word aligned
  }
  if (!have_fmt) throw CorruptHeader("missing fmt chunk");
  if (!data) throw CorruptHeader("missing data chunk");
  if (sample_rate == 0) throw CorruptHeader("zero sample rate");

  if (format != kFormatPcm && format != kFormatIeeeFloat)
    throw UnsupportedFormat("format code " + std::to_string(format));
  if (channels < 1 || channels > 2)
    throw UnsupportedFormat(std::to_string(channels) + " channels");
  if (format == kFormatPcm && bits != 16)
    throw UnsupportedFormat("PCM " + std::to_string(bits) + "-bit");
  if (format == kFormatIeeeFloat && bits != 32)
    throw UnsupportedFormat("float " + std::to_string(bits) + "-bit");

  const size_t bytes_per_sample = bits / 8;
  const size_t frame_bytes = bytes_per_sample * channels;
  if (data_size % frame_bytes != 0)
    throw CorruptHeader("data size not a multiple of the frame size");
  const size_t n_frames = data_size / frame_bytes;

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n_frames);
  for (size_t i = 0; i < n_frames; ++i) {
    float acc = 0.0f;
    for (size_t c = 0; c < channels; ++c) {
      const uint8_t* p = data + i * frame_bytes + c * bytes_per_sample;
      if (format == kFormatPcm) {
        const int16_t v = static_cast<int16_t>(read_u16(p));
        acc += static_cast<float>(v) / 32768.0f;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      }
    }
    out.samples[i] = acc / static_cast<float>(channels);
  }
  return out;
}

std::vector<double> frame_energy(const AudioBuffer& audio, double frame_len_sec,
                                 double hop_sec) {
  if (audio.sample_rate == 0) throw EmptyAudio("no sample rate");
  const size_t frame_len =
      static_cast<size_t>(std::lround(frame_len_sec * audio.sample_rate));
  const size_t hop =
      std::max<size_t>(1, static_cast<size_t>(std::lround(hop_sec * audio.sample_rate)));
  if (frame_len < 1) throw EmptyAudio("frame shorter than one sample");
  if (audio.samples.size() < frame_len) throw EmptyAudio();

  const size_t n_frames = (audio.samples.size() - frame_len) / hop + 1;
  const auto& ops = kernels::active_ops();
  std::vector<double> db(n_frames);
  for (size_t i = 0; i < n_frames; ++i) {
    const double ss = ops.sum_squares(audio.samples.data() + i * hop, frame_len);
    const double rms = std::sqrt(ss / static_cast<double>(frame_len));
    db[i] = rms > 0.0 ? std::max(kSilenceFloorDb, 20.0 * std::log10(rms))
                      : kSilenceFloorDb;
  }
  return db;
}

}  // namespace bookalign
