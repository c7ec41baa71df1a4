#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bookalign/audio.hpp"
#include "bookalign/posteriors.hpp"
#include "bookalign/structured_text.hpp"
#include "bookalign/types.hpp"

namespace bookalign {

/// Shape of a generated synthetic audiobook. Token/frame arithmetic is exact:
/// frame_shift * sample_rate must be a whole number of samples.
struct FixturePlan {
  double frame_shift = 0.02;        ///< posterior frame shift, seconds
  size_t frames_per_token = 2;
  size_t min_tokens = 115;          ///< per sentence, including the terminal
  size_t max_tokens = 145;
  double lead_sec = 1.0;            ///< silence before the first sentence
  double trail_sec = 1.0;
  double gap_min_sec = 0.6;         ///< silence between sentences
  double gap_max_sec = 1.4;
  double tone_amp = 0.6;
  double spoken_fraction = 0.3;     ///< share of sentences wrapped in 「」
  double noise_sigma = 0.0;         ///< posterior logit noise
  double main_mass = 0.9;           ///< posterior mass on the scheduled token
};

/// Mutually consistent synthetic artifacts: tones where the timeline says a
/// sentence sounds, posteriors that say the same thing, and a structured book
/// whose flattened sentences match the timeline's sentence order.
struct SyntheticAudiobook {
  AudioBuffer audio;
  std::string text;                       ///< raw book text fed to the parser
  StructuredBook book;
  std::vector<std::string> sentence_texts;  ///< reading order
  std::vector<TimeSpan> true_spans;         ///< per sentence, seconds
  std::vector<TimelineEntry> timeline;      ///< per token, frames
  PosteriorMatrix posteriors;
  std::vector<std::string> token_table;     ///< blank "_", 'a'..'z', '.'
  uint32_t blank_index = 0;
};

/// Deterministic generator: same (seed, n_sentences, sample_rate, plan) gives
/// identical artifacts. Sentences are tone bursts of distinct frequencies
/// separated by silence.
SyntheticAudiobook make_synthetic_audiobook(uint64_t seed, size_t n_sentences,
                                            uint32_t sample_rate = 16000,
                                            const FixturePlan& plan = {});

/// Timeline entries overlapping frame range [f0, f1), clipped and rebased so
/// frame f0 becomes 0. Used to synthesize posteriors for audio slices.
std::vector<TimelineEntry> clip_timeline(const std::vector<TimelineEntry>& timeline,
                                         size_t f0, size_t f1);

/// Writes text.txt, audio.wav, voice.wav (= audio), accomp.wav
/// (= accomp_gain * audio) and posteriors.ctcp into dir, creating it.
/// The resulting stem SNR over voiced regions is exactly -20*log10(accomp_gain)
/// (capped at +100 dB when the gain is zero).
void write_fixture_files(const SyntheticAudiobook& fx,
                         const std::filesystem::path& dir, double accomp_gain);

}  // namespace bookalign
