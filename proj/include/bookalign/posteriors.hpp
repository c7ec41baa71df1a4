#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bookalign {

/// T x V frame-level log-posteriors from an acoustic model.
/// Entries are <= 0 and rows are approximately normalized
/// (log-sum-exp within [-0.1, 0.01]).
struct PosteriorMatrix {
  std::vector<float> logp;               ///< row-major, frames * tokens
  size_t frames = 0;                     ///< T
  uint32_t vocab = 0;                    ///< V
  uint32_t blank_index = 0;
  double frame_shift = 0.0;              ///< seconds per frame
  std::vector<std::string> token_table;  ///< V token strings

  std::span<const float> row(size_t t) const {
    return {logp.data() + t * vocab, vocab};
  }
  double duration() const { return static_cast<double>(frames) * frame_shift; }
};

/// Token ids of one sentence; never empty, never contains the blank.
struct TokenizedSentence {
  std::vector<uint32_t> token_ids;
};

/// "CTCP" binary format, little-endian:
///   magic "CTCP", version u32=1, T u64, V u32, blank u32, frame_shift f64,
///   V x (length u32 + UTF-8 bytes), T*V f32 row-major.
void write_posteriors(const PosteriorMatrix& m, const std::filesystem::path& path);

/// Bit-exact inverse of write_posteriors. Validates the matrix invariants.
/// Throws BadMagic, VersionUnsupported, TruncatedFile or InvariantViolation.
PosteriorMatrix read_posteriors(const std::filesystem::path& path);

/// Greedy longest-match tokenization of sentence text against the token table,
/// left to right; whitespace is skipped; the blank token never matches.
/// Throws UnknownToken listing every unmatched character with its code-point index.
TokenizedSentence tokenize(const std::string& sentence_text,
                           const std::vector<std::string>& token_table,
                           uint32_t blank_index);

/// One emitted token with its frame span [start_frame, end_frame).
struct TimelineEntry {
  uint32_t token_id = 0;
  size_t start_frame = 0;
  size_t end_frame = 0;
};

/// Synthetic posteriors for a known token timeline: main_mass on the scheduled
/// token inside its span (blank elsewhere), remainder spread uniformly, logits
/// perturbed by Gaussian noise of scale noise_sigma, rows re-normalized exactly.
/// Deterministic for a given seed. Throws BadTimeline.
PosteriorMatrix synth_posteriors(const std::vector<TimelineEntry>& timeline, size_t frames,
                                 const std::vector<std::string>& token_table,
                                 uint32_t blank_index, double noise_sigma,
                                 uint64_t seed = 0, double frame_shift = 0.01,
                                 double main_mass = 0.9);

}  // namespace bookalign
