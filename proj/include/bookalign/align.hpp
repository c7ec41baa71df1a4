#pragma once

#include <cstddef>
#include <vector>

#include "bookalign/posteriors.hpp"
#include "bookalign/types.hpp"

namespace bookalign {

/// Time span and fitting score of one aligned sentence.
struct SentenceAlignment {
  size_t sentence_index = 0;
  TimeSpan span;
  double ctc_score = 0.0;  ///< mean emission log-probability, <= 0
};

struct AlignmentResult {
  std::vector<SentenceAlignment> entries;  ///< ordered by sentence_index
  double avg_score = 0.0;                  ///< arithmetic mean of entry scores
};

struct AlignConfig {
  /// Trellis band half-width around the diagonal, in tokens.
  /// 0 means the full (unbanded) trellis.
  size_t band_width = 0;
};

/// CTC segmentation: finds the best monotone stay/advance path through the
/// concatenated token sequence. The start is free (leading audio is skipped at
/// zero cost); the end is anchored at the last frame. Stay transitions consume
/// max(blank, current token); advance transitions consume the next token.
/// Ties prefer the advance at the latest frame.
/// Throws EmptySentences, TooManyTokens, DiagonalEscape (banded mode) or
/// InfeasibleAlignment.
AlignmentResult align(const PosteriorMatrix& posteriors,
                      const std::vector<TokenizedSentence>& sentences,
                      const AlignConfig& cfg = {});

/// Indices of the min(n, count) highest-scoring sentences, in sentence order.
/// Score ties resolve toward the earlier sentence.
std::vector<size_t> score_sentences(const AlignmentResult& result, size_t n);

}  // namespace bookalign
