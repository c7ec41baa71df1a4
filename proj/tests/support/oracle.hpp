#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "bookalign/posteriors.hpp"

namespace test_support {

struct OraclePath {
  double score = 0.0;             // summed per-frame log-probability
  std::vector<size_t> emissions;  // 0-based frame of each token's advance
};

// Exhaustive reference for the trellis DP: tries every stay/advance schedule
// and keeps the best score, breaking ties toward the latest emission of the
// last token, then the one before it, and so on. Accumulates the path sum in
// the same frame order as the DP so equal paths produce bit-equal doubles.
// Returns nullopt when no schedule fits (more tokens than frames).
std::optional<OraclePath> oracle_align(const bookalign::PosteriorMatrix& m,
                                       const std::vector<uint32_t>& tokens);

// Random log-softmax posterior matrix with the given shape.
bookalign::PosteriorMatrix random_posteriors(std::mt19937_64& rng, size_t frames,
                                             uint32_t vocab, uint32_t blank_index,
                                             double frame_shift);

}  // namespace test_support
