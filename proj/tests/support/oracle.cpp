#include "oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace test_support {

namespace {

// b beats a: higher score, or equal score with later emissions compared from
// the last token backward.
bool better(const OraclePath& b, const OraclePath& a) {
  if (b.score != a.score) return b.score > a.score;
  const size_t n = b.emissions.size();
  for (size_t k = n; k-- > 0;) {
    if (b.emissions[k] != a.emissions[k]) return b.emissions[k] > a.emissions[k];
  }
  return false;
}

}  // namespace

std::optional<OraclePath> oracle_align(const bookalign::PosteriorMatrix& m,
                                       const std::vector<uint32_t>& tokens) {
  const size_t T = m.frames;
  const size_t S = tokens.size();
  if (S > T) return std::nullopt;
  if (T > 24) throw std::invalid_argument("oracle_align: too many frames to enumerate");

  std::optional<OraclePath> best;
  OraclePath cand;
  cand.emissions.resize(S);
  for (uint64_t mask = 0; mask < (uint64_t{1} << T); ++mask) {
    if (static_cast<size_t>(std::popcount(mask)) != S) continue;
    double score = 0.0;
    size_t j = 0;  // tokens consumed so far
    for (size_t t = 0; t < T; ++t) {
      const auto row = m.row(t);
      if (mask >> t & 1) {
        score += static_cast<double>(row[tokens[j]]);
        cand.emissions[j] = t;
        ++j;
      } else if (j > 0) {
        score += std::max(static_cast<double>(row[m.blank_index]),
                          static_cast<double>(row[tokens[j - 1]]));
      }  // j == 0: leading skip is free
    }
    cand.score = score;
    if (!best || better(cand, *best)) best = cand;
  }
  return best;
}

bookalign::PosteriorMatrix random_posteriors(std::mt19937_64& rng, size_t frames,
                                             uint32_t vocab, uint32_t blank_index,
                                             double frame_shift) {
  bookalign::PosteriorMatrix m;
  m.frames = frames;
  m.vocab = vocab;
  m.blank_index = blank_index;
  m.frame_shift = frame_shift;
  m.token_table.resize(vocab);
  for (uint32_t i = 0; i < vocab; ++i) {
    if (i == blank_index)
      m.token_table[i] = "_";
    else
      m.token_table[i] = std::string(1, static_cast<char>('a' + (i < blank_index ? i : i - 1)));
  }
  m.logp.resize(frames * vocab);
  std::uniform_real_distribution<double> logits(-3.0, 3.0);
  std::vector<double> row(vocab);
  for (size_t t = 0; t < frames; ++t) {
    double hi = -1e300;
    for (uint32_t v = 0; v < vocab; ++v) {
      row[v] = logits(rng);
      hi = std::max(hi, row[v]);
    }
    double sum = 0.0;
    for (uint32_t v = 0; v < vocab; ++v) sum += std::exp(row[v] - hi);
    const double lse = hi + std::log(sum);
    for (uint32_t v = 0; v < vocab; ++v)
      m.logp[t * vocab + v] = static_cast<float>(row[v] - lse);
  }
  return m;
}

}  // namespace test_support
