#include "bookalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bookalign/errors.hpp"
#include "bookalign/kernels/kernels.hpp"

namespace bookalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Band of trellis row t over token positions [lo, hi]. The full trellis is the
// band [0, S]; otherwise a window of half-width W around the diagonal t*S/T.
struct Band {
  size_t lo, hi;
};

struct BandPlan {
  size_t frames, tokens, half_width;  // half_width 0 = full

  Band row(size_t t) const {
    if (half_width == 0) return {0, tokens};
    const size_t center = static_cast<size_t>(
        std::llround(static_cast<double>(t) * tokens / frames));
    const size_t lo = center > half_width ? center - half_width : 0;
    const size_t hi = std::min(tokens, center + half_width);
    return {lo, hi};
  }
};

}  // namespace

AlignmentResult align(const PosteriorMatrix& m,
                      const std::vector<TokenizedSentence>& sentences,
                      const AlignConfig& cfg) {
  if (sentences.empty()) throw EmptySentences();

  // concatenated token sequence; sentence s covers [first[s], last[s]] 1-based
  std::vector<uint32_t> tokens;
  std::vector<std::pair<size_t, size_t>> sentence_ranges;
  for (size_t s = 0; s < sentences.size(); ++s) {
    const auto& ids = sentences[s].token_ids;
    if (ids.empty())
      throw Error("sentence " + std::to_string(s) + " has no tokens");
    for (uint32_t id : ids) {
      if (id >= m.vocab || id == m.blank_index)
        throw Error("invalid token id " + std::to_string(id) + " in sentence " +
                    std::to_string(s));
    }
    sentence_ranges.emplace_back(tokens.size() + 1, tokens.size() + ids.size());
    tokens.insert(tokens.end(), ids.begin(), ids.end());
  }
  const size_t T = m.frames;
  const size_t S = tokens.size();
  if (S > T) throw TooManyTokens(S, T);

  const BandPlan plan{T, S, cfg.band_width};
  const bool banded = cfg.band_width > 0;

  // packed choice bits (1 = advance) for rows 1..T, fixed stride per row
  const size_t max_band = banded ? 2 * cfg.band_width + 1 : S + 1;
  const size_t stride = (max_band + 63) / 64;
  std::vector<uint64_t> choice_bits(T * stride, 0);

  const auto& ops = kernels::active_ops();
  std::vector<double> kprev(max_band + 1, kNegInf), kcur(max_band + 1, kNegInf);
  std::vector<double> prev_ext(max_band + 2), tok_lp(max_band + 1);
  std::vector<uint8_t> choice_bytes(max_band + 1);

  Band prev_band = plan.row(0);
  kprev.assign(max_band + 1, kNegInf);
  kprev[0] = 0.0;  // k[0][0]; k[0][j>=1] = -inf

  for (size_t t = 1; t <= T; ++t) {
    const Band band = plan.row(t);
    const std::span<const float> row = m.row(t - 1);
    const double blank_lp = row[m.blank_index];

    const size_t jstart = std::max<size_t>(band.lo, 1);
    const size_t count = band.hi >= jstart ? band.hi - jstart + 1 : 0;

    // previous row values over [jstart-1, hi], -inf outside the previous band
    for (size_t j = jstart - 1; j <= band.hi; ++j) {
      prev_ext[j - (jstart - 1)] =
          (j >= prev_band.lo && j <= prev_band.hi) ? kprev[j - prev_band.lo] : kNegInf;
    }
    for (size_t i = 0; i < count; ++i)
      tok_lp[i] = static_cast<double>(row[tokens[jstart + i - 1]]);

    ops.trellis_row(prev_ext.data() + 1, prev_ext.data(), tok_lp.data(), blank_lp,
                    kcur.data() + (jstart - band.lo), choice_bytes.data(), count);
    if (band.lo == 0) kcur[0] = 0.0;  // free start

    uint64_t* bits = choice_bits.data() + (t - 1) * stride;
    std::fill(bits, bits + stride, 0);
    for (size_t i = 0; i < count; ++i)
      if (choice_bytes[i]) bits[i >> 6] |= uint64_t{1} << (i & 63);

    std::swap(kprev, kcur);
    prev_band = band;
  }

  const double path_score = kprev[S - prev_band.lo];
  if (!std::isfinite(path_score)) {
    if (banded) throw DiagonalEscape("no finite path inside the band");
    throw InfeasibleAlignment();
  }

  // backtrack; emission[j] = frame of token j's advance transition (1-based j)
  std::vector<size_t> emission(S + 1, 0);
  size_t t = T, j = S;
  while (j >= 1) {
    if (t == 0) throw InvariantViolation("alignment backtrack exhausted frames");
    const Band band = plan.row(t);
    if ((j == band.lo && band.lo > 0) || (j == band.hi && band.hi < S))
      throw DiagonalEscape("path touched the band edge at frame " + std::to_string(t));
    const size_t jstart = std::max<size_t>(band.lo, 1);
    const uint64_t* bits = choice_bits.data() + (t - 1) * stride;
    const size_t i = j - jstart;
    if (bits[i >> 6] >> (i & 63) & 1) {
      emission[j] = t - 1;
      --j;
    }
    --t;
  }

  AlignmentResult result;
  result.entries.reserve(sentences.size());
  double score_sum = 0.0;
  for (size_t s = 0; s < sentences.size(); ++s) {
    const auto [first, last] = sentence_ranges[s];
    SentenceAlignment entry;
    entry.sentence_index = s;
    entry.span.start = static_cast<double>(emission[first]) * m.frame_shift;
    entry.span.end = static_cast<double>(emission[last] + 1) * m.frame_shift;
    double acc = 0.0;
    for (size_t jj = first; jj <= last; ++jj)
      acc += static_cast<double>(m.row(emission[jj])[tokens[jj - 1]]);
    entry.ctc_score = acc / static_cast<double>(last - first + 1);
    score_sum += entry.ctc_score;
    result.entries.push_back(entry);
  }
  result.avg_score = score_sum / static_cast<double>(result.entries.size());
  return result;
}

std::vector<size_t> score_sentences(const AlignmentResult& result, size_t n) {
  std::vector<size_t> order(result.entries.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (result.entries[a].ctc_score != result.entries[b].ctc_score)
      return result.entries[a].ctc_score > result.entries[b].ctc_score;
    return a < b;
  });
  order.resize(std::min(n, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace bookalign
