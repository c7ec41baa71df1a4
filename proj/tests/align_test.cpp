#include "bookalign/align.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "bookalign/errors.hpp"
#include "doctest.h"
#include "support/oracle.hpp"

using namespace bookalign;

namespace {

std::vector<TokenizedSentence> one_token_sentences(const std::vector<uint32_t>& tokens) {
  std::vector<TokenizedSentence> s;
  for (uint32_t id : tokens) s.push_back({{id}});
  return s;
}

// Total stay+advance path cost implied by a set of emission frames, summed in
// frame order like the DP.
double path_score_from(const std::vector<size_t>& emissions,
                       const std::vector<uint32_t>& tokens, const PosteriorMatrix& m) {
  double score = 0.0;
  size_t j = 0;
  for (size_t t = 0; t < m.frames; ++t) {
    const auto row = m.row(t);
    if (j < emissions.size() && emissions[j] == t) {
      score += static_cast<double>(row[tokens[j]]);
      ++j;
    } else if (j > 0) {
      score += std::max(static_cast<double>(row[m.blank_index]),
                        static_cast<double>(row[tokens[j - 1]]));
    }
  }
  return score;
}

struct RandomInstance {
  PosteriorMatrix m;
  std::vector<uint32_t> tokens;
};

RandomInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> frames(1, 8);
  std::uniform_int_distribution<uint32_t> vocab(2, 3);
  RandomInstance inst;
  const size_t T = frames(rng);
  const uint32_t V = vocab(rng);
  const uint32_t blank = std::uniform_int_distribution<uint32_t>(0, V - 1)(rng);
  inst.m = test_support::random_posteriors(rng, T, V, blank, 0.01);
  const size_t S = std::uniform_int_distribution<size_t>(1, std::min<size_t>(4, T))(rng);
  for (size_t j = 0; j < S; ++j) {
    uint32_t id;
    do {
      id = std::uniform_int_distribution<uint32_t>(0, V - 1)(rng);
    } while (id == blank);
    inst.tokens.push_back(id);
  }
  return inst;
}

}  // namespace

TEST_CASE("alignment matches exhaustive enumeration on random instances") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto oracle = test_support::oracle_align(inst.m, inst.tokens);
    REQUIRE(oracle.has_value());

    const AlignmentResult got = align(inst.m, one_token_sentences(inst.tokens));
    REQUIRE(got.entries.size() == inst.tokens.size());

    // per-token emissions visible through single-token sentence spans
    std::vector<size_t> emissions;
    for (const auto& e : got.entries) {
      emissions.push_back(
          static_cast<size_t>(std::llround(e.span.start / inst.m.frame_shift)));
      CHECK(e.span.end == doctest::Approx(e.span.start + inst.m.frame_shift));
    }
    CHECK(emissions == oracle->emissions);
    CHECK(std::abs(path_score_from(emissions, inst.tokens, inst.m) - oracle->score) <=
          1e-9);

    // per-sentence score is that token's emission log-probability
    for (size_t j = 0; j < emissions.size(); ++j) {
      const double lp = inst.m.row(oracle->emissions[j])[inst.tokens[j]];
      CHECK(got.entries[j].ctc_score == doctest::Approx(lp).epsilon(1e-12));
    }
  }
}

TEST_CASE("multi-token sentences report span ends and mean scores") {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto oracle = test_support::oracle_align(inst.m, inst.tokens);
    REQUIRE(oracle.has_value());
    const size_t S = inst.tokens.size();

    // split tokens into one or two sentences
    const size_t cut = std::uniform_int_distribution<size_t>(0, S - 1)(rng);
    std::vector<TokenizedSentence> sentences;
    std::vector<std::pair<size_t, size_t>> ranges;  // [first, last] 0-based
    if (cut == 0) {
      sentences.push_back({inst.tokens});
      ranges.emplace_back(0, S - 1);
    } else {
      sentences.push_back({{inst.tokens.begin(), inst.tokens.begin() + cut}});
      sentences.push_back({{inst.tokens.begin() + cut, inst.tokens.end()}});
      ranges.emplace_back(0, cut - 1);
      ranges.emplace_back(cut, S - 1);
    }

    const AlignmentResult got = align(inst.m, sentences);
    REQUIRE(got.entries.size() == sentences.size());
    double mean_acc = 0.0;
    for (size_t s = 0; s < sentences.size(); ++s) {
      const auto [first, last] = ranges[s];
      const auto& entry = got.entries[s];
      CHECK(entry.sentence_index == s);
      CHECK(entry.span.start ==
            doctest::Approx(oracle->emissions[first] * inst.m.frame_shift));
      CHECK(entry.span.end ==
            doctest::Approx((oracle->emissions[last] + 1) * inst.m.frame_shift));
      double acc = 0.0;
      for (size_t j = first; j <= last; ++j)
        acc += static_cast<double>(inst.m.row(oracle->emissions[j])[inst.tokens[j]]);
      CHECK(entry.ctc_score == doctest::Approx(acc / (last - first + 1)).epsilon(1e-12));
      mean_acc += entry.ctc_score;
    }
    CHECK(got.avg_score ==
          doctest::Approx(mean_acc / got.entries.size()).epsilon(1e-12));
  }
}

TEST_CASE("the start is free and ties advance at the latest frame") {
  // blank everywhere except token "a" on frames 7..8
  const auto m = synth_posteriors({{1, 7, 9}}, 10, {"_", "a"}, 0, 0.0);
  const AlignmentResult r = align(m, {{{1}}});
  REQUIRE(r.entries.size() == 1);
  // frames 7 and 8 score identically; the tie goes to frame 8
  CHECK(r.entries[0].span.start == doctest::Approx(0.08));
  CHECK(r.entries[0].span.end == doctest::Approx(0.09));
  CHECK(r.entries[0].ctc_score == doctest::Approx(std::log(0.9)).epsilon(1e-6));
}

TEST_CASE("leading silence costs nothing but trailing silence is walked") {
  // token early, long blank tail: the path must still reach the last frame
  const auto m = synth_posteriors({{1, 1, 3}}, 20, {"_", "a"}, 0, 0.0);
  const AlignmentResult r = align(m, {{{1}}});
  CHECK(r.entries[0].span.start == doctest::Approx(0.02));
  CHECK(r.entries[0].span.end == doctest::Approx(0.03));
}

TEST_CASE("more tokens than frames cannot align") {
  const auto m = synth_posteriors({{1, 0, 4}}, 4, {"_", "a"}, 0, 0.0);
  CHECK_THROWS_AS(align(m, {{{1, 1, 1, 1, 1}}}), TooManyTokens);
}

TEST_CASE("degenerate sentence input is rejected") {
  const auto m = synth_posteriors({{1, 0, 4}}, 4, {"_", "a"}, 0, 0.0);
  CHECK_THROWS_AS(align(m, {}), EmptySentences);
  CHECK_THROWS_AS(align(m, {{{}}}), Error);      // empty token list
  CHECK_THROWS_AS(align(m, {{{0}}}), Error);     // blank as a token
  CHECK_THROWS_AS(align(m, {{{9}}}), Error);     // out of vocabulary
}

TEST_CASE("a wide band reproduces the full trellis") {
  // ten tokens spaced evenly across 40 frames hug the diagonal
  std::vector<TimelineEntry> tl;
  for (uint32_t j = 0; j < 10; ++j)
    tl.push_back({1 + j % 2, size_t{4} * j + 1, size_t{4} * j + 3});
  const auto m = synth_posteriors(tl, 40, {"_", "a", "b"}, 0, 0.2, 9);

  std::vector<TokenizedSentence> sentences;
  for (const auto& e : tl) sentences.push_back({{e.token_id}});

  const AlignmentResult full = align(m, sentences);
  AlignConfig banded;
  banded.band_width = 8;
  const AlignmentResult band = align(m, sentences, banded);
  REQUIRE(band.entries.size() == full.entries.size());
  for (size_t i = 0; i < full.entries.size(); ++i) {
    CHECK(band.entries[i].span == full.entries[i].span);
    CHECK(band.entries[i].ctc_score == full.entries[i].ctc_score);
  }
  CHECK(band.avg_score == full.avg_score);
}

TEST_CASE("paths leaving a narrow band raise DiagonalEscape") {
  // all tokens crammed into the last frames; the diagonal band cannot hold them
  std::vector<TimelineEntry> tl;
  for (uint32_t j = 0; j < 5; ++j) tl.push_back({1, size_t{25} + j, size_t{26} + j});
  const auto m = synth_posteriors(tl, 30, {"_", "a"}, 0, 0.0);
  std::vector<TokenizedSentence> sentences(5, TokenizedSentence{{1}});

  AlignConfig narrow;
  narrow.band_width = 1;
  CHECK_THROWS_AS(align(m, sentences, narrow), DiagonalEscape);
}

TEST_CASE("alignment is invariant to leading blank audio") {
  std::vector<TimelineEntry> tl = {{1, 20, 22}, {2, 25, 27}, {1, 30, 32}};
  const auto m = synth_posteriors(tl, 40, {"_", "a", "b"}, 0, 0.0);
  // drop the first 10 (purely blank) frames
  PosteriorMatrix cut = m;
  cut.frames = 30;
  cut.logp.assign(m.logp.begin() + 10 * 3, m.logp.end());

  std::vector<TokenizedSentence> sentences = {{{1}}, {{2}}, {{1}}};
  const AlignmentResult a = align(m, sentences);
  const AlignmentResult b = align(cut, sentences);
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].span.start ==
          doctest::Approx(b.entries[i].span.start + 0.10).epsilon(1e-12));
    CHECK(a.entries[i].span.end ==
          doctest::Approx(b.entries[i].span.end + 0.10).epsilon(1e-12));
    CHECK(a.entries[i].ctc_score == b.entries[i].ctc_score);
  }
}

TEST_CASE("score_sentences keeps the n best, earliest on ties") {
  AlignmentResult r;
  const double scores[] = {-1.0, -5.0, -0.5, -1.0};
  for (size_t i = 0; i < 4; ++i) {
    SentenceAlignment e;
    e.sentence_index = i;
    e.ctc_score = scores[i];
    r.entries.push_back(e);
  }
  CHECK(score_sentences(r, 2) == std::vector<size_t>{0, 2});
  CHECK(score_sentences(r, 1) == std::vector<size_t>{2});
  CHECK(score_sentences(r, 99) == std::vector<size_t>{0, 1, 2, 3});
  CHECK(score_sentences(r, 0).empty());
}
