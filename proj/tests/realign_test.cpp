#include "bookalign/realign.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "bookalign/errors.hpp"
#include "bookalign/fixtures.hpp"
#include "doctest.h"
#include "support/temp_dir.hpp"

using namespace bookalign;
using test_support::TempDir;

namespace {

// 50 frames at 10 ms: sentence "aaaaaa" on rows 0-5 (mass 0.9), "bbb" on rows
// 6-8 (mass 0.6), "aaaaaa" on rows 9-14 (mass 0.9), blank-dominated elsewhere.
PosteriorMatrix hand_matrix() {
  PosteriorMatrix m;
  m.frames = 50;
  m.vocab = 3;
  m.blank_index = 0;
  m.frame_shift = 0.01;
  m.token_table = {"_", "a", "b"};
  m.logp.resize(150);
  const auto set_row = [&](size_t t, double pblank, double pa, double pb) {
    m.logp[t * 3 + 0] = static_cast<float>(std::log(pblank));
    m.logp[t * 3 + 1] = static_cast<float>(std::log(pa));
    m.logp[t * 3 + 2] = static_cast<float>(std::log(pb));
  };
  for (size_t t = 0; t < 50; ++t) set_row(t, 0.9, 0.05, 0.05);
  for (size_t t = 0; t < 6; ++t) set_row(t, 0.05, 0.9, 0.05);
  for (size_t t = 6; t < 9; ++t) set_row(t, 0.2, 0.2, 0.6);
  for (size_t t = 9; t < 15; ++t) set_row(t, 0.05, 0.9, 0.05);
  return m;
}

const std::vector<TokenizedSentence> kHandSentences = {
    {{1, 1, 1, 1, 1, 1}}, {{2, 2, 2}}, {{1, 1, 1, 1, 1, 1}}};

// Exact slices for long ranges, a useless one-frame blank matrix for ranges
// shorter than min_range (models an external model that refuses tiny windows).
class ShortSliceProvider : public PosteriorProvider {
 public:
  ShortSliceProvider(PosteriorMatrix m, double min_range)
      : inner_(std::move(m)), min_range_(min_range) {}

  PosteriorMatrix posteriors(double start_sec, double end_sec) const override {
    if (end_sec - start_sec >= min_range_) return inner_.posteriors(start_sec, end_sec);
    PosteriorMatrix tiny;
    tiny.frames = 1;
    tiny.vocab = inner_.matrix().vocab;
    tiny.blank_index = inner_.matrix().blank_index;
    tiny.frame_shift = inner_.matrix().frame_shift;
    tiny.token_table = inner_.matrix().token_table;
    tiny.logp.assign(inner_.matrix().logp.begin(),
                     inner_.matrix().logp.begin() + tiny.vocab);
    return tiny;
  }
  double total_duration() const override { return inner_.total_duration(); }

 private:
  MatrixSliceProvider inner_;
  double min_range_;
};

// Synthesizes posteriors on demand from a fixed token timeline; ranges longer
// than long_range get a degraded main mass. Mirrors a model that does poorly
// on long windows and well on short ones. The degraded mass stays high (0.8):
// much lower and the free-start DP would rather skip most of the file and
// cram the tokens into the tail than pay the per-frame cost of a full path.
class DegradingProvider : public PosteriorProvider {
 public:
  DegradingProvider(std::vector<TimelineEntry> timeline, size_t frames,
                    std::vector<std::string> table, double fs, double long_range)
      : timeline_(std::move(timeline)),
        frames_(frames),
        table_(std::move(table)),
        fs_(fs),
        long_range_(long_range) {}

  PosteriorMatrix posteriors(double start_sec, double end_sec) const override {
    const auto f0 = static_cast<size_t>(std::max(0LL, std::llround(start_sec / fs_)));
    const auto f1 = std::min<size_t>(
        frames_, static_cast<size_t>(std::max(0LL, std::llround(end_sec / fs_))));
    const double mass = (end_sec - start_sec) > long_range_ ? 0.8 : 0.9;
    return synth_posteriors(clip_timeline(timeline_, f0, f1), f1 - f0, table_, 0, 0.0,
                            0, fs_, mass);
  }
  double total_duration() const override { return static_cast<double>(frames_) * fs_; }

 private:
  std::vector<TimelineEntry> timeline_;
  size_t frames_;
  std::vector<std::string> table_;
  double fs_;
  double long_range_;
};

void check_well_formed(const AlignmentResult& r, size_t n, double duration) {
  REQUIRE(r.entries.size() == n);
  for (size_t i = 0; i < n; ++i) {
    CHECK(r.entries[i].sentence_index == i);
    CHECK(r.entries[i].span.valid());
    CHECK(r.entries[i].span.end <= duration + 1e-9);
    if (i + 1 < n)
      CHECK(r.entries[i].span.end <= r.entries[i + 1].span.start + 1e-9);
  }
}

}  // namespace

TEST_CASE("matrix slices are exact sub-ranges") {
  const auto m = synth_posteriors({{1, 4, 6}, {2, 10, 12}}, 20, {"_", "a", "b"}, 0, 0.4, 3);
  const MatrixSliceProvider p(m);
  CHECK(p.total_duration() == doctest::Approx(0.2));

  const PosteriorMatrix s = p.posteriors(0.05, 0.15);
  CHECK(s.frames == 10);
  CHECK(s.vocab == m.vocab);
  CHECK(s.frame_shift == m.frame_shift);
  CHECK(std::memcmp(s.logp.data(), m.logp.data() + 5 * 3, 10 * 3 * sizeof(float)) == 0);

  // out-of-range requests clamp to the matrix
  const PosteriorMatrix whole = p.posteriors(-1.0, 99.0);
  CHECK(whole.frames == 20);

  CHECK_THROWS_AS(p.posteriors(0.1, 0.1), ProviderFailure);
  CHECK_THROWS_AS(p.posteriors(0.3, 0.1), ProviderFailure);
}

TEST_CASE("a converged alignment stops after one re-check") {
  const SyntheticAudiobook fx = make_synthetic_audiobook(5, 3);
  const MatrixSliceProvider provider(fx.posteriors);
  std::vector<TokenizedSentence> sentences;
  for (const auto& text : fx.sentence_texts)
    sentences.push_back(tokenize(text, fx.token_table, fx.blank_index));

  RealignConfig cfg;
  cfg.n_best = 2;
  const RealignOutcome out = recursive_align(provider, sentences, cfg);

  // noise-free posteriors: the second iteration cannot improve on the first
  REQUIRE(out.iteration_scores.size() == 2);
  CHECK(out.iteration_scores[1] ==
        doctest::Approx(out.iteration_scores[0]).epsilon(1e-12));
  CHECK(out.best_iteration == 0);
  check_well_formed(out.result, 3, provider.total_duration());

  // spans track the generated timeline: tokens emit at their span onsets, so
  // starts are exact (the free start delays only the very first token one
  // frame) and ends sit one frame early
  const double fs = fx.posteriors.frame_shift;
  for (size_t i = 0; i < 3; ++i) {
    CHECK(out.result.entries[i].span.start ==
          doctest::Approx(fx.true_spans[i].start + (i == 0 ? fs : 0.0)).epsilon(1e-9));
    CHECK(out.result.entries[i].span.end ==
          doctest::Approx(fx.true_spans[i].end - fs).epsilon(1e-9));
  }
}

TEST_CASE("anchors covering every sentence skip re-alignment") {
  const SyntheticAudiobook fx = make_synthetic_audiobook(6, 2);
  const MatrixSliceProvider provider(fx.posteriors);
  std::vector<TokenizedSentence> sentences;
  for (const auto& text : fx.sentence_texts)
    sentences.push_back(tokenize(text, fx.token_table, fx.blank_index));

  RealignConfig cfg;
  cfg.n_best = 10;  // more than the sentence count
  const RealignOutcome out = recursive_align(provider, sentences, cfg);
  CHECK(out.iteration_scores.size() == 1);
  CHECK(out.best_iteration == 0);
}

TEST_CASE("a range-degraded model recovers over iterations") {
  // 6 sentences of 5 two-frame tokens, 10-frame lead/gaps/trail: 130 frames
  std::vector<TimelineEntry> timeline;
  std::vector<TokenizedSentence> sentences;
  size_t f = 10;
  for (int s = 0; s < 6; ++s) {
    TokenizedSentence sent;
    for (uint32_t id = 1; id <= 5; ++id) {
      timeline.push_back({id, f, f + 2});
      sent.token_ids.push_back(id);
      f += 2;
    }
    sentences.push_back(sent);
    f += 10;
  }
  const DegradingProvider provider(timeline, 130, {"_", "a", "b", "c", "d", "e"},
                                   0.01, 0.8);

  RealignConfig cfg;
  cfg.n_best = 3;
  cfg.max_iters = 10;
  const RealignOutcome out = recursive_align(provider, sentences, cfg);

  // full range degrades to mass 0.8; chunks run at 0.9: converges in 4 passes
  const double lo = std::log(0.8), hi = std::log(0.9);
  REQUIRE(out.iteration_scores.size() == 4);
  CHECK(out.iteration_scores[0] == doctest::Approx(lo).epsilon(1e-6));
  CHECK(out.iteration_scores[1] == doctest::Approx((lo + hi) / 2).epsilon(1e-6));
  CHECK(out.iteration_scores[2] == doctest::Approx(hi).epsilon(1e-6));
  CHECK(out.iteration_scores[3] == doctest::Approx(hi).epsilon(1e-6));
  for (size_t i = 1; i + 1 < out.iteration_scores.size(); ++i)
    CHECK(out.iteration_scores[i] > out.iteration_scores[i - 1]);
  CHECK(out.best_iteration == 2);
  CHECK(out.result.avg_score == doctest::Approx(hi).epsilon(1e-6));
  check_well_formed(out.result, 6, provider.total_duration());
}

TEST_CASE("chunk parallelism does not change the outcome") {
  std::vector<TimelineEntry> timeline;
  std::vector<TokenizedSentence> sentences;
  size_t f = 10;
  for (int s = 0; s < 6; ++s) {
    TokenizedSentence sent;
    for (uint32_t id = 1; id <= 5; ++id) {
      timeline.push_back({id, f, f + 2});
      sent.token_ids.push_back(id);
      f += 2;
    }
    sentences.push_back(sent);
    f += 10;
  }
  const DegradingProvider provider(timeline, 130, {"_", "a", "b", "c", "d", "e"},
                                   0.01, 0.8);

  RealignConfig serial, parallel;
  serial.n_best = 2;
  parallel.n_best = 2;
  serial.chunk_parallelism = 1;
  parallel.chunk_parallelism = 4;
  const RealignOutcome a = recursive_align(provider, sentences, serial);
  const RealignOutcome b = recursive_align(provider, sentences, parallel);

  CHECK(a.iteration_scores == b.iteration_scores);
  CHECK(a.best_iteration == b.best_iteration);
  REQUIRE(a.result.entries.size() == b.result.entries.size());
  for (size_t i = 0; i < a.result.entries.size(); ++i) {
    CHECK(a.result.entries[i].span == b.result.entries[i].span);
    CHECK(a.result.entries[i].ctc_score == b.result.entries[i].ctc_score);
  }
}

TEST_CASE("a too-short chunk drops an anchor and retries") {
  // middle chunk [0.06, 0.09] falls under the provider's minimum range; the
  // left anchor (tied score) is discarded and the retry succeeds
  const ShortSliceProvider provider(hand_matrix(), 0.05);
  RealignConfig cfg;
  cfg.n_best = 2;
  const RealignOutcome out = recursive_align(provider, kHandSentences, cfg);

  REQUIRE(out.iteration_scores.size() == 2);
  CHECK(out.iteration_scores[1] ==
        doctest::Approx(out.iteration_scores[0]).epsilon(1e-12));
  CHECK(out.best_iteration == 0);
  check_well_formed(out.result, 3, 0.5);
  const double want[3][2] = {{0.0, 0.06}, {0.06, 0.09}, {0.09, 0.15}};
  for (size_t i = 0; i < 3; ++i) {
    CHECK(out.result.entries[i].span.start == doctest::Approx(want[i][0]));
    CHECK(out.result.entries[i].span.end == doctest::Approx(want[i][1]));
  }
  CHECK(out.result.entries[1].ctc_score == doctest::Approx(std::log(0.6)).epsilon(1e-6));
}

TEST_CASE("when every anchor fails the first pass stands") {
  // even the widest retry window is below the provider's minimum range
  const ShortSliceProvider provider(hand_matrix(), 0.2);
  RealignConfig cfg;
  cfg.n_best = 2;
  cfg.max_iters = 8;
  const RealignOutcome out = recursive_align(provider, kHandSentences, cfg);

  CHECK(out.iteration_scores.size() == 1);
  CHECK(out.best_iteration == 0);
  check_well_formed(out.result, 3, 0.5);
  CHECK(out.result.entries[1].span.start == doctest::Approx(0.06));
  CHECK(out.result.entries[1].span.end == doctest::Approx(0.09));
}

TEST_CASE("realign validates its inputs") {
  const MatrixSliceProvider provider(hand_matrix());
  CHECK_THROWS_AS(recursive_align(provider, {}, {}), EmptySentences);

  RealignConfig bad;
  bad.n_best = 0;
  CHECK_THROWS_AS(recursive_align(provider, kHandSentences, bad), ConfigError);
  bad = {};
  bad.max_iters = 0;
  CHECK_THROWS_AS(recursive_align(provider, kHandSentences, bad), ConfigError);
  bad = {};
  bad.min_improvement = -1.0;
  CHECK_THROWS_AS(recursive_align(provider, kHandSentences, bad), ConfigError);
}

#ifdef CTCP_SLICE_BIN

TEST_CASE("the command provider round-trips through the slicing tool") {
  TempDir dir("cmd");
  const auto m = synth_posteriors({{1, 5, 8}, {2, 12, 15}}, 30, {"_", "a", "b"}, 0,
                                  0.3, 17, 0.01);
  write_posteriors(m, dir / "full.ctcp");

  const std::string cmd = std::string(CTCP_SLICE_BIN) + " --in " +
                          (dir / "full.ctcp").string() +
                          " --start {start_sec} --end {end_sec} --out {out}";
  const CommandProvider provider(cmd, dir / "unused.wav", m.duration());
  CHECK(provider.total_duration() == doctest::Approx(0.3));

  const MatrixSliceProvider reference(m);
  for (const auto& [s, e] : {std::pair{0.0, 0.3}, {0.05, 0.21}, {0.1, 0.12}}) {
    const PosteriorMatrix got = provider.posteriors(s, e);
    const PosteriorMatrix want = reference.posteriors(s, e);
    REQUIRE(got.frames == want.frames);
    CHECK(got.frame_shift == want.frame_shift);
    CHECK(got.token_table == want.token_table);
    CHECK(std::memcmp(got.logp.data(), want.logp.data(),
                      want.logp.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("command failures surface as ProviderFailure") {
  const CommandProvider failing("false", "x.wav", 1.0);
  try {
    failing.posteriors(0.25, 0.75);
    FAIL("expected ProviderFailure");
  } catch (const ProviderFailure& e) {
    CHECK(e.range_start == 0.25);
    CHECK(e.range_end == 0.75);
    CHECK(std::string(e.what()).find("status 1") != std::string::npos);
  }

  // command succeeds but writes nothing usable
  const CommandProvider silent("true", "x.wav", 1.0);
  CHECK_THROWS_AS(silent.posteriors(0.0, 1.0), ProviderFailure);
}

#endif  // CTCP_SLICE_BIN
