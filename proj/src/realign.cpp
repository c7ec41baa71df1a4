#include "bookalign/realign.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>

#include "bookalign/errors.hpp"
#include "bookalign/util.hpp"
#include "parallel.hpp"

namespace bookalign {

// ---------------------------------------------------------------------------
// MatrixSliceProvider

MatrixSliceProvider::MatrixSliceProvider(PosteriorMatrix matrix)
    : matrix_(std::move(matrix)) {
  if (matrix_.frame_shift <= 0.0)
    throw InvariantViolation("slice provider needs a positive frame_shift");
}

double MatrixSliceProvider::total_duration() const { return matrix_.duration(); }

PosteriorMatrix MatrixSliceProvider::posteriors(double start_sec,
                                                double end_sec) const {
  if (!(end_sec > start_sec))
    throw ProviderFailure(start_sec, end_sec, "empty range requested");
  const double fs = matrix_.frame_shift;
  const auto total = static_cast<long long>(matrix_.frames);
  long long f0 = std::llround(start_sec / fs);
  long long f1 = std::llround(end_sec / fs);
  f0 = std::clamp(f0, 0LL, total);
  f1 = std::clamp(f1, f0, total);
  PosteriorMatrix out;
  out.frames = static_cast<size_t>(f1 - f0);
  out.vocab = matrix_.vocab;
  out.blank_index = matrix_.blank_index;
  out.frame_shift = fs;
  out.token_table = matrix_.token_table;
  out.logp.assign(matrix_.logp.begin() + f0 * matrix_.vocab,
                  matrix_.logp.begin() + f1 * matrix_.vocab);
  return out;
}

// ---------------------------------------------------------------------------
// CommandProvider

struct CommandProvider::Impl {
  std::string tmpl;
  std::filesystem::path wav;
  double duration = 0.0;
  unsigned max_parallel = 1;

  mutable std::mutex mu;
  mutable std::condition_variable cv;
  mutable unsigned active = 0;
  mutable std::atomic<uint64_t> serial{0};

  void acquire() const {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return active < max_parallel; });
    ++active;
  }
  void release() const {
    {
      std::lock_guard lock(mu);
      --active;
    }
    cv.notify_one();
  }
};

namespace {

void replace_all(std::string& s, const std::string& key, const std::string& value) {
  for (size_t pos = 0; (pos = s.find(key, pos)) != std::string::npos;
       pos += value.size())
    s.replace(pos, key.size(), value);
}

}  // namespace

CommandProvider::CommandProvider(std::string command_template,
                                 std::filesystem::path wav_path,
                                 double duration_sec, unsigned max_parallel)
    : impl_(std::make_unique<Impl>()) {
  if (command_template.empty()) throw ConfigError("empty provider command");
  if (!(duration_sec > 0.0))
    throw ConfigError("provider duration must be positive");
  impl_->tmpl = std::move(command_template);
  impl_->wav = std::move(wav_path);
  impl_->duration = duration_sec;
  impl_->max_parallel = std::max(1u, max_parallel);
}

CommandProvider::~CommandProvider() = default;

double CommandProvider::total_duration() const { return impl_->duration; }

PosteriorMatrix CommandProvider::posteriors(double start_sec,
                                            double end_sec) const {
  if (!(end_sec > start_sec))
    throw ProviderFailure(start_sec, end_sec, "empty range requested");

  const uint64_t id = impl_->serial.fetch_add(1);
  const auto out_path =
      std::filesystem::temp_directory_path() /
      ("bookalign_" + std::to_string(::getpid()) + "_" + std::to_string(id) +
       ".ctcp");

  std::string cmd = impl_->tmpl;
  replace_all(cmd, "{wav}", impl_->wav.string());
  replace_all(cmd, "{start_sec}", to_compact_string(start_sec));
  replace_all(cmd, "{end_sec}", to_compact_string(end_sec));
  replace_all(cmd, "{out}", out_path.string());

  impl_->acquire();
  const int status = std::system(cmd.c_str());
  impl_->release();

  std::error_code ec;
  if (status == -1) {
    throw ProviderFailure(start_sec, end_sec, "failed to launch: " + cmd);
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::filesystem::remove(out_path, ec);
    throw ProviderFailure(start_sec, end_sec,
                          "command exited with status " + std::to_string(code));
  }
  try {
    PosteriorMatrix m = read_posteriors(out_path);
    std::filesystem::remove(out_path, ec);
    return m;
  } catch (const Error& e) {
    std::filesystem::remove(out_path, ec);
    throw ProviderFailure(start_sec, end_sec, e.what());
  }
}

// ---------------------------------------------------------------------------
// recursive_align

namespace {

/// One stretch of sentences between (or outside) frozen anchors.
struct Chunk {
  size_t first = 0, last = 0;  ///< inclusive sentence range
  double start_sec = 0.0, end_sec = 0.0;
  std::optional<size_t> left_anchor, right_anchor;
};

size_t chunk_tokens(const std::vector<TokenizedSentence>& sentences,
                    const Chunk& c) {
  size_t n = 0;
  for (size_t i = c.first; i <= c.last; ++i) n += sentences[i].token_ids.size();
  return n;
}

/// Picks the bounding anchor whose removal should unblock a too-short chunk:
/// the lower-scoring one when both sides are anchored.
size_t anchor_to_discard(const Chunk& c, const AlignmentResult& prev) {
  if (c.left_anchor && c.right_anchor) {
    const double ls = prev.entries[*c.left_anchor].ctc_score;
    const double rs = prev.entries[*c.right_anchor].ctc_score;
    return ls <= rs ? *c.left_anchor : *c.right_anchor;
  }
  if (c.left_anchor) return *c.left_anchor;
  return *c.right_anchor;
}

std::vector<Chunk> build_chunks(const std::set<size_t>& anchors,
                                const AlignmentResult& prev, size_t n_sentences,
                                double total_duration, double frame_shift,
                                const std::vector<TokenizedSentence>& sentences) {
  std::vector<Chunk> chunks;
  size_t cursor = 0;
  double left_time = 0.0;
  std::optional<size_t> left_anchor;
  auto flush = [&](size_t upto_excl, double right_time,
                   std::optional<size_t> right_anchor) {
    if (cursor >= upto_excl) return;
    Chunk c;
    c.first = cursor;
    c.last = upto_excl - 1;
    c.start_sec = left_time;
    c.end_sec = right_time;
    c.left_anchor = left_anchor;
    c.right_anchor = right_anchor;
    chunks.push_back(c);
  };
  for (size_t a : anchors) {
    flush(a, prev.entries[a].span.start, a);
    left_time = prev.entries[a].span.end;
    left_anchor = a;
    cursor = a + 1;
  }
  flush(n_sentences, total_duration, std::nullopt);

  for (const Chunk& c : chunks) {
    const size_t tokens = chunk_tokens(sentences, c);
    const auto est_frames = static_cast<long long>(
        std::llround((c.end_sec - c.start_sec) / frame_shift));
    if (est_frames < static_cast<long long>(tokens))
      throw ChunkTooShort(anchor_to_discard(c, prev),
                          std::to_string(tokens) + " tokens vs ~" +
                              std::to_string(std::max(0LL, est_frames)) +
                              " frames in [" + to_compact_string(c.start_sec) +
                              ", " + to_compact_string(c.end_sec) + "]");
  }
  return chunks;
}

double mean_score(const AlignmentResult& r) {
  double sum = 0.0;
  for (const auto& e : r.entries) sum += e.ctc_score;
  return sum / static_cast<double>(r.entries.size());
}

}  // namespace

RealignOutcome recursive_align(const PosteriorProvider& provider,
                               const std::vector<TokenizedSentence>& sentences,
                               const RealignConfig& cfg) {
  if (sentences.empty()) throw EmptySentences();
  if (cfg.n_best < 1 || cfg.max_iters < 1 || cfg.min_improvement < 0.0)
    throw ConfigError("realign: need n_best >= 1, max_iters >= 1, "
                      "min_improvement >= 0");

  const double total = provider.total_duration();
  PosteriorMatrix full = provider.posteriors(0.0, total);
  const double fs = full.frame_shift;

  RealignOutcome out;
  AlignmentResult prev = align(full, sentences, cfg.align);
  full.logp.clear();
  full.logp.shrink_to_fit();
  out.iteration_scores.push_back(prev.avg_score);
  out.result = prev;
  out.best_iteration = 0;

  for (int iter = 1; iter < cfg.max_iters; ++iter) {
    std::set<size_t> anchors;
    for (size_t i : score_sentences(prev, static_cast<size_t>(cfg.n_best)))
      anchors.insert(i);
    if (anchors.size() >= sentences.size()) break;  // nothing left to re-align

    // Split at anchor spans and align every chunk against fresh posteriors.
    // A chunk that cannot hold its tokens (either by time estimate or because
    // the provider's slice came up short) discards a bounding anchor and the
    // whole split is retried without it.
    std::vector<Chunk> chunks;
    std::vector<AlignmentResult> chunk_results;
    bool gave_up = false;
    for (;;) {
      try {
        chunks = build_chunks(anchors, prev, sentences.size(), total, fs,
                              sentences);
        chunk_results.assign(chunks.size(), {});
        detail::parallel_for(
            static_cast<unsigned>(std::max(1, cfg.chunk_parallelism)),
            chunks.size(), [&](size_t ci) {
              const Chunk& c = chunks[ci];
              PosteriorMatrix m = provider.posteriors(c.start_sec, c.end_sec);
              if (std::abs(m.frame_shift - fs) > 1e-9)
                throw ProviderFailure(c.start_sec, c.end_sec,
                                      "provider changed frame_shift");
              std::vector<TokenizedSentence> local(
                  sentences.begin() + static_cast<ptrdiff_t>(c.first),
                  sentences.begin() + static_cast<ptrdiff_t>(c.last + 1));
              try {
                chunk_results[ci] = align(m, local, cfg.align);
              } catch (const TooManyTokens&) {
                throw ChunkTooShort(anchor_to_discard(c, prev),
                                    "provider slice shorter than estimate");
              }
            });
        break;
      } catch (const ChunkTooShort& e) {
        anchors.erase(e.anchor_index);
        if (anchors.empty()) {
          gave_up = true;
          break;
        }
      }
    }
    if (gave_up) break;

    // Stitch: anchors keep their frozen spans, chunk entries shift by their
    // chunk's start time and are clamped inside the chunk's window.
    AlignmentResult stitched;
    stitched.entries.resize(sentences.size());
    for (size_t a : anchors) stitched.entries[a] = prev.entries[a];
    for (size_t ci = 0; ci < chunks.size(); ++ci) {
      const Chunk& c = chunks[ci];
      for (const SentenceAlignment& local : chunk_results[ci].entries) {
        SentenceAlignment e = local;
        e.sentence_index = c.first + local.sentence_index;
        e.span.start = std::clamp(e.span.start + c.start_sec, c.start_sec,
                                  c.end_sec);
        e.span.end = std::clamp(e.span.end + c.start_sec, e.span.start,
                                c.end_sec);
        stitched.entries[e.sentence_index] = e;
      }
    }
    stitched.avg_score = mean_score(stitched);

    out.iteration_scores.push_back(stitched.avg_score);
    if (stitched.avg_score > out.result.avg_score) {
      out.result = stitched;
      out.best_iteration = static_cast<size_t>(iter);
    }
    const double improvement = stitched.avg_score - prev.avg_score;
    prev = std::move(stitched);
    if (improvement < cfg.min_improvement) break;
  }
  return out;
}

}  // namespace bookalign
