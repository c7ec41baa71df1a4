#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bookalign/align.hpp"
#include "bookalign/posteriors.hpp"

namespace bookalign {

/// Source of posteriors for an audio time range. frame_shift and token table
/// must be stable across calls; the returned frame count matches the requested
/// range within one frame. Implementations must be safe to call concurrently.
class PosteriorProvider {
 public:
  virtual ~PosteriorProvider() = default;
  virtual PosteriorMatrix posteriors(double start_sec, double end_sec) const = 0;
  virtual double total_duration() const = 0;
};

/// Slices a single precomputed matrix. Deterministic; used by tests and
/// matrix-only workflows.
class MatrixSliceProvider : public PosteriorProvider {
 public:
  explicit MatrixSliceProvider(PosteriorMatrix matrix);
  PosteriorMatrix posteriors(double start_sec, double end_sec) const override;
  double total_duration() const override;
  const PosteriorMatrix& matrix() const { return matrix_; }

 private:
  PosteriorMatrix matrix_;
};

/// Runs an external command that writes a CTCP file for a WAV time range.
/// The template may contain {wav}, {start_sec}, {end_sec} and {out}
/// placeholders. Non-zero exit raises ProviderFailure.
class CommandProvider : public PosteriorProvider {
 public:
  CommandProvider(std::string command_template, std::filesystem::path wav_path,
                  double duration_sec, unsigned max_parallel = 1);
  ~CommandProvider() override;
  PosteriorMatrix posteriors(double start_sec, double end_sec) const override;
  double total_duration() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RealignConfig {
  int n_best = 5;                 ///< anchor sentences per iteration
  int max_iters = 10;             ///< total alignment iterations, including the first
  double min_improvement = 1e-4;  ///< stop when the avg score gains less than this
  int chunk_parallelism = 1;      ///< concurrent chunk alignments within an iteration
  AlignConfig align;
};

struct RealignOutcome {
  AlignmentResult result;                ///< best iteration's result
  std::vector<double> iteration_scores;  ///< avg score per iteration, in order
  size_t best_iteration = 0;
};

/// Iteration 0 aligns the full range. Each later iteration freezes the spans
/// of the n_best-scoring sentences as delimiters, re-aligns every inter-anchor
/// chunk against fresh posteriors for the chunk's range, and stitches the
/// results. Stops when the average score stops improving or max_iters is
/// reached; returns the best iteration seen.
RealignOutcome recursive_align(const PosteriorProvider& provider,
                               const std::vector<TokenizedSentence>& sentences,
                               const RealignConfig& cfg = {});

}  // namespace bookalign
