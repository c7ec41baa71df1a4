#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bookalign/realign.hpp"
#include "bookalign/refine.hpp"
#include "bookalign/structured_text.hpp"
#include "bookalign/vad.hpp"

namespace bookalign {

/// One audiobook's inputs. Exactly one of posteriors_file / posterior_command
/// is set.
struct AudiobookEntry {
  std::string id;  ///< filename-safe: [A-Za-z0-9_-]+
  std::filesystem::path text;
  std::filesystem::path audio;
  std::filesystem::path voice_stem;
  std::filesystem::path accomp_stem;
  std::filesystem::path posteriors_file;
  std::string posterior_command;  ///< {wav} {start_sec} {end_sec} {out} template
};

struct ReportConfig {
  double snr_bin_db = 20.0;      ///< SNR histogram bin width
  double shift_bin_sec = 0.05;   ///< boundary-shift histogram bin width
};

struct PipelineConfig {
  std::filesystem::path output_dir;
  std::optional<double> snr_threshold_db;  ///< required to run a batch
  double min_avg_ctc_score = -4.0;
  int parallelism = 1;
  bool cut_audio = false;
  ParseRules text_rules;
  VadConfig vad;
  RealignConfig realign;
  RefineConfig refine;
  ReportConfig report;
  std::vector<AudiobookEntry> audiobooks;
};

/// Loads and validates the YAML config; relative paths resolve against the
/// config file's directory. With require_audiobooks false (single-stage
/// tools), audiobooks, output_dir and snr_threshold_db may be absent.
/// Throws ConfigError.
PipelineConfig load_config(const std::filesystem::path& path,
                           bool require_audiobooks = true);

enum class BookStatus { clean, snr_rejected, ctc_rejected, error };
std::string_view to_string(BookStatus status);

/// Everything the pipeline learned about one audiobook.
struct BookOutcome {
  std::string id;
  BookStatus status = BookStatus::error;
  std::optional<double> snr_db;             ///< absent if SNR never computed
  size_t iterations = 0;                    ///< alignment iterations performed
  std::optional<double> avg_ctc_score;      ///< best iteration's average
  std::vector<double> iteration_scores;
  std::vector<BoundaryShift> shifts;
  std::string error;                        ///< message when status == error
};

struct PipelineResult {
  std::vector<BookOutcome> books;  ///< config order
};

/// Runs the batch with a bounded worker pool. Per-book failures become
/// status=error manifest rows and never abort the batch. Writes, under
/// output_dir: manifest.tsv, per-book <id>.yaml (clean only), <id>.scores.tsv
/// and <id>.shifts.tsv (books that reached alignment), optional per-sentence
/// WAV cuts <id>_cNNN_pNNN_sNNN_tNNN.wav, and — for non-empty batches — the
/// three report TSVs.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Writes snr_hist.tsv (bin_low, bin_high, count), ctc_scores.tsv
/// (audiobook_id, iteration, avg_score) and vad_shift_hist.tsv (boundary_kind,
/// bin_low_sec, bin_high_sec, count) into out_dir. Bins are fixed-width,
/// half-open [low, high), keyed at multiples of the width; only non-empty bins
/// are written. Throws NoData when books is empty.
void emit_report(const std::vector<BookOutcome>& books, const ReportConfig& cfg,
                 const std::filesystem::path& out_dir);

/// Rebuilds the report TSVs from an existing output directory's manifest.tsv
/// and per-book TSVs (e.g. to re-bin). Throws NoData when the manifest is
/// missing or empty.
void emit_report_from_dir(const std::filesystem::path& out_dir,
                          const ReportConfig& cfg);

}  // namespace bookalign
