#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "bookalign/errors.hpp"
#include "bookalign/pipeline.hpp"
#include "bookalign/posteriors.hpp"
#include "bookalign/refine.hpp"
#include "bookalign/snr.hpp"
#include "bookalign/structured_text.hpp"
#include "bookalign/util.hpp"

namespace {

using namespace bookalign;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

PipelineConfig stage_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  return load_config(config_path, /*require_audiobooks=*/false);
}

double parse_num(const std::string& s, const char* what) {
  double v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(std::string("bad ") + what + " '" + s + "'");
  return v;
}

std::string alignment_tsv(const AlignmentResult& result) {
  std::string out = "sentence_index\tstart\tend\tscore\n";
  for (const SentenceAlignment& e : result.entries)
    out += std::to_string(e.sentence_index) + "\t" +
           to_compact_string(e.span.start) + "\t" + to_compact_string(e.span.end) +
           "\t" + to_compact_string(e.ctc_score) + "\n";
  return out;
}

AlignmentResult parse_alignment_tsv(const std::string& content) {
  AlignmentResult result;
  double sum = 0.0;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with("sentence_index")) continue;
    std::istringstream row(line);
    std::string idx, start, end, score;
    if (!std::getline(row, idx, '\t') || !std::getline(row, start, '\t') ||
        !std::getline(row, end, '\t') || !std::getline(row, score, '\t'))
      throw Error("alignment row needs 4 tab-separated columns: '" + line + "'");
    SentenceAlignment e;
    e.sentence_index = static_cast<size_t>(parse_num(idx, "sentence_index"));
    e.span.start = parse_num(start, "start");
    e.span.end = parse_num(end, "end");
    e.ctc_score = parse_num(score, "score");
    sum += e.ctc_score;
    result.entries.push_back(e);
  }
  if (result.entries.empty()) throw Error("alignment file has no rows");
  result.avg_score = sum / static_cast<double>(result.entries.size());
  return result;
}

std::vector<TokenizedSentence> tokenized_sentences(const StructuredBook& book,
                                                   const PosteriorMatrix& m) {
  std::vector<TokenizedSentence> sentences;
  for (const SentencePath& at : flatten(book))
    sentences.push_back(tokenize(book.chapters[at.chapter]
                                     .paragraphs[at.paragraph]
                                     .styles[at.style]
                                     .sentences[at.sentence]
                                     .text,
                                 m.token_table, m.blank_index));
  return sentences;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Builds sentence-aligned audiobook corpora from text, audio and "
               "CTC posteriors"};
  app.require_subcommand(1);

  std::string config_path, in_path, out_path, text_path, audio_path;
  std::string voice_path, accomp_path, posteriors_path, alignment_path,
      shifts_path;
  std::optional<double> threshold, margin, search_window;
  std::optional<int> parallelism;
  std::optional<double> snr_bin, shift_bin;
  bool cut_audio = false;

  auto* parse_cmd =
      app.add_subcommand("parse-text", "Structure raw book text as corpus YAML");
  parse_cmd->add_option("--config", config_path, "pipeline config for text rules");
  parse_cmd->add_option("--in", in_path, "input UTF-8 text file")->required();
  parse_cmd->add_option("--out", out_path, "output YAML path (default stdout)");

  auto* snr_cmd =
      app.add_subcommand("snr", "Stem SNR over VAD voice regions, with verdict");
  snr_cmd->add_option("--config", config_path, "pipeline config for VAD/threshold");
  snr_cmd->add_option("--voice", voice_path, "voice stem WAV")->required();
  snr_cmd->add_option("--accomp", accomp_path, "accompaniment stem WAV")->required();
  snr_cmd->add_option("--threshold", threshold, "pass threshold in dB");

  auto* align_cmd = app.add_subcommand(
      "align", "Recursive CTC alignment of text against a posterior file");
  align_cmd->add_option("--config", config_path, "pipeline config for realign");
  align_cmd->add_option("--posteriors", posteriors_path, "CTCP posterior file")
      ->required();
  align_cmd->add_option("--text", text_path, "input UTF-8 text file")->required();
  align_cmd->add_option("--out", out_path, "alignment TSV path (default stdout)");

  auto* refine_cmd = app.add_subcommand(
      "refine", "VAD refinement of an alignment TSV against the audio");
  refine_cmd->add_option("--config", config_path, "pipeline config for refine");
  refine_cmd->add_option("--alignment", alignment_path, "alignment TSV")
      ->required();
  refine_cmd->add_option("--audio", audio_path, "audio WAV")->required();
  refine_cmd->add_option("--out", out_path, "refined TSV path (default stdout)");
  refine_cmd->add_option("--shifts", shifts_path, "per-boundary shift TSV path");
  refine_cmd->add_option("--margin", margin, "boundary margin in seconds");
  refine_cmd->add_option("--search-window", search_window,
                         "VAD search window in seconds");

  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "Run the batch pipeline from a config");
  pipeline_cmd->add_option("--config", config_path, "pipeline config YAML")
      ->required();
  pipeline_cmd->add_flag("--cut-audio", cut_audio, "write per-sentence WAV cuts");
  pipeline_cmd->add_option("--parallelism", parallelism, "worker count override");

  auto* report_cmd = app.add_subcommand(
      "report", "Rebuild report TSVs from a pipeline output directory");
  report_cmd->add_option("--config", config_path, "pipeline config YAML")
      ->required();
  report_cmd->add_option("--snr-bin", snr_bin, "SNR histogram bin width in dB");
  report_cmd->add_option("--shift-bin", shift_bin,
                         "shift histogram bin width in seconds");

  try {
    app.parse(argc, argv);

    if (parse_cmd->parsed()) {
      const PipelineConfig cfg = stage_config(config_path);
      const StructuredBook book =
          parse_plain_text(read_file(in_path), cfg.text_rules);
      write_output(out_path, serialize_yaml(book));
    } else if (snr_cmd->parsed()) {
      const PipelineConfig cfg = stage_config(config_path);
      if (threshold) {
        if (!std::isfinite(*threshold)) throw ConfigError("threshold not finite");
      } else if (!cfg.snr_threshold_db) {
        throw ConfigError("snr needs --threshold or snr_threshold_db in config");
      }
      const AudioBuffer voice = read_wav(voice_path);
      const AudioBuffer accomp = read_wav(accomp_path);
      const SnrReport report =
          filter_audiobook(voice, accomp, detect_voice(voice, cfg.vad),
                           threshold ? *threshold : *cfg.snr_threshold_db);
      std::cout << "snr_db\t" << to_compact_string(report.snr_db) << "\n"
                << "voiced_duration\t" << to_compact_string(report.voiced_duration)
                << "\n"
                << "pass\t" << (report.pass ? "true" : "false") << "\n";
    } else if (align_cmd->parsed()) {
      const PipelineConfig cfg = stage_config(config_path);
      const PosteriorMatrix matrix = read_posteriors(posteriors_path);
      const StructuredBook book =
          parse_plain_text(read_file(text_path), cfg.text_rules);
      const MatrixSliceProvider provider(matrix);
      const RealignOutcome outcome = recursive_align(
          provider, tokenized_sentences(book, matrix), cfg.realign);
      for (size_t i = 0; i < outcome.iteration_scores.size(); ++i)
        std::cerr << "iteration " << i << ": avg_score "
                  << to_compact_string(outcome.iteration_scores[i])
                  << (i == outcome.best_iteration ? " (best)" : "") << "\n";
      write_output(out_path, alignment_tsv(outcome.result));
    } else if (refine_cmd->parsed()) {
      PipelineConfig cfg = stage_config(config_path);
      if (margin) cfg.refine.margin = *margin;
      if (search_window) cfg.refine.search_window = *search_window;
      const AlignmentResult alignment =
          parse_alignment_tsv(read_file(alignment_path));
      const RefineOutcome outcome =
          refine(alignment, read_wav(audio_path), cfg.refine);
      write_output(out_path, alignment_tsv(outcome.result));
      if (!shifts_path.empty()) {
        std::string tsv =
            "sentence_index\tstart_shift\tend_shift\tstart_snapped\tend_snapped\n";
        for (const BoundaryShift& s : outcome.shifts)
          tsv += std::to_string(s.sentence_index) + "\t" +
                 to_compact_string(s.start_shift) + "\t" +
                 to_compact_string(s.end_shift) + "\t" +
                 (s.start_snapped ? "1" : "0") + "\t" +
                 (s.end_snapped ? "1" : "0") + "\n";
        write_output(shifts_path, tsv);
      }
    } else if (pipeline_cmd->parsed()) {
      PipelineConfig cfg = load_config(config_path);
      if (cut_audio) cfg.cut_audio = true;
      if (parallelism) {
        if (*parallelism < 1) throw ConfigError("parallelism must be >= 1");
        cfg.parallelism = *parallelism;
      }
      const PipelineResult result = run_pipeline(cfg);
      size_t clean = 0;
      for (const BookOutcome& b : result.books)
        if (b.status == BookStatus::clean) ++clean;
      std::cerr << "processed " << result.books.size() << " audiobook(s), "
                << clean << " clean\n";
    } else if (report_cmd->parsed()) {
      PipelineConfig cfg = load_config(config_path, /*require_audiobooks=*/false);
      if (cfg.output_dir.empty())
        throw ConfigError("report needs output_dir in config");
      if (snr_bin) cfg.report.snr_bin_db = *snr_bin;
      if (shift_bin) cfg.report.shift_bin_sec = *shift_bin;
      if (cfg.report.snr_bin_db <= 0 || cfg.report.shift_bin_sec <= 0)
        throw ConfigError("bin widths must be positive");
      emit_report_from_dir(cfg.output_dir, cfg.report);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
