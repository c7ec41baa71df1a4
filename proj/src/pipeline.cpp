#include "bookalign/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "bookalign/errors.hpp"
#include "bookalign/posteriors.hpp"
#include "bookalign/snr.hpp"
#include "bookalign/util.hpp"
#include "bookalign/wav_writer.hpp"
#include "parallel.hpp"

namespace bookalign {

std::string_view to_string(BookStatus status) {
  switch (status) {
    case BookStatus::clean: return "clean";
    case BookStatus::snr_rejected: return "snr_rejected";
    case BookStatus::ctc_rejected: return "ctc_rejected";
    case BookStatus::error: return "error";
  }
  return "error";
}

// ---------------------------------------------------------------------------
// config loading

namespace {

void check_keys(const YAML::Node& node, const char* where,
                const std::set<std::string>& allowed) {
  for (const auto& kv : node) {
    const std::string key = kv.first.IsScalar() ? kv.first.Scalar() : "";
    if (!allowed.contains(key))
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const YAML::Node& node, const char* key, T fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

double finite_or(const YAML::Node& node, const char* key, double fallback) {
  const double v = get_or<double>(node, key, fallback);
  if (!std::isfinite(v))
    throw ConfigError(std::string("key '") + key + "' must be finite");
  return v;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::filesystem::path need_existing(const std::filesystem::path& base,
                                    const YAML::Node& entry, const char* key,
                                    const std::string& id) {
  const YAML::Node v = entry[key];
  if (!v || !v.IsScalar())
    throw ConfigError("audiobook '" + id + "' lacks '" + key + "'");
  const auto p = resolve(base, std::filesystem::path(v.Scalar()));
  if (!std::filesystem::exists(p))
    throw ConfigError("audiobook '" + id + "': " + key + " path '" + p.string() +
                      "' does not exist");
  return p;
}

VadConfig load_vad(const YAML::Node& node, VadConfig base) {
  if (!node) return base;
  if (!node.IsMap()) throw ConfigError("'vad' is not a map");
  check_keys(node, "vad",
             {"frame_len", "hop", "threshold_db", "min_voice", "min_silence"});
  base.frame_len = finite_or(node, "frame_len", base.frame_len);
  base.hop = finite_or(node, "hop", base.hop);
  base.threshold_db = finite_or(node, "threshold_db", base.threshold_db);
  base.min_voice = finite_or(node, "min_voice", base.min_voice);
  base.min_silence = finite_or(node, "min_silence", base.min_silence);
  if (base.frame_len <= 0 || base.hop <= 0 || base.min_voice <= 0 ||
      base.min_silence <= 0 || base.hop > base.frame_len)
    throw ConfigError("vad: need 0 < hop <= frame_len and positive durations");
  return base;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path,
                           bool require_audiobooks) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot load '" + path.string() + "': " + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config is not a map");
  check_keys(root, "config",
             {"output_dir", "snr_threshold_db", "min_avg_ctc_score",
              "parallelism", "cut_audio", "text", "vad", "realign", "refine",
              "report", "audiobooks"});

  const std::filesystem::path base =
      std::filesystem::absolute(path).parent_path();
  PipelineConfig cfg;

  if (const YAML::Node v = root["output_dir"])
    cfg.output_dir = resolve(base, std::filesystem::path(v.Scalar()));
  if (root["snr_threshold_db"])
    cfg.snr_threshold_db = finite_or(root, "snr_threshold_db", 0.0);
  cfg.min_avg_ctc_score = finite_or(root, "min_avg_ctc_score", -4.0);
  cfg.parallelism = get_or<int>(root, "parallelism", 1);
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  cfg.cut_audio = get_or<bool>(root, "cut_audio", false);

  if (const YAML::Node text = root["text"]) {
    if (!text.IsMap()) throw ConfigError("'text' is not a map");
    check_keys(text, "text", {"blank_line_chapter", "chapter_index_regex"});
    cfg.text_rules.blank_line_chapter =
        get_or<bool>(text, "blank_line_chapter", true);
    cfg.text_rules.chapter_index_regex =
        get_or<std::string>(text, "chapter_index_regex", "");
  }

  cfg.vad = load_vad(root["vad"], VadConfig{});

  if (const YAML::Node re = root["realign"]) {
    if (!re.IsMap()) throw ConfigError("'realign' is not a map");
    check_keys(re, "realign",
               {"n_best", "max_iters", "min_improvement", "chunk_parallelism",
                "band_width"});
    cfg.realign.n_best = get_or<int>(re, "n_best", 5);
    cfg.realign.max_iters = get_or<int>(re, "max_iters", 10);
    cfg.realign.min_improvement = finite_or(re, "min_improvement", 1e-4);
    cfg.realign.chunk_parallelism = get_or<int>(re, "chunk_parallelism", 1);
    cfg.realign.align.band_width =
        static_cast<size_t>(get_or<int>(re, "band_width", 0));
    if (cfg.realign.n_best < 1 || cfg.realign.max_iters < 1 ||
        cfg.realign.min_improvement < 0 || cfg.realign.chunk_parallelism < 1)
      throw ConfigError("realign: need n_best >= 1, max_iters >= 1, "
                        "min_improvement >= 0, chunk_parallelism >= 1");
  }

  cfg.refine.vad = cfg.vad;
  if (const YAML::Node rf = root["refine"]) {
    if (!rf.IsMap()) throw ConfigError("'refine' is not a map");
    check_keys(rf, "refine", {"search_window", "margin", "vad"});
    cfg.refine.search_window = finite_or(rf, "search_window", 1.0);
    cfg.refine.margin = finite_or(rf, "margin", 0.05);
    cfg.refine.vad = load_vad(rf["vad"], cfg.vad);
    if (!(cfg.refine.margin >= 0) ||
        !(cfg.refine.search_window > cfg.refine.margin))
      throw ConfigError("refine: need search_window > margin >= 0");
  }

  if (const YAML::Node rp = root["report"]) {
    if (!rp.IsMap()) throw ConfigError("'report' is not a map");
    check_keys(rp, "report", {"snr_bin_db", "shift_bin_sec"});
    cfg.report.snr_bin_db = finite_or(rp, "snr_bin_db", 20.0);
    cfg.report.shift_bin_sec = finite_or(rp, "shift_bin_sec", 0.05);
    if (cfg.report.snr_bin_db <= 0 || cfg.report.shift_bin_sec <= 0)
      throw ConfigError("report: bin widths must be positive");
  }

  std::set<std::string> seen_ids;
  if (const YAML::Node books = root["audiobooks"]) {
    if (!books.IsSequence()) throw ConfigError("'audiobooks' is not a list");
    for (const auto& entry : books) {
      if (!entry.IsMap()) throw ConfigError("audiobook entry is not a map");
      check_keys(entry, "audiobook",
                 {"id", "text", "audio", "voice_stem", "accomp_stem",
                  "posteriors", "posterior_command"});
      AudiobookEntry book;
      book.id = get_or<std::string>(entry, "id", "");
      if (book.id.empty() ||
          book.id.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                    "abcdefghijklmnopqrstuvwxyz"
                                    "0123456789_-") != std::string::npos)
        throw ConfigError("audiobook id '" + book.id +
                          "' is empty or not filename-safe");
      if (!seen_ids.insert(book.id).second)
        throw ConfigError("duplicate audiobook id '" + book.id + "'");
      book.text = need_existing(base, entry, "text", book.id);
      book.audio = need_existing(base, entry, "audio", book.id);
      book.voice_stem = need_existing(base, entry, "voice_stem", book.id);
      book.accomp_stem = need_existing(base, entry, "accomp_stem", book.id);
      const bool has_file = static_cast<bool>(entry["posteriors"]);
      const bool has_cmd = static_cast<bool>(entry["posterior_command"]);
      if (has_file == has_cmd)
        throw ConfigError("audiobook '" + book.id +
                          "' needs exactly one of posteriors / posterior_command");
      if (has_file)
        book.posteriors_file = need_existing(base, entry, "posteriors", book.id);
      else
        book.posterior_command = get_or<std::string>(entry, "posterior_command", "");
      cfg.audiobooks.push_back(std::move(book));
    }
  }

  if (require_audiobooks) {
    if (cfg.output_dir.empty()) throw ConfigError("output_dir is required");
    if (!cfg.audiobooks.empty() && !cfg.snr_threshold_db)
      throw ConfigError("snr_threshold_db is required");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// pipeline run

namespace {

/// Memoizes the full-range call so the token table can be inspected before
/// recursive_align re-requests the same range (a command provider would
/// otherwise run its model twice on the whole file).
class CachingProvider : public PosteriorProvider {
 public:
  explicit CachingProvider(const PosteriorProvider& inner) : inner_(inner) {}

  const PosteriorMatrix& full() const {
    std::lock_guard lock(mu_);
    if (!full_) full_ = inner_.posteriors(0.0, inner_.total_duration());
    return *full_;
  }
  PosteriorMatrix posteriors(double start_sec, double end_sec) const override {
    if (start_sec == 0.0 && end_sec == inner_.total_duration()) return full();
    return inner_.posteriors(start_sec, end_sec);
  }
  double total_duration() const override { return inner_.total_duration(); }

 private:
  const PosteriorProvider& inner_;
  mutable std::mutex mu_;
  mutable std::optional<PosteriorMatrix> full_;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out.flush()) throw Error("short write to '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cut_name(const std::string& id, const SentencePath& at) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_c%03zu_p%03zu_s%03zu_t%03zu.wav", at.chapter,
                at.paragraph, at.style, at.sentence);
  return id + buf;
}

std::string scores_tsv(const std::vector<double>& iteration_scores) {
  std::string out = "iteration\tavg_score\n";
  for (size_t i = 0; i < iteration_scores.size(); ++i)
    out += std::to_string(i) + "\t" + to_compact_string(iteration_scores[i]) + "\n";
  return out;
}

std::string shifts_tsv(const std::vector<BoundaryShift>& shifts) {
  std::string out =
      "sentence_index\tstart_shift\tend_shift\tstart_snapped\tend_snapped\n";
  for (const BoundaryShift& s : shifts) {
    out += std::to_string(s.sentence_index) + "\t" +
           to_compact_string(s.start_shift) + "\t" +
           to_compact_string(s.end_shift) + "\t" +
           (s.start_snapped ? "1" : "0") + "\t" + (s.end_snapped ? "1" : "0") +
           "\n";
  }
  return out;
}

BookOutcome process_book(const PipelineConfig& cfg, const AudiobookEntry& entry) {
  BookOutcome out;
  out.id = entry.id;
  try {
    const StructuredBook book =
        parse_plain_text(read_text_file(entry.text), cfg.text_rules);

    const AudioBuffer voice = read_wav(entry.voice_stem);
    const AudioBuffer accomp = read_wav(entry.accomp_stem);
    const VoiceSegments regions = detect_voice(voice, cfg.vad);
    const SnrReport snr =
        filter_audiobook(voice, accomp, regions, *cfg.snr_threshold_db);
    out.snr_db = snr.snr_db;
    if (!snr.pass) {
      out.status = BookStatus::snr_rejected;
      return out;
    }

    const AudioBuffer audio = read_wav(entry.audio);
    std::unique_ptr<PosteriorProvider> source;
    if (!entry.posteriors_file.empty())
      source = std::make_unique<MatrixSliceProvider>(
          read_posteriors(entry.posteriors_file));
    else
      source = std::make_unique<CommandProvider>(
          entry.posterior_command, entry.audio, audio.duration(),
          static_cast<unsigned>(cfg.realign.chunk_parallelism));
    const CachingProvider provider(*source);
    const PosteriorMatrix& full = provider.full();

    std::vector<TokenizedSentence> sentences;
    const auto paths = flatten(book);
    for (const SentencePath& at : paths) {
      const SentenceNode& node = book.chapters[at.chapter]
                                     .paragraphs[at.paragraph]
                                     .styles[at.style]
                                     .sentences[at.sentence];
      sentences.push_back(
          tokenize(node.text, full.token_table, full.blank_index));
    }

    const RealignOutcome aligned =
        recursive_align(provider, sentences, cfg.realign);
    out.iterations = aligned.iteration_scores.size();
    out.iteration_scores = aligned.iteration_scores;
    out.avg_ctc_score = aligned.result.avg_score;

    const RefineOutcome refined = refine(aligned.result, audio, cfg.refine);
    out.shifts = refined.shifts;

    write_file(cfg.output_dir / (entry.id + ".scores.tsv"),
               scores_tsv(out.iteration_scores));
    write_file(cfg.output_dir / (entry.id + ".shifts.tsv"),
               shifts_tsv(out.shifts));

    if (aligned.result.avg_score < cfg.min_avg_ctc_score) {
      out.status = BookStatus::ctc_rejected;
      return out;
    }

    const StructuredBook timed = attach_times(book, refined.result);
    write_file(cfg.output_dir / (entry.id + ".yaml"), serialize_yaml(timed));

    if (cfg.cut_audio) {
      const auto n = static_cast<long long>(audio.samples.size());
      for (size_t i = 0; i < paths.size(); ++i) {
        const TimeSpan span = refined.result.entries[i].span;
        long long s0 = std::llround(span.start * audio.sample_rate);
        long long s1 = std::llround(span.end * audio.sample_rate);
        s0 = std::clamp(s0, 0LL, n);
        s1 = std::clamp(s1, s0, n);
        AudioBuffer cut;
        cut.sample_rate = audio.sample_rate;
        cut.samples.assign(audio.samples.begin() + s0, audio.samples.begin() + s1);
        write_wav_float32(cfg.output_dir / cut_name(entry.id, paths[i]), cut);
      }
    }
    out.status = BookStatus::clean;
  } catch (const std::exception& e) {
    out.status = BookStatus::error;
    out.error = e.what();
  }
  return out;
}

std::string manifest_tsv(const std::vector<BookOutcome>& books) {
  std::string out = "id\tsnr_db\titerations\tavg_ctc_score\tstatus\n";
  for (const BookOutcome& b : books) {
    out += b.id + "\t" + (b.snr_db ? to_compact_string(*b.snr_db) : "-") + "\t" +
           std::to_string(b.iterations) + "\t" +
           (b.avg_ctc_score ? to_compact_string(*b.avg_ctc_score) : "-") + "\t" +
           std::string(to_string(b.status)) + "\n";
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is required");
  if (!cfg.audiobooks.empty() && !cfg.snr_threshold_db)
    throw ConfigError("snr_threshold_db is required");
  std::filesystem::create_directories(cfg.output_dir);

  PipelineResult result;
  result.books.resize(cfg.audiobooks.size());
  detail::parallel_for(static_cast<unsigned>(cfg.parallelism),
                       cfg.audiobooks.size(), [&](size_t i) {
                         result.books[i] = process_book(cfg, cfg.audiobooks[i]);
                       });

  for (const BookOutcome& b : result.books)
    if (b.status == BookStatus::error)
      std::cerr << b.id << ": error: " << b.error << "\n";

  write_file(cfg.output_dir / "manifest.tsv", manifest_tsv(result.books));
  if (!result.books.empty())
    emit_report(result.books, cfg.report, cfg.output_dir);
  return result;
}

// ---------------------------------------------------------------------------
// reports

namespace {

using Bins = std::map<long long, size_t>;

void add_to_bin(Bins& bins, double value, double width) {
  bins[static_cast<long long>(std::floor(value / width))]++;
}

void append_bins(std::string& out, const Bins& bins, double width,
                 const std::string& row_prefix) {
  for (const auto& [bin, count] : bins) {
    out += row_prefix + to_compact_string(static_cast<double>(bin) * width) +
           "\t" + to_compact_string(static_cast<double>(bin + 1) * width) +
           "\t" + std::to_string(count) + "\n";
  }
}

}  // namespace

void emit_report(const std::vector<BookOutcome>& books, const ReportConfig& cfg,
                 const std::filesystem::path& out_dir) {
  if (books.empty()) throw NoData();

  Bins snr_bins;
  for (const BookOutcome& b : books)
    if (b.snr_db) add_to_bin(snr_bins, *b.snr_db, cfg.snr_bin_db);
  std::string snr_out = "bin_low\tbin_high\tcount\n";
  append_bins(snr_out, snr_bins, cfg.snr_bin_db, "");
  write_file(out_dir / "snr_hist.tsv", snr_out);

  std::string scores_out = "audiobook_id\titeration\tavg_score\n";
  for (const BookOutcome& b : books)
    for (size_t i = 0; i < b.iteration_scores.size(); ++i)
      scores_out += b.id + "\t" + std::to_string(i) + "\t" +
                    to_compact_string(b.iteration_scores[i]) + "\n";
  write_file(out_dir / "ctc_scores.tsv", scores_out);

  Bins start_bins, end_bins;
  for (const BookOutcome& b : books)
    for (const BoundaryShift& s : b.shifts) {
      add_to_bin(start_bins, s.start_shift, cfg.shift_bin_sec);
      add_to_bin(end_bins, s.end_shift, cfg.shift_bin_sec);
    }
  std::string shift_out = "boundary_kind\tbin_low_sec\tbin_high_sec\tcount\n";
  append_bins(shift_out, start_bins, cfg.shift_bin_sec, "start\t");
  append_bins(shift_out, end_bins, cfg.shift_bin_sec, "end\t");
  write_file(out_dir / "vad_shift_hist.tsv", shift_out);
}

// ---------------------------------------------------------------------------
// report reconstruction from a finished output directory

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t at = 0;
  for (;;) {
    const size_t tab = line.find('\t', at);
    if (tab == std::string::npos) {
      out.push_back(line.substr(at));
      return out;
    }
    out.push_back(line.substr(at, tab - at));
    at = tab + 1;
  }
}

double parse_double(const std::string& s, const char* what) {
  double v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(std::string("bad ") + what + " value '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void emit_report_from_dir(const std::filesystem::path& out_dir,
                          const ReportConfig& cfg) {
  const auto manifest_path = out_dir / "manifest.tsv";
  if (!std::filesystem::exists(manifest_path)) throw NoData();
  const auto lines = read_lines(manifest_path);
  if (lines.size() <= 1) throw NoData();

  std::vector<BookOutcome> books;
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != 5)
      throw Error("manifest row has " + std::to_string(cols.size()) +
                  " columns, expected 5");
    BookOutcome b;
    b.id = cols[0];
    if (cols[1] != "-") b.snr_db = parse_double(cols[1], "snr_db");

    for (const auto& row : read_lines(out_dir / (b.id + ".scores.tsv"))) {
      const auto sc = split_tabs(row);
      if (sc.size() == 2 && sc[0] != "iteration")
        b.iteration_scores.push_back(parse_double(sc[1], "avg_score"));
    }
    for (const auto& row : read_lines(out_dir / (b.id + ".shifts.tsv"))) {
      const auto sc = split_tabs(row);
      if (sc.size() == 5 && sc[0] != "sentence_index") {
        BoundaryShift s;
        s.sentence_index = static_cast<size_t>(parse_double(sc[0], "index"));
        s.start_shift = parse_double(sc[1], "start_shift");
        s.end_shift = parse_double(sc[2], "end_shift");
        s.start_snapped = sc[3] == "1";
        s.end_snapped = sc[4] == "1";
        b.shifts.push_back(s);
      }
    }
    books.push_back(std::move(b));
  }
  emit_report(books, cfg, out_dir);
}

}  // namespace bookalign
