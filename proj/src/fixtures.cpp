#include "bookalign/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "bookalign/errors.hpp"
#include "bookalign/wav_writer.hpp"

namespace bookalign {

namespace {

std::vector<std::string> fixture_token_table() {
  std::vector<std::string> table;
  table.emplace_back("_");  // blank
  for (char c = 'a'; c <= 'z'; ++c) table.emplace_back(1, c);
  table.emplace_back(".");
  return table;
}

/// Random words of lowercase letters, space-separated, closed with a period,
/// sized so the tokenized length lands within [min_tokens, max_tokens].
std::string make_sentence(std::mt19937_64& rng, const FixturePlan& plan) {
  std::uniform_int_distribution<size_t> target_dist(plan.min_tokens,
                                                    plan.max_tokens);
  std::uniform_int_distribution<size_t> word_len(2, 7);
  std::uniform_int_distribution<int> letter('a', 'z');
  const size_t target = target_dist(rng);  // letters + final period
  std::string out;
  size_t letters = 0;
  while (letters + 1 < target) {
    size_t len = std::min(word_len(rng), target - 1 - letters);
    if (!out.empty()) out += ' ';
    for (size_t i = 0; i < len; ++i) out += static_cast<char>(letter(rng));
    letters += len;
  }
  out += '.';
  return out;
}

}  // namespace

SyntheticAudiobook make_synthetic_audiobook(uint64_t seed, size_t n_sentences,
                                            uint32_t sample_rate,
                                            const FixturePlan& plan) {
  if (n_sentences < 1) throw ConfigError("fixture needs at least one sentence");
  const double spf_d = plan.frame_shift * sample_rate;
  const auto samples_per_frame = static_cast<size_t>(std::llround(spf_d));
  if (std::abs(spf_d - static_cast<double>(samples_per_frame)) > 1e-9 ||
      samples_per_frame == 0)
    throw ConfigError("frame_shift * sample_rate must be a whole sample count");

  SyntheticAudiobook fx;
  fx.token_table = fixture_token_table();
  fx.blank_index = 0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap_dist(plan.gap_min_sec,
                                                  plan.gap_max_sec);
  std::bernoulli_distribution spoken(plan.spoken_fraction);

  // Sentences, their token ids, and whether they are quoted speech.
  std::vector<std::vector<uint32_t>> token_ids(n_sentences);
  std::vector<bool> is_spoken(n_sentences);
  for (size_t s = 0; s < n_sentences; ++s) {
    fx.sentence_texts.push_back(make_sentence(rng, plan));
    is_spoken[s] = spoken(rng);
    token_ids[s] =
        tokenize(fx.sentence_texts[s], fx.token_table, fx.blank_index).token_ids;
  }

  // Frame-level timeline: lead, then tokens back to back per sentence with a
  // silent gap after each sentence but the last, then trail.
  size_t cursor = static_cast<size_t>(std::llround(plan.lead_sec / plan.frame_shift));
  for (size_t s = 0; s < n_sentences; ++s) {
    const size_t first = cursor;
    for (uint32_t id : token_ids[s]) {
      fx.timeline.push_back({id, cursor, cursor + plan.frames_per_token});
      cursor += plan.frames_per_token;
    }
    fx.true_spans.push_back({static_cast<double>(first) * plan.frame_shift,
                             static_cast<double>(cursor) * plan.frame_shift});
    if (s + 1 < n_sentences)
      cursor += static_cast<size_t>(std::llround(gap_dist(rng) / plan.frame_shift));
  }
  const size_t total_frames =
      cursor + static_cast<size_t>(std::llround(plan.trail_sec / plan.frame_shift));

  // Audio: a distinct tone per sentence over its true span, silence elsewhere.
  fx.audio.sample_rate = sample_rate;
  fx.audio.samples.assign(total_frames * samples_per_frame, 0.0f);
  for (size_t s = 0; s < n_sentences; ++s) {
    const double freq = 300.0 + 80.0 * static_cast<double>(s % 10);
    const auto n0 = static_cast<size_t>(
        std::llround(fx.true_spans[s].start * sample_rate));
    const auto n1 = static_cast<size_t>(
        std::llround(fx.true_spans[s].end * sample_rate));
    for (size_t n = n0; n < n1; ++n) {
      const double t = static_cast<double>(n - n0) / sample_rate;
      fx.audio.samples[n] = static_cast<float>(
          plan.tone_amp * std::sin(2.0 * std::numbers::pi * freq * t));
    }
  }

  // Book text: paragraphs of up to three sentences, chapters split halfway.
  // Spoken sentences are quoted, so the parser re-derives the same flattened
  // sentence sequence.
  const size_t chapter_break = (n_sentences + 1) / 2;
  for (size_t s = 0; s < n_sentences; ++s) {
    if (s == chapter_break && s != 0)
      fx.text += "\n\n";
    else if (s % 3 == 0 && s != 0)
      fx.text += "\n　";
    else if (s == 0)
      fx.text += "　";
    if (is_spoken[s])
      fx.text += "「" + fx.sentence_texts[s] + "」";
    else
      fx.text += fx.sentence_texts[s];
  }
  fx.text += "\n";
  // A chapter break must also start a paragraph on its first line.
  const size_t nl2 = fx.text.find("\n\n");
  if (nl2 != std::string::npos) fx.text.insert(nl2 + 2, "　");

  fx.book = parse_plain_text(fx.text);
  const auto paths = flatten(fx.book);
  if (paths.size() != n_sentences)
    throw InvariantViolation("fixture text parsed into " +
                             std::to_string(paths.size()) + " sentences, expected " +
                             std::to_string(n_sentences));
  for (size_t i = 0; i < paths.size(); ++i) {
    const auto& at = paths[i];
    const SentenceNode& node = fx.book.chapters[at.chapter]
                                   .paragraphs[at.paragraph]
                                   .styles[at.style]
                                   .sentences[at.sentence];
    if (node.text != fx.sentence_texts[i])
      throw InvariantViolation("fixture sentence " + std::to_string(i) +
                               " round-trip mismatch");
  }

  fx.posteriors =
      synth_posteriors(fx.timeline, total_frames, fx.token_table, fx.blank_index,
                       plan.noise_sigma, seed, plan.frame_shift, plan.main_mass);
  return fx;
}

std::vector<TimelineEntry> clip_timeline(const std::vector<TimelineEntry>& timeline,
                                         size_t f0, size_t f1) {
  std::vector<TimelineEntry> out;
  for (const TimelineEntry& e : timeline) {
    const size_t lo = std::max(e.start_frame, f0);
    const size_t hi = std::min(e.end_frame, f1);
    if (lo < hi) out.push_back({e.token_id, lo - f0, hi - f0});
  }
  return out;
}

void write_fixture_files(const SyntheticAudiobook& fx,
                         const std::filesystem::path& dir, double accomp_gain) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream text(dir / "text.txt", std::ios::binary);
    text << fx.text;
  }
  write_wav_float32(dir / "audio.wav", fx.audio);
  write_wav_float32(dir / "voice.wav", fx.audio);
  AudioBuffer accomp;
  accomp.sample_rate = fx.audio.sample_rate;
  accomp.samples.resize(fx.audio.samples.size());
  for (size_t i = 0; i < accomp.samples.size(); ++i)
    accomp.samples[i] = static_cast<float>(accomp_gain * fx.audio.samples[i]);
  write_wav_float32(dir / "accomp.wav", accomp);
  write_posteriors(fx.posteriors, dir / "posteriors.ctcp");
}

}  // namespace bookalign
