#include "bookalign/posteriors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "bookalign/errors.hpp"
#include "bookalign/util.hpp"

namespace bookalign {

namespace {

constexpr char kMagic[4] = {'C', 'T', 'C', 'P'};
constexpr uint32_t kVersion = 1;

template <typename T>
void push_le(std::vector<uint8_t>& b, T v) {
  uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  b.insert(b.end(), raw, raw + sizeof(T));  // host is little-endian
}

struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  template <typename T>
  T take(const char* what) {
    if (pos + sizeof(T) > bytes.size()) throw TruncatedFile(what);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string take_string(uint32_t len, const char* what) {
    if (pos + len > bytes.size()) throw TruncatedFile(what);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    return s;
  }
};

void validate_matrix(const PosteriorMatrix& m) {
  if (m.frames < 1) throw InvariantViolation("T must be >= 1");
  if (m.vocab < 2) throw InvariantViolation("V must be >= 2");
  if (m.blank_index >= m.vocab) throw InvariantViolation("blank index out of range");
  if (!(m.frame_shift > 0.0)) throw InvariantViolation("frame shift must be positive");
  if (m.token_table.size() != m.vocab)
    throw InvariantViolation("token table size != V");
  if (m.logp.size() != m.frames * m.vocab)
    throw InvariantViolation("matrix size != T*V");
  for (size_t t = 0; t < m.frames; ++t) {
    const auto row = m.row(t);
    float max_lp = -std::numeric_limits<float>::infinity();
    for (float v : row) {
      if (v > 0.0f)
        throw InvariantViolation("positive log-probability at frame " + std::to_string(t));
      max_lp = std::max(max_lp, v);
    }
    double sum = 0.0;
    for (float v : row) sum += std::exp(static_cast<double>(v) - max_lp);
    const double lse = max_lp + std::log(sum);
    if (!(lse >= -0.1 && lse <= 0.01))
      throw InvariantViolation("row " + std::to_string(t) +
                               " log-sum-exp out of range: " + to_compact_string(lse));
  }
}

}  // namespace

void write_posteriors(const PosteriorMatrix& m, const std::filesystem::path& path) {
  validate_matrix(m);
  std::vector<uint8_t> b;
  b.reserve(32 + m.logp.size() * 4);
  b.insert(b.end(), kMagic, kMagic + 4);
  push_le(b, kVersion);
  push_le(b, static_cast<uint64_t>(m.frames));
  push_le(b, m.vocab);
  push_le(b, m.blank_index);
  push_le(b, m.frame_shift);
  for (const std::string& tok : m.token_table) {
    push_le(b, static_cast<uint32_t>(tok.size()));
    b.insert(b.end(), tok.begin(), tok.end());
  }
  for (float v : m.logp) push_le(b, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error("short write to " + path.string());
}

PosteriorMatrix read_posteriors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  Reader r{bytes};

  if (bytes.size() < 4) throw TruncatedFile("magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic();
  r.pos = 4;
  const uint32_t version = r.take<uint32_t>("version");
  if (version != kVersion) throw VersionUnsupported(version);

  PosteriorMatrix m;
  m.frames = static_cast<size_t>(r.take<uint64_t>("frame count"));
  m.vocab = r.take<uint32_t>("vocab size");
  m.blank_index = r.take<uint32_t>("blank index");
  m.frame_shift = r.take<double>("frame shift");
  m.token_table.reserve(m.vocab);
  for (uint32_t i = 0; i < m.vocab; ++i) {
    const uint32_t len = r.take<uint32_t>("token length");
    m.token_table.push_back(r.take_string(len, "token string"));
  }
  m.logp.resize(m.frames * m.vocab);
  for (float& v : m.logp) v = r.take<float>("log-probabilities");
  if (r.pos != bytes.size())
    throw InvariantViolation(std::to_string(bytes.size() - r.pos) + " trailing bytes");
  validate_matrix(m);
  return m;
}

TokenizedSentence tokenize(const std::string& sentence_text,
                           const std::vector<std::string>& token_table,
                           uint32_t blank_index) {
  if (token_table.empty()) throw Error("empty token table");

  TokenizedSentence out;
  std::vector<std::pair<std::string, size_t>> unmatched;
  size_t pos = 0;
  size_t cp_index = 0;
  const std::string_view text = sentence_text;
  while (pos < text.size()) {
    size_t cp_len;
    const uint32_t cp = utf8::decode(text, pos, cp_len);
    if (utf8::is_space(cp)) {
      pos += cp_len;
      ++cp_index;
      continue;
    }
    // longest match wins; equal lengths resolve to the lowest token id
    size_t best_len = 0;
    uint32_t best_id = 0;
    for (uint32_t id = 0; id < token_table.size(); ++id) {
      if (id == blank_index) continue;
      const std::string& tok = token_table[id];
      if (tok.empty() || tok.size() <= best_len) continue;
      if (text.compare(pos, tok.size(), tok) == 0) {
        best_len = tok.size();
        best_id = id;
      }
    }
    if (best_len == 0) {
      unmatched.emplace_back(std::string(text.substr(pos, cp_len)), cp_index);
      pos += cp_len;
      ++cp_index;
      continue;
    }
    out.token_ids.push_back(best_id);
    // advance by the matched bytes, counting code points
    const size_t end = pos + best_len;
    while (pos < end) {
      size_t l;
      utf8::decode(text, pos, l);
      pos += l;
      ++cp_index;
    }
  }
  if (!unmatched.empty()) throw UnknownToken(std::move(unmatched));
  return out;
}

UnknownToken::UnknownToken(std::vector<std::pair<std::string, size_t>> unmatched_)
    : Error([&] {
        std::string msg = "unknown characters:";
        for (const auto& [ch, idx] : unmatched_)
          msg += " '" + ch + "' at " + std::to_string(idx);
        return msg;
      }()),
      unmatched(std::move(unmatched_)) {}

ProviderFailure::ProviderFailure(double start_sec, double end_sec, const std::string& what)
    : Error("posterior provider failed for [" + to_compact_string(start_sec) + ", " +
            to_compact_string(end_sec) + "]: " + what),
      range_start(start_sec),
      range_end(end_sec) {}

PosteriorMatrix synth_posteriors(const std::vector<TimelineEntry>& timeline, size_t frames,
                                 const std::vector<std::string>& token_table,
                                 uint32_t blank_index, double noise_sigma,
                                 uint64_t seed, double frame_shift,
                                 double main_mass) {
  const uint32_t vocab = static_cast<uint32_t>(token_table.size());
  if (frames < 1) throw BadTimeline("zero frames");
  if (vocab < 2) throw BadTimeline("vocab must have at least blank and one token");
  if (blank_index >= vocab) throw BadTimeline("blank index out of range");
  if (noise_sigma < 0.0) throw BadTimeline("negative noise sigma");
  if (!(main_mass > 0.0) || !(main_mass < 1.0))
    throw BadTimeline("main_mass must be in (0, 1)");

  std::vector<uint32_t> target(frames, blank_index);
  size_t prev_end = 0;
  for (const TimelineEntry& e : timeline) {
    if (e.token_id >= vocab || e.token_id == blank_index)
      throw BadTimeline("token id " + std::to_string(e.token_id));
    if (e.start_frame >= e.end_frame || e.end_frame > frames)
      throw BadTimeline("span [" + std::to_string(e.start_frame) + ", " +
                        std::to_string(e.end_frame) + ")");
    if (e.start_frame < prev_end) throw BadTimeline("overlapping or unordered spans");
    prev_end = e.end_frame;
    std::fill(target.begin() + static_cast<ptrdiff_t>(e.start_frame),
              target.begin() + static_cast<ptrdiff_t>(e.end_frame), e.token_id);
  }

  const double rest = (1.0 - main_mass) / (vocab - 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  PosteriorMatrix m;
  m.frames = frames;
  m.vocab = vocab;
  m.blank_index = blank_index;
  m.frame_shift = frame_shift;
  m.token_table = token_table;
  m.logp.resize(frames * vocab);

  std::vector<double> logits(vocab);
  for (size_t t = 0; t < frames; ++t) {
    for (uint32_t v = 0; v < vocab; ++v) {
      logits[v] = std::log(v == target[t] ? main_mass : rest);
      if (noise_sigma > 0.0) logits[v] += noise_sigma * noise(rng);
    }
    // exact log-softmax
    const double max_l = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - max_l);
    const double lse = max_l + std::log(sum);
    for (uint32_t v = 0; v < vocab; ++v)
      m.logp[t * vocab + v] = static_cast<float>(logits[v] - lse);
  }
  return m;
}

}  // namespace bookalign
