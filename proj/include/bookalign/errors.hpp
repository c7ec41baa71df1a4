#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bookalign {

/// Base class for all pipeline errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// text structuring
struct EmptyInput : Error {
  EmptyInput() : Error("no non-whitespace content in input text") {}
};
struct UnbalancedQuote : Error {
  size_t line;
  explicit UnbalancedQuote(size_t line_no)
      : Error("open quote with no close before paragraph end (line " +
              std::to_string(line_no) + ")"),
        line(line_no) {}
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error("schema error: " + what) {}
};
struct CountMismatch : Error {
  size_t expected, got;
  CountMismatch(size_t expected_, size_t got_)
      : Error("count mismatch: expected " + std::to_string(expected_) + ", got " +
              std::to_string(got_)),
        expected(expected_),
        got(got_) {}
};

// audio
struct UnsupportedFormat : Error {
  explicit UnsupportedFormat(const std::string& what)
      : Error("unsupported audio format: " + what) {}
};
struct CorruptHeader : Error {
  explicit CorruptHeader(const std::string& what) : Error("corrupt WAV: " + what) {}
};
struct EmptyAudio : Error {
  explicit EmptyAudio(const std::string& what = "audio shorter than one frame")
      : Error(what) {}
};
struct SampleRateMismatch : Error {
  explicit SampleRateMismatch(const std::string& what)
      : Error("sample rate mismatch: " + what) {}
};

// snr
struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& what)
      : Error("stem length mismatch: " + what) {}
};
struct EmptyRegions : Error {
  EmptyRegions() : Error("no voiced regions to compute SNR over") {}
};

// posterior file format
struct BadMagic : Error {
  BadMagic() : Error("bad magic, not a CTCP file") {}
};
struct VersionUnsupported : Error {
  explicit VersionUnsupported(uint32_t v)
      : Error("unsupported CTCP version " + std::to_string(v)) {}
};
struct TruncatedFile : Error {
  explicit TruncatedFile(const std::string& what) : Error("truncated CTCP file: " + what) {}
};
struct InvariantViolation : Error {
  explicit InvariantViolation(const std::string& what)
      : Error("posterior invariant violated: " + what) {}
};

// tokenization
struct UnknownToken : Error {
  /// (character, code-point index) for every unmatched character.
  std::vector<std::pair<std::string, size_t>> unmatched;
  explicit UnknownToken(std::vector<std::pair<std::string, size_t>> unmatched_);
};

struct BadTimeline : Error {
  explicit BadTimeline(const std::string& what) : Error("bad timeline: " + what) {}
};

// alignment
struct TooManyTokens : Error {
  TooManyTokens(size_t tokens, size_t frames)
      : Error("token count " + std::to_string(tokens) + " exceeds frame count " +
              std::to_string(frames)) {}
};
struct EmptySentences : Error {
  EmptySentences() : Error("no sentences to align") {}
};
struct DiagonalEscape : Error {
  explicit DiagonalEscape(const std::string& what)
      : Error("best path hit the band edge: " + what) {}
};
struct InfeasibleAlignment : Error {
  InfeasibleAlignment() : Error("no path with finite probability") {}
};

// realignment
struct ProviderFailure : Error {
  double range_start, range_end;
  ProviderFailure(double start_sec, double end_sec, const std::string& what);
};
struct ChunkTooShort : Error {
  size_t anchor_index;  ///< flattened sentence index of the anchor to discard
  ChunkTooShort(size_t anchor_index_, const std::string& what)
      : Error("chunk too short: " + what), anchor_index(anchor_index_) {}
};

// refinement
struct SpanOutOfRange : Error {
  explicit SpanOutOfRange(const std::string& what)
      : Error("alignment span outside audio: " + what) {}
};

// reporting / config
struct NoData : Error {
  NoData() : Error("no audiobooks processed, nothing to report") {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

}  // namespace bookalign
