#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bookalign/align.hpp"
#include "bookalign/types.hpp"

namespace bookalign {

enum class StyleKind { narrative, spoken };

/// One sentence, delimiter kept, with its aligned time span once known.
struct SentenceNode {
  std::string text;
  std::optional<TimeSpan> time;
  friend bool operator==(const SentenceNode&, const SentenceNode&) = default;
};

struct Style {
  StyleKind kind = StyleKind::narrative;
  std::vector<SentenceNode> sentences;
  friend bool operator==(const Style&, const Style&) = default;
};

struct Paragraph {
  std::vector<Style> styles;
  friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

struct Chapter {
  std::vector<Paragraph> paragraphs;
  friend bool operator==(const Chapter&, const Chapter&) = default;
};

/// chapter > paragraph > style > sentence hierarchy. Every level is non-empty
/// in a successfully parsed book; flattened sentence order is reading order.
struct StructuredBook {
  std::vector<Chapter> chapters;
  friend bool operator==(const StructuredBook&, const StructuredBook&) = default;
  size_t sentence_count() const;
};

/// Markup conventions of the source text.
struct ParseRules {
  /// Blank lines separate chapters.
  bool blank_line_chapter = true;
  /// Optional ECMAScript regex; a line whose trimmed text matches it opens a
  /// new chapter and is kept as that chapter's first paragraph.
  std::string chapter_index_regex;
  /// A line starting with one of these begins a new paragraph.
  std::vector<std::string> indent_markers = {"　", "\t"};
  /// Open/close pairs whose spans become spoken styles. Nested quotes of any
  /// pair stay inside the spoken sentence text.
  std::vector<std::pair<std::string, std::string>> quote_pairs = {
      {"「", "」"},   // 「 」
      {"『", "』"},   // 『 』
      {"“", "”"}};  // “ ”
  /// Sentence-terminal characters; a run of them ends a sentence and stays
  /// attached to it.
  std::vector<std::string> terminals = {"。", "．", "？",
                                        "！", ".",      "?",
                                        "!"};  // 。．？！ . ? !
};

/// Structures raw book text into chapters, paragraphs, styles and sentences.
/// Throws EmptyInput or UnbalancedQuote(line).
StructuredBook parse_plain_text(const std::string& text,
                                const ParseRules& rules = {});

/// Canonical corpus YAML: chaptNNN/paragNNN/styleNNN keys (3 digits, dense
/// from 000), 2-space indent; styles carry `kind` and `sents`; sentence
/// entries carry a double-quoted `sent` and, when timed, `time: [start, end]`.
/// serialize(parse(serialize(b))) is byte-identical to serialize(b).
std::string serialize_yaml(const StructuredBook& book);

/// Inverse of serialize_yaml. Throws SchemaError on unknown keys, non-dense
/// indices, malformed time pairs or empty levels.
StructuredBook parse_yaml(const std::string& bytes);

/// Location of one sentence in the hierarchy.
struct SentencePath {
  size_t chapter = 0, paragraph = 0, style = 0, sentence = 0;
  friend bool operator==(const SentencePath&, const SentencePath&) = default;
};

/// All sentence locations in reading order.
std::vector<SentencePath> flatten(const StructuredBook& book);

/// Copies the book with each sentence's time set from the alignment, which
/// must carry exactly one entry per flattened sentence, in order.
/// Throws CountMismatch.
StructuredBook attach_times(const StructuredBook& book,
                            const AlignmentResult& alignment);

}  // namespace bookalign
