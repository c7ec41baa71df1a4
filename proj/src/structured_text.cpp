#include "bookalign/structured_text.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <regex>
#include <string_view>

#include "bookalign/errors.hpp"
#include "bookalign/util.hpp"

namespace bookalign {

size_t StructuredBook::sentence_count() const {
  size_t n = 0;
  for (const auto& c : chapters)
    for (const auto& p : c.paragraphs)
      for (const auto& s : p.styles) n += s.sentences.size();
  return n;
}

std::vector<SentencePath> flatten(const StructuredBook& book) {
  std::vector<SentencePath> out;
  for (size_t c = 0; c < book.chapters.size(); ++c)
    for (size_t p = 0; p < book.chapters[c].paragraphs.size(); ++p)
      for (size_t s = 0; s < book.chapters[c].paragraphs[p].styles.size(); ++s)
        for (size_t t = 0;
             t < book.chapters[c].paragraphs[p].styles[s].sentences.size(); ++t)
          out.push_back({c, p, s, t});
  return out;
}

StructuredBook attach_times(const StructuredBook& book,
                            const AlignmentResult& alignment) {
  const auto paths = flatten(book);
  if (paths.size() != alignment.entries.size())
    throw CountMismatch(paths.size(), alignment.entries.size());
  StructuredBook out = book;
  for (size_t i = 0; i < paths.size(); ++i) {
    const SentencePath& at = paths[i];
    out.chapters[at.chapter]
        .paragraphs[at.paragraph]
        .styles[at.style]
        .sentences[at.sentence]
        .time = alignment.entries[i].span;
  }
  return out;
}

// ---------------------------------------------------------------------------
// plain-text parsing

namespace {

bool starts_with_at(std::string_view text, size_t pos, std::string_view what) {
  return !what.empty() && text.substr(pos).starts_with(what);
}

/// Index of the quote pair whose opener starts at pos, or npos.
size_t opener_at(std::string_view text, size_t pos, const ParseRules& rules) {
  for (size_t q = 0; q < rules.quote_pairs.size(); ++q)
    if (starts_with_at(text, pos, rules.quote_pairs[q].first)) return q;
  return std::string_view::npos;
}

bool terminal_at(std::string_view text, size_t pos, const ParseRules& rules,
                 size_t& len) {
  for (const std::string& t : rules.terminals)
    if (starts_with_at(text, pos, t)) {
      len = t.size();
      return true;
    }
  return false;
}

/// Splits style content into sentences after runs of terminal characters.
/// Terminals inside nested quote pairs do not split, so an inner quotation
/// stays within one sentence.
std::vector<SentenceNode> split_sentences(std::string_view content,
                                          const ParseRules& rules) {
  std::vector<SentenceNode> out;
  std::vector<size_t> quote_stack;  // pair indices of currently open quotes
  size_t seg_start = 0;
  size_t pos = 0;
  auto emit = [&](size_t end) {
    const std::string_view seg = utf8::trim(content.substr(seg_start, end - seg_start));
    if (!seg.empty()) out.push_back({std::string(seg), std::nullopt});
    seg_start = end;
  };
  while (pos < content.size()) {
    if (!quote_stack.empty() &&
        starts_with_at(content, pos, rules.quote_pairs[quote_stack.back()].second)) {
      pos += rules.quote_pairs[quote_stack.back()].second.size();
      quote_stack.pop_back();
      continue;
    }
    if (const size_t q = opener_at(content, pos, rules);
        q != std::string_view::npos) {
      quote_stack.push_back(q);
      pos += rules.quote_pairs[q].first.size();
      continue;
    }
    size_t tlen;
    if (quote_stack.empty() && terminal_at(content, pos, rules, tlen)) {
      pos += tlen;
      // extend over the whole terminal run
      while (pos < content.size() && terminal_at(content, pos, rules, tlen))
        pos += tlen;
      emit(pos);
      continue;
    }
    size_t cplen;
    utf8::decode(content, pos, cplen);
    pos += cplen;
  }
  emit(content.size());
  return out;
}

/// Paragraph text with enough bookkeeping to map a byte offset back to the
/// source line it came from.
struct ParagraphText {
  std::string text;
  std::vector<std::pair<size_t, size_t>> line_starts;  // (byte offset, line no)

  size_t line_of(size_t offset) const {
    size_t line = line_starts.empty() ? 0 : line_starts.front().second;
    for (const auto& [off, ln] : line_starts) {
      if (off > offset) break;
      line = ln;
    }
    return line;
  }
};

Paragraph parse_paragraph(const ParagraphText& para, const ParseRules& rules) {
  Paragraph out;
  const std::string_view text = para.text;
  auto add_style = [&](StyleKind kind, std::string_view content) {
    Style st;
    st.kind = kind;
    st.sentences = split_sentences(content, rules);
    if (!st.sentences.empty()) out.styles.push_back(std::move(st));
  };

  size_t run_start = 0;  // start of the current narrative run
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t q = opener_at(text, pos, rules);
    if (q == std::string_view::npos) {
      size_t cplen;
      utf8::decode(text, pos, cplen);
      pos += cplen;
      continue;
    }
    add_style(StyleKind::narrative, text.substr(run_start, pos - run_start));

    // find the matching closer, treating nested quotes of the same pair as
    // opaque content
    const auto& [open, close] = rules.quote_pairs[q];
    const size_t open_pos = pos;
    pos += open.size();
    const size_t content_start = pos;
    size_t depth = 1;
    while (pos < text.size() && depth > 0) {
      if (starts_with_at(text, pos, close)) {
        --depth;
        if (depth == 0) break;
        pos += close.size();
      } else if (starts_with_at(text, pos, open)) {
        ++depth;
        pos += open.size();
      } else {
        size_t cplen;
        utf8::decode(text, pos, cplen);
        pos += cplen;
      }
    }
    if (depth > 0) throw UnbalancedQuote(para.line_of(open_pos));
    add_style(StyleKind::spoken, text.substr(content_start, pos - content_start));
    pos += close.size();
    run_start = pos;
  }
  add_style(StyleKind::narrative, text.substr(run_start));
  return out;
}

}  // namespace

StructuredBook parse_plain_text(const std::string& text,
                                const ParseRules& rules) {
  std::optional<std::regex> chapter_re;
  if (!rules.chapter_index_regex.empty()) {
    try {
      chapter_re.emplace(rules.chapter_index_regex);
    } catch (const std::regex_error& e) {
      throw ConfigError(std::string("bad chapter_index_regex: ") + e.what());
    }
  }

  // Gather lines into paragraphs into chapters.
  std::vector<std::vector<ParagraphText>> chapters(1);
  ParagraphText pending;
  auto flush_paragraph = [&] {
    if (!utf8::trim(pending.text).empty()) chapters.back().push_back(pending);
    pending = {};
  };
  auto flush_chapter = [&] {
    flush_paragraph();
    if (!chapters.back().empty()) chapters.emplace_back();
  };
  auto append_line = [&](std::string_view body, size_t line_no) {
    pending.line_starts.emplace_back(pending.text.size(), line_no);
    pending.text += body;
  };

  size_t line_no = 0;
  for (size_t at = 0; at <= text.size();) {
    size_t eol = text.find('\n', at);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + at, eol - at);
    if (line.ends_with('\r')) line.remove_suffix(1);
    at = eol + 1;
    ++line_no;

    const std::string_view trimmed = utf8::trim(line);
    if (trimmed.empty()) {
      if (rules.blank_line_chapter)
        flush_chapter();
      else
        flush_paragraph();
      continue;
    }
    if (chapter_re &&
        std::regex_match(trimmed.begin(), trimmed.end(), *chapter_re)) {
      flush_chapter();
      append_line(trimmed, line_no);  // the index line is content, not layout
      flush_paragraph();
      continue;
    }
    bool indented = false;
    std::string_view body = line;
    for (bool stripped = true; stripped;) {
      stripped = false;
      for (const std::string& marker : rules.indent_markers)
        if (!marker.empty() && body.starts_with(marker)) {
          body.remove_prefix(marker.size());
          indented = stripped = true;
        }
    }
    if (indented) flush_paragraph();
    append_line(utf8::trim(body), line_no);
  }
  flush_paragraph();
  if (chapters.back().empty()) chapters.pop_back();
  if (chapters.empty()) throw EmptyInput();

  StructuredBook book;
  for (const auto& raw_chapter : chapters) {
    Chapter chapter;
    for (const ParagraphText& raw_para : raw_chapter) {
      Paragraph para = parse_paragraph(raw_para, rules);
      if (!para.styles.empty()) chapter.paragraphs.push_back(std::move(para));
    }
    if (!chapter.paragraphs.empty()) book.chapters.push_back(std::move(chapter));
  }
  if (book.chapters.empty()) throw EmptyInput();
  return book;
}

// ---------------------------------------------------------------------------
// corpus YAML

namespace {

std::string level_key(const char* prefix, size_t index) {
  if (index > 999)
    throw SchemaError(std::string(prefix) + " index " + std::to_string(index) +
                      " exceeds 999");
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, index);
  return buf;
}

void append_quoted(std::string& out, const std::string& s) {
  out += '"';
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
}

}  // namespace

std::string serialize_yaml(const StructuredBook& book) {
  if (book.chapters.empty()) throw SchemaError("book has no chapters");
  std::string out;
  for (size_t c = 0; c < book.chapters.size(); ++c) {
    const Chapter& chapter = book.chapters[c];
    if (chapter.paragraphs.empty())
      throw SchemaError(level_key("chapt", c) + " has no paragraphs");
    out += level_key("chapt", c) + ":\n";
    for (size_t p = 0; p < chapter.paragraphs.size(); ++p) {
      const Paragraph& para = chapter.paragraphs[p];
      if (para.styles.empty())
        throw SchemaError(level_key("parag", p) + " has no styles");
      out += "  " + level_key("parag", p) + ":\n";
      for (size_t s = 0; s < para.styles.size(); ++s) {
        const Style& style = para.styles[s];
        if (style.sentences.empty())
          throw SchemaError(level_key("style", s) + " has no sentences");
        out += "    " + level_key("style", s) + ":\n";
        out += "      kind: ";
        out += style.kind == StyleKind::spoken ? "spoken" : "narrative";
        out += "\n      sents:\n";
        for (const SentenceNode& sent : style.sentences) {
          out += "        - sent: ";
          append_quoted(out, sent.text);
          out += '\n';
          if (sent.time) {
            out += "          time: [" + to_compact_string(sent.time->start) +
                   ", " + to_compact_string(sent.time->end) + "]\n";
          }
        }
      }
    }
  }
  return out;
}

namespace {

/// Checks that the i-th key of a level is exactly prefixNNN for N == i.
void expect_key(const YAML::Node& key, const char* prefix, size_t index) {
  const std::string want = level_key(prefix, index);
  if (!key.IsScalar() || key.Scalar() != want)
    throw SchemaError("expected key '" + want + "', found '" +
                      (key.IsScalar() ? key.Scalar() : std::string("<non-scalar>")) +
                      "'");
}

SentenceNode parse_sentence(const YAML::Node& node) {
  if (!node.IsMap()) throw SchemaError("sentence entry is not a map");
  SentenceNode out;
  bool have_sent = false;
  for (const auto& kv : node) {
    const std::string key = kv.first.Scalar();
    if (key == "sent") {
      if (!kv.second.IsScalar()) throw SchemaError("'sent' is not a string");
      out.text = kv.second.Scalar();
      have_sent = true;
    } else if (key == "time") {
      if (!kv.second.IsSequence() || kv.second.size() != 2)
        throw SchemaError("'time' is not a [start, end] pair");
      double start, end;
      try {
        start = kv.second[0].as<double>();
        end = kv.second[1].as<double>();
      } catch (const YAML::Exception&) {
        throw SchemaError("'time' values are not numbers");
      }
      if (!(start >= 0.0) || !(end >= start))
        throw SchemaError("'time' pair [" + to_compact_string(start) + ", " +
                          to_compact_string(end) + "] is not ordered");
      out.time = TimeSpan{start, end};
    } else {
      throw SchemaError("unknown sentence key '" + key + "'");
    }
  }
  if (!have_sent) throw SchemaError("sentence entry lacks 'sent'");
  if (utf8::trim(out.text).empty()) throw SchemaError("empty sentence text");
  return out;
}

Style parse_style(const YAML::Node& node) {
  if (!node.IsMap()) throw SchemaError("style is not a map");
  Style out;
  bool have_kind = false, have_sents = false;
  for (const auto& kv : node) {
    const std::string key = kv.first.Scalar();
    if (key == "kind") {
      const std::string kind = kv.second.IsScalar() ? kv.second.Scalar() : "";
      if (kind == "narrative")
        out.kind = StyleKind::narrative;
      else if (kind == "spoken")
        out.kind = StyleKind::spoken;
      else
        throw SchemaError("unknown style kind '" + kind + "'");
      have_kind = true;
    } else if (key == "sents") {
      if (!kv.second.IsSequence()) throw SchemaError("'sents' is not a list");
      for (const auto& item : kv.second)
        out.sentences.push_back(parse_sentence(item));
      have_sents = true;
    } else {
      throw SchemaError("unknown style key '" + key + "'");
    }
  }
  if (!have_kind) throw SchemaError("style lacks 'kind'");
  if (!have_sents || out.sentences.empty())
    throw SchemaError("style has no sentences");
  return out;
}

}  // namespace

StructuredBook parse_yaml(const std::string& bytes) {
  YAML::Node root;
  try {
    root = YAML::Load(bytes);
  } catch (const YAML::Exception& e) {
    throw SchemaError(std::string("not parseable YAML: ") + e.what());
  }
  if (!root.IsMap() || root.size() == 0)
    throw SchemaError("document is not a non-empty map");

  StructuredBook book;
  size_t ci = 0;
  for (const auto& ckv : root) {
    expect_key(ckv.first, "chapt", ci++);
    if (!ckv.second.IsMap() || ckv.second.size() == 0)
      throw SchemaError(ckv.first.Scalar() + " is not a non-empty map");
    Chapter chapter;
    size_t pi = 0;
    for (const auto& pkv : ckv.second) {
      expect_key(pkv.first, "parag", pi++);
      if (!pkv.second.IsMap() || pkv.second.size() == 0)
        throw SchemaError(pkv.first.Scalar() + " is not a non-empty map");
      Paragraph para;
      size_t si = 0;
      for (const auto& skv : pkv.second) {
        expect_key(skv.first, "style", si++);
        para.styles.push_back(parse_style(skv.second));
      }
      chapter.paragraphs.push_back(std::move(para));
    }
    book.chapters.push_back(std::move(chapter));
  }
  return book;
}

}  // namespace bookalign
