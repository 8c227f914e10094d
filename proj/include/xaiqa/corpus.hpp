#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

// Offsets are counted in Unicode scalar values; `end` is exclusive.
struct SentenceSpan {
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;

  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

enum class SegmenterMode { standard, extended };

// Sentence breaking is rule based:
//  * a whitespace-delimited word ending in a terminal token ends a sentence,
//    unless the whole word is a listed abbreviation;
//  * in extended mode a word that is itself a list marker ("•", "-", "3)",
//    "12)") starts a new segment.
// Terminal tokens are '.', '?', '!' in both modes; extended adds ';' and any
// `extra_break_tokens`.
struct SegmenterConfig {
  SegmenterMode mode = SegmenterMode::standard;
  std::vector<std::string> extra_break_tokens;
  std::vector<std::string> abbreviations = {"Dr.", "Mr.", "Mrs.", "vs.", "e.g.", "i.e."};

  static SegmenterConfig extended() {
    SegmenterConfig cfg;
    cfg.mode = SegmenterMode::extended;
    return cfg;
  }
};

// The extended break-token list, in its canonical order.
inline const std::vector<std::string>& extended_break_tokens() {
  static const std::vector<std::string> tokens = {
      ".", "?", "!", "•", "-", ";", "0)", "1)", "2)", "3)", "4)",
      "5)", "6)", "7)", "8)", "9)"};
  return tokens;
}

namespace detail {

inline bool ends_with(std::u32string_view word, std::u32string_view suffix) {
  return word.size() >= suffix.size() &&
         word.substr(word.size() - suffix.size()) == suffix;
}

inline std::u32string to_u32(std::string_view s) {
  std::u32string out;
  for (const auto& sc : text::decode(s)) out.push_back(sc.cp);
  return out;
}

inline bool all_digits(std::u32string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char32_t c) { return c >= U'0' && c <= U'9'; });
}

struct BreakRules {
  std::vector<std::u32string> terminals;
  std::vector<std::u32string> markers;
  std::vector<std::u32string> abbreviations;

  explicit BreakRules(const SegmenterConfig& cfg) {
    terminals = {U".", U"?", U"!"};
    if (cfg.mode == SegmenterMode::extended) {
      for (const auto& tok : extended_break_tokens()) {
        const auto t = to_u32(tok);
        const bool is_marker = t == U"•" || t == U"-" || (t.size() == 2 && t[1] == U')');
        if (is_marker) {
          markers.push_back(t);
        } else if (std::find(terminals.begin(), terminals.end(), t) == terminals.end()) {
          terminals.push_back(t);
        }
      }
    }
    for (const auto& tok : cfg.extra_break_tokens) {
      if (!tok.empty()) terminals.push_back(to_u32(tok));
    }
    for (const auto& a : cfg.abbreviations) abbreviations.push_back(to_u32(a));
  }

  bool ends_sentence(std::u32string_view word) const {
    for (const auto& t : terminals) {
      if (ends_with(word, t)) {
        return std::find(abbreviations.begin(), abbreviations.end(), word) == abbreviations.end();
      }
    }
    return false;
  }

  bool starts_item(std::u32string_view word) const {
    for (const auto& m : markers) {
      if (word == m) return true;
      // numbered markers also match multi-digit numbers: "10)", "12)"
      if (m.size() == 2 && m[1] == U')' && word.size() > 2 && word.back() == U')' &&
          ends_with(word, m) && all_digits(word.substr(0, word.size() - 1))) {
        return true;
      }
    }
    return false;
  }
};

}  // namespace detail

// Deterministic; spans are ordered, non-overlapping, trimmed, and cover every
// non-whitespace scalar exactly once. Whitespace-only input yields no spans.
inline std::vector<SentenceSpan> segment(std::string_view input, const SegmenterConfig& cfg = {}) {
  const auto scalars = text::decode(input);
  const std::size_t n = scalars.size();
  const detail::BreakRules rules(cfg);

  std::vector<std::size_t> cuts{0};
  std::size_t i = 0;
  while (i < n) {
    if (text::is_space(scalars[i].cp)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::u32string word;
    while (j < n && !text::is_space(scalars[j].cp)) word.push_back(scalars[j++].cp);
    if (rules.starts_item(word)) cuts.push_back(i);
    if (rules.ends_sentence(word)) cuts.push_back(j);
    i = j;
  }
  cuts.push_back(n);

  std::vector<SentenceSpan> spans;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    std::size_t b = cuts[c];
    std::size_t e = cuts[c + 1];
    while (b < e && text::is_space(scalars[b].cp)) ++b;
    while (e > b && text::is_space(scalars[e - 1].cp)) --e;
    if (b >= e) continue;
    const std::size_t bb = scalars[b].byte_begin;
    spans.push_back({spans.size(), b, e, std::string(input.substr(bb, scalars[e - 1].byte_end - bb))});
  }
  return spans;
}

class Document {
 public:
  Document(std::string doc_id, std::string text, const SegmenterConfig& cfg = {})
      : doc_id_(std::move(doc_id)), text_(std::move(text)), index_(text_) {
    sentences_ = segment(text_, cfg);
  }

  const std::string& id() const { return doc_id_; }
  const std::string& text() const { return text_; }
  const std::vector<SentenceSpan>& sentences() const { return sentences_; }

  // Length in Unicode scalars.
  std::size_t length() const { return index_.size(); }

  // Substring over scalar offsets [start, end).
  std::string slice(std::size_t start, std::size_t end) const {
    if (start > end || end > length()) {
      fail(ErrorKind::validation, "offsets [" + std::to_string(start) + ", " + std::to_string(end) +
                                      ") out of range for document " + doc_id_);
    }
    const auto b = index_.byte_at(start);
    return text_.substr(b, index_.byte_at(end) - b);
  }

 private:
  std::string doc_id_;
  std::string text_;
  text::Utf8Index index_;
  std::vector<SentenceSpan> sentences_;
};

struct LabelEntry {
  std::string code;
  std::string description;
};

class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<LabelEntry> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  void add(LabelEntry entry) {
    if (entry.code.empty()) fail(ErrorKind::input, "label code must be non-empty");
    if (text::trim(entry.description).empty()) {
      fail(ErrorKind::input, "label " + entry.code + " has an empty description");
    }
    if (index_.count(entry.code)) fail(ErrorKind::input, "duplicate label code " + entry.code);
    index_.emplace(entry.code, entries_.size());
    entries_.push_back(std::move(entry));
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<LabelEntry>& entries() const { return entries_; }
  const LabelEntry& operator[](std::size_t i) const { return entries_.at(i); }

  std::optional<std::size_t> find(const std::string& code) const {
    const auto it = index_.find(code);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> codes() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.code);
    return out;
  }

 private:
  std::vector<LabelEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LabelAssignment {
  std::string doc_id;
  std::set<std::string> positive_codes;
};

// Documents, vocabulary and assignments with the cross-references resolved.
// `assignments[i]` belongs to `documents[i]`.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, LabelVocabulary vocab,
         std::vector<LabelAssignment> assignments)
      : documents_(std::move(documents)), vocab_(std::move(vocab)), assignments_(std::move(assignments)) {
    if (documents_.size() != assignments_.size()) {
      fail(ErrorKind::validation, "documents and assignments differ in length");
    }
    positives_.resize(documents_.size());
    for (std::size_t d = 0; d < documents_.size(); ++d) {
      if (assignments_[d].doc_id != documents_[d].id()) {
        fail(ErrorKind::validation, "assignment order does not match document order at " +
                                        documents_[d].id());
      }
      if (!doc_index_.emplace(documents_[d].id(), d).second) {
        fail(ErrorKind::input, "duplicate doc_id " + documents_[d].id());
      }
      for (const auto& code : assignments_[d].positive_codes) {
        const auto j = vocab_.find(code);
        if (!j) {
          fail(ErrorKind::input, "document " + documents_[d].id() + " references unknown label code " + code);
        }
        positives_[d].push_back(*j);
      }
      std::sort(positives_[d].begin(), positives_[d].end());
    }
  }

  const std::vector<Document>& documents() const { return documents_; }
  const LabelVocabulary& vocab() const { return vocab_; }
  const std::vector<LabelAssignment>& assignments() const { return assignments_; }

  // Positive label indices of document `d`, in vocabulary order.
  const std::vector<std::size_t>& positives(std::size_t d) const { return positives_.at(d); }

  bool has_label(std::size_t d, std::size_t label) const {
    const auto& p = positives_.at(d);
    return std::binary_search(p.begin(), p.end(), label);
  }

  const Document* find(const std::string& doc_id) const {
    const auto it = doc_index_.find(doc_id);
    return it == doc_index_.end() ? nullptr : &documents_[it->second];
  }

 private:
  std::vector<Document> documents_;
  LabelVocabulary vocab_;
  std::vector<LabelAssignment> assignments_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::vector<std::vector<std::size_t>> positives_;
};

inline LabelVocabulary load_vocabulary(const std::filesystem::path& path) {
  LabelVocabulary vocab;
  read_jsonl(path, [&](const Json& r, std::size_t line) {
    try {
      vocab.add({required<std::string>(r, "code"), required<std::string>(r, "description")});
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return vocab;
}

// Corpus records: {"doc_id": str, "text": str, "codes": [str, ...]}.
inline Corpus load_corpus(const std::filesystem::path& corpus_path,
                          const std::filesystem::path& vocab_path,
                          const SegmenterConfig& cfg = {}) {
  auto vocab = load_vocabulary(vocab_path);
  std::vector<Document> docs;
  std::vector<LabelAssignment> assignments;
  std::set<std::string> seen;
  read_jsonl(corpus_path, [&](const Json& r, std::size_t line) {
    const auto where = corpus_path.string() + ":" + std::to_string(line) + ": ";
    try {
      auto doc_id = required<std::string>(r, "doc_id");
      auto body = required<std::string>(r, "text");
      auto codes = required<std::vector<std::string>>(r, "codes");
      if (doc_id.empty()) fail(ErrorKind::input, "empty doc_id");
      if (!seen.insert(doc_id).second) fail(ErrorKind::input, "duplicate doc_id " + doc_id);
      for (const auto& c : codes) {
        if (!vocab.find(c)) fail(ErrorKind::input, "unknown label code " + c + " in document " + doc_id);
      }
      assignments.push_back({doc_id, std::set<std::string>(codes.begin(), codes.end())});
      docs.emplace_back(std::move(doc_id), std::move(body), cfg);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  });
  return Corpus(std::move(docs), std::move(vocab), std::move(assignments));
}

}  // namespace xaiqa
