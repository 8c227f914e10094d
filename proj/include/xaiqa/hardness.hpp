#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/porter.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

inline constexpr std::string_view kStopwordListVersion = "en-nltk179-alnum-v1";

// The common 179-word English list with the apostrophe forms removed; the
// tokenizer splits on apostrophes, so their pieces ("don", "t", "ll", ...)
// are already present.
inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
      "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
      "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
      "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
      "for", "with", "about", "against", "between", "into", "through", "during", "before",
      "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such",
      "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can",
      "will", "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain",
      "aren", "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn",
      "mustn", "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn"};
  return words;
}

// Covers the default question template so its boilerplate never counts as overlap.
inline const std::set<std::string>& default_question_words() {
  static const std::set<std::string> words = {
      "who", "what", "when", "where", "why", "how", "does", "do", "did", "is", "are",
      "was", "were", "has", "have", "had", "patient", "patient's", "history", "medical"};
  return words;
}

struct QcloConfig {
  std::set<std::string> stopwords = default_stopwords();
  std::set<std::string> question_words = default_question_words();
  bool apply_stemming = true;
};

inline Json to_json(const QcloConfig& c) {
  return Json{{"stopword_list_version", kStopwordListVersion},
              {"stopwords", c.stopwords},
              {"question_words", c.question_words},
              {"apply_stemming", c.apply_stemming},
              {"tokenizer", text::kTokenizerVersion}};
}

// Tokenize, drop stopwords and question words, stem. Both sides of QCLO use
// this same normalisation.
inline std::set<std::string> qclo_terms(std::string_view s, const QcloConfig& cfg) {
  std::set<std::string> out;
  for (auto& tok : text::tokenize(s)) {
    if (cfg.stopwords.count(tok) || cfg.question_words.count(tok)) continue;
    out.insert(cfg.apply_stemming ? porter_stem(tok) : tok);
  }
  return out;
}

// |Q ∩ C| / |Q| over filtered term sets; nullopt when the filtered question
// is empty.
inline std::optional<double> qclo(std::string_view question, std::string_view context,
                                  const QcloConfig& cfg = {}) {
  const auto q = qclo_terms(question, cfg);
  if (q.empty()) return std::nullopt;
  const auto c = qclo_terms(context, cfg);
  std::size_t hit = 0;
  for (const auto& t : q) hit += c.count(t);
  return static_cast<double>(hit) / static_cast<double>(q.size());
}

struct HardnessRecord {
  std::string item_id;
  double qclo = 0.0;

  friend bool operator==(const HardnessRecord&, const HardnessRecord&) = default;
};

// Lowest-overlap items first, ties by item_id; keeps floor(fraction * N)
// items but at least one.
inline std::vector<HardnessRecord> hardest_subset(std::vector<HardnessRecord> items, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::validation, "fraction must lie in (0, 1]");
  std::sort(items.begin(), items.end(), [](const HardnessRecord& a, const HardnessRecord& b) {
    if (a.qclo != b.qclo) return a.qclo < b.qclo;
    return a.item_id < b.item_id;
  });
  if (items.empty()) return items;
  // the epsilon absorbs representation error in products like 0.29 * 100
  auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(items.size()) + 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, items.size());
  items.resize(keep);
  return items;
}

inline Json to_json(const HardnessRecord& r) { return Json{{"item_id", r.item_id}, {"qclo", r.qclo}}; }

inline std::vector<HardnessRecord> load_hardness(const std::filesystem::path& path) {
  std::vector<HardnessRecord> out;
  read_jsonl(path, [&](const Json& r, std::size_t) {
    out.push_back({required<std::string>(r, "item_id"), required<double>(r, "qclo")});
  });
  return out;
}

inline void save_hardness(const std::filesystem::path& path, const std::vector<HardnessRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

}  // namespace xaiqa
