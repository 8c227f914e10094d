#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xaiqa/corpus.hpp"
#include "xaiqa/embedder.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/explainer.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/rng.hpp"

namespace xaiqa {

inline constexpr std::string_view kDefaultQuestionTemplate =
    "Does the patient have {X} in their medical history?";
inline constexpr std::size_t kDefaultTopR = 5914;

// `base` marks pairs that come from an existing dataset rather than a
// generator; they only appear as inputs to mix().
enum class Method { xaiqa, xaiqa_pp, cosine, random, base };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::xaiqa: return "xaiqa";
    case Method::xaiqa_pp: return "xaiqa_pp";
    case Method::cosine: return "cosine";
    case Method::random: return "random";
    case Method::base: return "base";
  }
  return "";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::xaiqa, Method::xaiqa_pp, Method::cosine, Method::random, Method::base}) {
    if (method_name(m) == s) return m;
  }
  fail(ErrorKind::input, "unknown method \"" + std::string(s) + "\"");
}

struct AnswerSpan {
  std::size_t start = 0;  // scalar offsets into the document text
  std::size_t end = 0;
  std::string text;

  friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

struct QAPair {
  std::string question;
  AnswerSpan answer;
  std::string doc_id;
  std::string label_code;
  Method method = Method::xaiqa;
  double score = 0.0;
  std::string run_id;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

inline std::string render_question(std::string_view tmpl, std::string_view description) {
  static constexpr std::string_view placeholder = "{X}";
  std::string out;
  std::size_t pos = 0;
  bool found = false;
  for (;;) {
    const auto hit = tmpl.find(placeholder, pos);
    if (hit == std::string_view::npos) break;
    found = true;
    out.append(tmpl.substr(pos, hit - pos));
    out.append(description);
    pos = hit + placeholder.size();
  }
  if (!found) fail(ErrorKind::validation, "question template lacks the {X} placeholder");
  out.append(tmpl.substr(pos));
  return out;
}

// Deterministic run identifier derived from the method and its config.
inline std::string make_run_id(Method method, const Json& config) {
  return std::string(method_name(method)) + "-" +
         text::hex64(text::fnv1a64(config.dump())).substr(0, 12);
}

namespace detail {

inline QAPair make_pair(const Corpus& corpus, const Document& doc, std::size_t label,
                        std::size_t sentence, double score, Method method,
                        std::string_view tmpl, const std::string& run_id) {
  const auto& s = doc.sentences().at(sentence);
  const auto& entry = corpus.vocab()[label];
  return QAPair{render_question(tmpl, entry.description), AnswerSpan{s.start, s.end, s.text},
                doc.id(), entry.code, method, score, run_id};
}

inline void check_template(std::string_view tmpl) { (void)render_question(tmpl, ""); }

}  // namespace detail

// One pair per (document, positive label). The answer is the
// sentence with the highest importance for the label (lowest index on ties)
// and the score is that importance.
inline std::vector<QAPair> generate_xaiqa(const Corpus& corpus,
                                          const std::map<std::string, ImportanceMatrix>& importance,
                                          std::string_view tmpl = kDefaultQuestionTemplate,
                                          const std::string& run_id = {}) {
  detail::check_template(tmpl);
  std::vector<QAPair> pairs;
  const auto& docs = corpus.documents();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& labels = corpus.positives(d);
    if (labels.empty()) continue;
    const auto it = importance.find(docs[d].id());
    if (it == importance.end()) {
      fail(ErrorKind::input, "no importance matrix for document " + docs[d].id());
    }
    const auto& im = it->second;
    if (im.num_sentences != docs[d].sentences().size()) {
      fail(ErrorKind::input, "importance matrix for " + docs[d].id() + " has " +
                                 std::to_string(im.num_sentences) + " rows but the document has " +
                                 std::to_string(docs[d].sentences().size()) + " sentences");
    }
    for (auto j : labels) {
      const auto& code = corpus.vocab()[j].code;
      const auto col = std::find(im.label_codes.begin(), im.label_codes.end(), code);
      if (col == im.label_codes.end()) {
        fail(ErrorKind::input, "importance matrix for " + docs[d].id() + " lacks label " + code);
      }
      const auto c = static_cast<std::size_t>(col - im.label_codes.begin());
      std::size_t best = 0;
      for (std::size_t s = 1; s < im.num_sentences; ++s) {
        if (im.at(s, c) > im.at(best, c)) best = s;
      }
      pairs.push_back(detail::make_pair(corpus, docs[d], j, best, im.at(best, c), Method::xaiqa, tmpl, run_id));
    }
  }
  return pairs;
}

// Re-splits each answer sentence with the extended segmenter and
// keeps the piece most cosine-similar to the question (first piece on ties).
// The split runs on the document's own text at the recorded offsets, so the
// new answer remains an exact substring.
inline std::vector<QAPair> postprocess(const std::vector<QAPair>& pairs, const Corpus& corpus,
                                       const Embedder& embedder,
                                       const SegmenterConfig& split = SegmenterConfig::extended()) {
  std::vector<QAPair> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const Document* doc = corpus.find(pair.doc_id);
    if (!doc) fail(ErrorKind::input, "pair references unknown document " + pair.doc_id);
    if (pair.answer.end > doc->length() || pair.answer.start >= pair.answer.end ||
        doc->slice(pair.answer.start, pair.answer.end) != pair.answer.text) {
      fail(ErrorKind::input, "answer text no longer matches document " + pair.doc_id + " at [" +
                                 std::to_string(pair.answer.start) + ", " + std::to_string(pair.answer.end) + ")");
    }
    const auto pieces = segment(doc->slice(pair.answer.start, pair.answer.end), split);
    QAPair next = pair;
    next.method = Method::xaiqa_pp;
    if (pieces.size() > 1) {
      std::vector<std::string> texts;
      texts.reserve(pieces.size());
      for (const auto& p : pieces) texts.push_back(p.text);
      const auto question = embedder.embed_one(pair.question);
      const auto best = argmax_cosine(question, embedder.embed(texts));
      const auto& piece = pieces[best];
      next.answer = AnswerSpan{pair.answer.start + piece.start, pair.answer.start + piece.end, piece.text};
    } else if (pieces.size() == 1) {
      const auto& piece = pieces.front();
      next.answer = AnswerSpan{pair.answer.start + piece.start, pair.answer.start + piece.end, piece.text};
    }
    out.push_back(std::move(next));
  }
  return out;
}

// Baseline: the sentence whose embedding is closest to the label description.
inline std::vector<QAPair> generate_cosine(const Corpus& corpus, const Embedder& embedder,
                                           std::string_view tmpl = kDefaultQuestionTemplate,
                                           const std::string& run_id = {}) {
  detail::check_template(tmpl);
  std::vector<std::string> descriptions;
  for (const auto& e : corpus.vocab().entries()) descriptions.push_back(e.description);
  const auto label_vecs = embedder.embed(descriptions);

  std::vector<QAPair> pairs;
  const auto& docs = corpus.documents();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& labels = corpus.positives(d);
    if (labels.empty()) continue;
    if (docs[d].sentences().empty()) fail(ErrorKind::input, "document " + docs[d].id() + " has no sentences");
    std::vector<std::string> texts;
    for (const auto& s : docs[d].sentences()) texts.push_back(s.text);
    const auto sentence_vecs = embedder.embed(texts);
    for (auto j : labels) {
      double sim = 0.0;
      const auto best = argmax_cosine(label_vecs[j], sentence_vecs, &sim);
      pairs.push_back(detail::make_pair(corpus, docs[d], j, best, sim, Method::cosine, tmpl, run_id));
    }
  }
  return pairs;
}

// Baseline: a uniformly drawn sentence per (document, positive label).
inline std::vector<QAPair> generate_random(const Corpus& corpus, std::uint64_t seed,
                                           std::string_view tmpl = kDefaultQuestionTemplate,
                                           const std::string& run_id = {}) {
  detail::check_template(tmpl);
  Rng rng(seed);
  std::vector<QAPair> pairs;
  const auto& docs = corpus.documents();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& labels = corpus.positives(d);
    if (labels.empty()) continue;
    const auto m = docs[d].sentences().size();
    if (m == 0) fail(ErrorKind::input, "document " + docs[d].id() + " has no sentences");
    for (auto j : labels) {
      const auto s = static_cast<std::size_t>(uniform_below(rng, m));
      pairs.push_back(detail::make_pair(corpus, docs[d], j, s, 0.0, Method::random, tmpl, run_id));
    }
  }
  return pairs;
}

// Highest scores first; equal scores ordered by (doc_id, label_code). Scores
// from different methods are not comparable, so mixed input is rejected.
inline std::vector<QAPair> select_top_r(std::vector<QAPair> pairs, std::size_t r = kDefaultTopR) {
  if (r == 0) fail(ErrorKind::validation, "r must be positive");
  for (const auto& p : pairs) {
    if (p.method != pairs.front().method) {
      fail(ErrorKind::validation, "top-r selection mixes methods " + std::string(method_name(pairs.front().method)) +
                                      " and " + std::string(method_name(p.method)));
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const QAPair& a, const QAPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.label_code < b.label_code;
  });
  if (pairs.size() > r) pairs.resize(r);
  return pairs;
}

struct MixRatio {
  std::size_t base = 1;
  std::size_t synthetic = 1;
};

inline MixRatio parse_ratio(std::string_view s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string_view::npos) throw std::invalid_argument("no colon");
    std::size_t used = 0;
    const std::string a(s.substr(0, colon));
    const std::string b(s.substr(colon + 1));
    const auto base = std::stoul(a, &used);
    if (used != a.size()) throw std::invalid_argument("trailing");
    const auto syn = std::stoul(b, &used);
    if (used != b.size()) throw std::invalid_argument("trailing");
    return {base, syn};
  } catch (const std::logic_error&) {
    fail(ErrorKind::validation, "ratio must look like BASE:SYNTHETIC, got \"" + std::string(s) + "\"");
  }
}

// Draws floor(|base| * synthetic / base_part) synthetic pairs without
// replacement and shuffles them into the base set. A zero synthetic part
// returns `base` untouched.
inline std::vector<QAPair> mix(const std::vector<QAPair>& base, const std::vector<QAPair>& synthetic,
                               MixRatio ratio, std::uint64_t seed) {
  if (ratio.base == 0) fail(ErrorKind::validation, "the base part of the ratio must be positive");
  if (ratio.synthetic == 0) return base;
  const std::size_t want = base.size() * ratio.synthetic / ratio.base;
  if (want > synthetic.size()) {
    fail(ErrorKind::validation, "ratio " + std::to_string(ratio.base) + ":" + std::to_string(ratio.synthetic) +
                                    " needs " + std::to_string(want) + " synthetic pairs but only " +
                                    std::to_string(synthetic.size()) + " are available");
  }
  Rng rng(seed);
  std::vector<QAPair> out = base;
  for (auto i : sample_without_replacement(rng, synthetic.size(), want)) out.push_back(synthetic[i]);
  shuffle(rng, out);
  return out;
}

// Pairs file record:
// {"question","answer_text","answer_start","answer_end","doc_id","label_code","method","score","run_id"}
inline Json to_json(const QAPair& p) {
  return Json{{"question", p.question},         {"answer_text", p.answer.text},
              {"answer_start", p.answer.start}, {"answer_end", p.answer.end},
              {"doc_id", p.doc_id},             {"label_code", p.label_code},
              {"method", method_name(p.method)}, {"score", p.score},
              {"run_id", p.run_id}};
}

inline QAPair pair_from_json(const Json& j) {
  QAPair p;
  p.question = required<std::string>(j, "question");
  p.answer.text = required<std::string>(j, "answer_text");
  p.answer.start = required<std::size_t>(j, "answer_start");
  p.answer.end = required<std::size_t>(j, "answer_end");
  p.doc_id = required<std::string>(j, "doc_id");
  p.label_code = j.value("label_code", std::string{});
  p.method = parse_method(required<std::string>(j, "method"));
  p.score = j.value("score", 0.0);
  p.run_id = j.value("run_id", std::string{});
  if (p.answer.start >= p.answer.end) fail(ErrorKind::input, "answer_start must be < answer_end");
  return p;
}

inline std::vector<QAPair> load_pairs(const std::filesystem::path& path) {
  std::vector<QAPair> out;
  read_jsonl(path, [&](const Json& r, std::size_t) { out.push_back(pair_from_json(r)); });
  return out;
}

inline void save_pairs(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  std::vector<Json> records;
  records.reserve(pairs.size());
  for (const auto& p : pairs) records.push_back(to_json(p));
  write_jsonl(path, records);
}

// Item identifier for a pair in evaluation and prompt files; safe as a file name.
inline std::string pair_item_id(const QAPair& p) { return p.doc_id + "--" + p.label_code; }

// Builtin embedder fitted on every sentence of the corpus.
inline HashingEmbedder fit_corpus_embedder(const Corpus& corpus, std::size_t dim = 512, std::uint64_t seed = 0) {
  std::vector<std::string> texts;
  for (const auto& doc : corpus.documents()) {
    for (const auto& s : doc.sentences()) texts.push_back(s.text);
  }
  HashingEmbedder e(dim, seed);
  e.fit(texts);
  return e;
}

// Groundedness check: the answer is the exact document substring at its offsets.
inline bool is_grounded(const QAPair& p, const Corpus& corpus) {
  const Document* doc = corpus.find(p.doc_id);
  return doc && p.answer.start < p.answer.end && p.answer.end <= doc->length() &&
         doc->slice(p.answer.start, p.answer.end) == p.answer.text;
}

}  // namespace xaiqa
