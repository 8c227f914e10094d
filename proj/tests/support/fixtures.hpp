#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xaiqa/xaiqa.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using namespace xaiqa;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("xaiqa-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline bool has_token(const std::string& text, const std::string& token) {
  for (const auto& t : text::tokenize(text)) {
    if (t == token) return true;
  }
  return false;
}

// P(label) = 1 iff the label's keyword occurs as a token.
inline FunctionScorer keyword_scorer(std::vector<std::string> labels, std::vector<std::string> keywords) {
  return FunctionScorer(std::move(labels), [keywords](const std::string& t) {
    std::vector<double> out;
    for (const auto& k : keywords) out.push_back(has_token(t, k) ? 1.0 : 0.0);
    return out;
  });
}

// The 3-sentence fever document; only the middle sentence mentions fever.
inline Document fever_doc() {
  return Document("fever", "Patient seen in clinic today. She reports fever since Monday. Plan reviewed with family.");
}

struct LabelSpec {
  std::string code;
  std::string description;
  std::vector<std::string> signal_sentences;  // all contain the label's drug token
  std::string drug;
};

inline const std::vector<LabelSpec>& planted_labels() {
  static const std::vector<LabelSpec> labels = {
      {"E03", "hypothyroidism", {"Continues levothyroxine 75 mcg every morning.", "Levothyroxine dose was increased last week."}, "levothyroxine"},
      {"I48", "atrial fibrillation", {"Apixaban 5 mg twice daily was refilled.", "She remains on apixaban without bleeding."}, "apixaban"},
      {"M10", "gout", {"Allopurinol was restarted after the flare settled.", "Takes allopurinol 300 mg at night."}, "allopurinol"},
      {"F32", "major depressive disorder", {"Sertraline was titrated up to 100 mg.", "Reports better mood on sertraline."}, "sertraline"},
      {"G40", "epilepsy", {"Levetiracetam levels were therapeutic.", "No seizures since levetiracetam was started."}, "levetiracetam"},
      {"I50", "congestive cardiac failure", {"Furosemide 40 mg was given for swelling.", "Weight is stable on oral furosemide."}, "furosemide"},
  };
  return labels;
}

inline const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> filler = {
      "Arrived by car with a relative.",
      "Vital signs were reviewed at intake.",
      "No acute distress was observed.",
      "Denies recent travel or sick contacts.",
      "Lungs are clear on auscultation.",
      "Abdomen soft and nontender.",
      "Lives alone and walks daily.",
      "Follow up was arranged in two weeks.",
      "Diet was discussed with the dietitian.",
      "Immunizations are up to date.",
      "Skin is warm and dry.",
      "Sleep has been restful overall.",
      "Labs were drawn this morning.",
      "Discussed return precautions at length.",
      "Appetite is unchanged from baseline.",
      "Ambulates without assistance.",
  };
  return filler;
}

struct PlantedCorpus {
  std::vector<Json> corpus_records;
  std::vector<Json> vocab_records;
  // (doc_id, label_code) -> text of the planted sentence
  std::map<std::pair<std::string, std::string>, std::string> planted;
  // (doc_id, label_code) -> text of the verbatim-description sentence (divergence fixture only)
  std::map<std::pair<std::string, std::string>, std::string> verbatim;

  Corpus build(const SegmenterConfig& cfg = {}) const {
    LabelVocabulary vocab;
    for (const auto& v : vocab_records) vocab.add({v["code"].get<std::string>(), v["description"].get<std::string>()});
    std::vector<Document> docs;
    std::vector<LabelAssignment> assignments;
    for (const auto& r : corpus_records) {
      const auto codes = r["codes"].get<std::vector<std::string>>();
      docs.emplace_back(r["doc_id"].get<std::string>(), r["text"].get<std::string>(), cfg);
      assignments.push_back({r["doc_id"].get<std::string>(), std::set<std::string>(codes.begin(), codes.end())});
    }
    return Corpus(std::move(docs), std::move(vocab), std::move(assignments));
  }

  void write(const fs::path& corpus_path, const fs::path& vocab_path) const {
    write_jsonl(corpus_path, corpus_records);
    write_jsonl(vocab_path, vocab_records);
  }
};

inline std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Each document is positive for one or two labels and carries one signal
// sentence per positive label among neutral filler. With `with_verbatim`,
// every document also states every label description verbatim, positive or
// not, so those sentences carry no class signal.
inline PlantedCorpus planted_corpus(std::size_t n_docs, std::uint64_t seed, bool with_verbatim = false) {
  const auto& labels = planted_labels();
  const auto& filler = filler_sentences();
  Rng rng(seed);
  PlantedCorpus out;
  for (const auto& l : labels) out.vocab_records.push_back(Json{{"code", l.code}, {"description", l.description}});
  for (std::size_t d = 0; d < n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "doc%03zu", d);
    std::set<std::size_t> pos = {d % labels.size()};
    if (bernoulli(rng, 0.4)) pos.insert(static_cast<std::size_t>(uniform_below(rng, labels.size())));
    std::vector<std::string> sentences;
    for (auto i : sample_without_replacement(rng, filler.size(), 3 + uniform_below(rng, 3))) {
      sentences.push_back(filler[i]);
    }
    std::vector<std::pair<std::string, std::string>> planted;
    for (auto j : pos) {
      const auto& s = labels[j].signal_sentences[uniform_below(rng, labels[j].signal_sentences.size())];
      sentences.push_back(s);
      planted.push_back({labels[j].code, s});
    }
    if (with_verbatim) {
      for (const auto& l : labels) sentences.push_back(capitalized(l.description) + ".");
    }
    shuffle(rng, sentences);
    std::string body;
    for (const auto& s : sentences) body += (body.empty() ? "" : " ") + s;
    std::vector<std::string> codes;
    for (auto j : pos) codes.push_back(labels[j].code);
    out.corpus_records.push_back(Json{{"doc_id", id}, {"text", body}, {"codes", codes}});
    for (const auto& [code, s] : planted) out.planted[{id, code}] = s;
    if (with_verbatim) {
      for (auto j : pos) out.verbatim[{id, labels[j].code}] = capitalized(labels[j].description) + ".";
    }
  }
  return out;
}

// A randomized keyword scorer: each label's probability is a logistic
// function of which keywords appear, with an interaction term so the
// response is not additive.
struct RandomKeywordScorer {
  std::vector<std::string> labels;
  std::vector<std::string> keywords;
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  std::vector<double> interaction;

  FunctionScorer scorer() const {
    return FunctionScorer(labels, [*this](const std::string& t) {
      std::vector<char> present;
      for (const auto& k : keywords) present.push_back(has_token(t, k) ? 1 : 0);
      std::vector<double> out;
      for (std::size_t j = 0; j < labels.size(); ++j) {
        double z = bias[j];
        for (std::size_t k = 0; k < keywords.size(); ++k) z += present[k] ? weights[j][k] : 0.0;
        if (present[0] && present[1]) z += interaction[j];
        out.push_back(sigmoid(z));
      }
      return out;
    });
  }
};

struct ExplainFixture {
  Document doc;
  RandomKeywordScorer scorer;
};

inline ExplainFixture random_explain_fixture(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> keywords = {"cough", "rash", "fever", "nausea", "edema"};
  const std::vector<std::string> fillers = {"seen", "today", "stable", "reviewed", "home", "plan", "noted", "clinic"};
  const std::size_t m = 1 + uniform_below(rng, 6);
  std::string body;
  for (std::size_t s = 0; s < m; ++s) {
    std::string sentence = "Visit";
    const auto words = 2 + uniform_below(rng, 4);
    for (std::size_t w = 0; w < words; ++w) {
      const bool kw = bernoulli(rng, 0.35);
      sentence += " " + (kw ? keywords[uniform_below(rng, keywords.size())] : fillers[uniform_below(rng, fillers.size())]);
    }
    body += (body.empty() ? "" : " ") + sentence + ".";
  }
  RandomKeywordScorer sc;
  sc.labels = {"A", "B"};
  sc.keywords = keywords;
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> w;
    for (std::size_t k = 0; k < keywords.size(); ++k) w.push_back(uniform01(rng) * 6.0 - 3.0);
    sc.weights.push_back(w);
    sc.bias.push_back(uniform01(rng) * 2.0 - 1.0);
    sc.interaction.push_back(uniform01(rng) * 4.0 - 2.0);
  }
  return {Document("fx" + std::to_string(seed), body), sc};
}

struct ParseFixture {
  std::string raw;
  bool recover;
  bool failed;
  std::string span;
  std::optional<long long> start;
};

// Model responses and the prediction each must parse to.
inline const std::vector<ParseFixture>& parse_fixtures() {
  static const std::vector<ParseFixture> rows = {
      {R"({"start_idx": 35, "span_text": "on metformin"})", false, false, "on metformin", 35},
      {R"({"span_text": "on metformin", "start_idx": 35})", false, false, "on metformin", 35},
      {R"(Here is the answer: {"start_idx": 3, "span_text": "gout"} hope it helps)", false, false, "gout", 3},
      {"```json\n{\"start_idx\": 0, \"span_text\": \"CKD\"}\n```", false, false, "CKD", 0},
      {R"({"start_idx": null, "span_text": ""})", false, false, "", std::nullopt},
      {R"({"span_text": "no index"})", false, false, "no index", std::nullopt},
      {R"({"start_idx": "12", "span_text": "x"})", false, false, "x", std::nullopt},
      {R"({"start_idx": 5, "span_text": "a {brace} inside"})", false, false, "a {brace} inside", 5},
      {R"({"start_idx": 5, "span_text": "quote \" inside"})", false, false, "quote \" inside", 5},
      {R"({"note": "x"} then {"start_idx": 9, "span_text": "second"})", false, false, "second", 9},
      {R"({"start_idx": 1, "span_text": "first"} {"start_idx": 2, "span_text": "second"})", false, false, "first", 1},
      {R"({"outer": {"start_idx": 4, "span_text": "nested"}})", false, false, "nested", 4},
      {R"({"start_idx": 2, "span_text": "café"})", false, false, "café", 2},
      {"I cannot find an answer.", false, true, "", std::nullopt},
      {"", false, true, "", std::nullopt},
      {R"({"start_idx": 4, "span_text": "cut off")", false, true, "", std::nullopt},
      {R"({"start_idx": 4, "span_text": "cut off")", true, false, "cut off", 4},
      {R"(prose {"start_idx": 8, "span_text": "deep", "meta": {"k": 1})", true, false, "deep", 8},
      {R"({"start_idx": 4, "span_text": 17})", false, true, "", std::nullopt},
      {R"([{"start_idx": 4, "span_text": "in array"}])", false, false, "in array", 4},
  };
  return rows;
}

struct EmFixture {
  std::string pred;
  std::string ref;
  double em;
};

inline const std::vector<EmFixture>& em_fixtures() {
  static const std::vector<EmFixture> rows = {
      {"Hypertension", "hypertension", 1},
      {"hypertension.", "Hypertension", 1},
      {"  chronic   kidney\tdisease ", "chronic kidney disease", 1},
      {"type-2 diabetes", "type 2 diabetes", 1},
      {"(asthma)", "asthma", 1},
      {"The patient", "patient", 1},
      {"an ulcer", "a ulcer", 1},
      {"", "", 1},
      {"kidney", "chronic kidney disease", 0},
      {"chronic kidney disease", "kidney", 0},
      {"diabetes 1", "diabetes 2", 0},
      {"", "asthma", 0},
  };
  return rows;
}

// Post-processing cases. `sentence` indexes the default-mode sentence used as
// the answer; `expected` is the segment that must win under an unfitted
// embedder with the default question template. Segments other than the
// expected one avoid the template's own words.
struct SplitFixture {
  std::string text;
  std::string description;
  std::size_t sentence;
  std::string expected;
};

inline const std::vector<SplitFixture>& split_fixtures() {
  static const std::vector<SplitFixture> rows = {
      // only the first segment overlaps
      {"Seen today. Known esophageal reflux; sleeps poorly at night. Home.", "esophageal reflux", 1,
       "Known esophageal reflux;"},
      {"Problems: 1) asthma 2) gout 3) anemia.", "gout", 0, "2) gout"},
      {"Meds reviewed • aspirin daily • levothyroxine for hypothyroidism • vitamin D.", "hypothyroidism", 0,
       "• levothyroxine for hypothyroidism"},
      {"Assessment - stable angina - chronic kidney disease - obesity.", "chronic kidney disease", 0,
       "- chronic kidney disease"},
      // identical segments tie; the first wins
      {"Gout flare; gout flare; end.", "gout", 0, "Gout flare;"},
      // no segment overlaps; the first wins
      {"Walks daily; sleeps well; eats fine.", "anemia", 0, "Walks daily;"},
      // nothing to split
      {"Chronic anemia noted.", "anemia", 0, "Chronic anemia noted."},
      // 2/sqrt(13) for the long segment vs 1/sqrt(2) for the short one
      {"Plan: continue rate control for atrial fibrillation with metoprolol and warfarin at home; fibrillation resolved.",
       "atrial fibrillation", 0, "fibrillation resolved."},
      // term frequency counts: 3/sqrt(10) vs 1/sqrt(3)
      {"Gout flare today; gout gout gout flare.", "gout", 0, "gout gout gout flare."},
      {"Problems 10) asthma 11) renal failure 12) obesity.", "renal failure", 0, "11) renal failure"},
  };
  return rows;
}

}  // namespace fixtures
