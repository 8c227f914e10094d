#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xaiqa/classifier.hpp"
#include "xaiqa/corpus.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/parallel.hpp"
#include "xaiqa/rng.hpp"

namespace xaiqa {

struct MspConfig {
  int num_iterations = 100;
  double mask_probability = 0.1;
  std::string mask_token = "[MASK]";
  std::uint64_t seed = 0;
  int min_count_guard = 5;
  // Execution only; results do not depend on these.
  std::size_t batch_size = 64;
  std::size_t workers = 1;
};

inline void validate(const MspConfig& cfg) {
  if (cfg.num_iterations < 1) fail(ErrorKind::validation, "num_iterations must be >= 1");
  if (!(cfg.mask_probability > 0.0 && cfg.mask_probability < 1.0)) {
    fail(ErrorKind::validation, "mask_probability must lie in (0, 1)");
  }
  if (cfg.min_count_guard < 1) fail(ErrorKind::validation, "min_count_guard must be >= 1");
  if (cfg.batch_size < 1) fail(ErrorKind::validation, "batch_size must be >= 1");
}

inline Json to_json(const MspConfig& c) {
  return Json{{"num_iterations", c.num_iterations},
              {"mask_probability", c.mask_probability},
              {"mask_token", c.mask_token},
              {"seed", c.seed},
              {"min_count_guard", c.min_count_guard}};
}

// Sentence x label attribution scores for one document.
struct ImportanceMatrix {
  std::string doc_id;
  std::vector<std::string> label_codes;
  std::size_t num_sentences = 0;
  std::vector<double> scores;  // num_sentences x labels, row-major
  std::vector<std::size_t> counts_masked;
  std::vector<std::size_t> counts_unmasked;
  std::size_t scorer_calls = 0;

  double at(std::size_t sentence, std::size_t label) const {
    return scores[sentence * label_codes.size() + label];
  }

  std::vector<double> column(std::size_t label) const {
    std::vector<double> out(num_sentences);
    for (std::size_t s = 0; s < num_sentences; ++s) out[s] = at(s, label);
    return out;
  }
};

// One mask pattern: masked[s] != 0 means sentence s is replaced.
using MaskPattern = std::vector<char>;

// Rebuilds the document with each masked sentence replaced in place by the
// mask token; inter-sentence whitespace is preserved.
inline std::string perturb(const Document& doc, const MaskPattern& masked, const std::string& mask_token) {
  const auto& sentences = doc.sentences();
  std::string out;
  out.reserve(doc.text().size());
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    out += doc.slice(cursor, sentences[s].start);
    out += masked[s] ? mask_token : sentences[s].text;
    cursor = sentences[s].end;
  }
  out += doc.slice(cursor, doc.length());
  return out;
}

namespace detail {

// Scores every pattern and reduces to unmasked-mean minus masked-mean. The
// reduction walks patterns in order, so the result does not depend on how
// scoring was batched or parallelised.
inline ImportanceMatrix tally(const Document& doc, const Scorer& scorer,
                              const std::vector<MaskPattern>& patterns,
                              const std::string& mask_token, std::size_t batch_size,
                              std::size_t workers) {
  const std::size_t m = doc.sentences().size();
  const std::size_t n_labels = scorer.label_codes().size();
  const std::size_t n = patterns.size();
  std::vector<double> probs(n * n_labels);

  const std::size_t n_batches = (n + batch_size - 1) / batch_size;
  parallel_for(n_batches, workers, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(n, begin + batch_size);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) texts.push_back(perturb(doc, patterns[k], mask_token));
    ScoreMatrix scores;
    try {
      scores = scorer.score(texts);
    } catch (const Error& e) {
      fail(e.kind(), "scorer failed on iterations [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of document " + doc.id() + ": " + e.what());
    }
    if (scores.rows() != end - begin || scores.cols() != n_labels) {
      fail(ErrorKind::validation, "scorer returned a matrix of the wrong shape for iterations [" +
                                      std::to_string(begin) + ", " + std::to_string(end) + ")");
    }
    for (std::size_t k = begin; k < end; ++k) {
      for (std::size_t j = 0; j < n_labels; ++j) {
        const double p = scores(k - begin, j);
        if (!std::isfinite(p)) {
          fail(ErrorKind::numeric, "scorer returned a non-finite value at iteration " + std::to_string(k));
        }
        probs[k * n_labels + j] = p;
      }
    }
  });

  ImportanceMatrix out;
  out.doc_id = doc.id();
  out.label_codes = scorer.label_codes();
  out.num_sentences = m;
  out.counts_masked.assign(m, 0);
  out.counts_unmasked.assign(m, 0);
  out.scorer_calls = n;
  // sums are taken relative to the first pattern's scores
  std::vector<double> sum_masked(m * n_labels, 0.0);
  std::vector<double> sum_unmasked(m * n_labels, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t s = 0; s < m; ++s) {
      auto& sums = patterns[k][s] ? sum_masked : sum_unmasked;
      ++(patterns[k][s] ? out.counts_masked : out.counts_unmasked)[s];
      for (std::size_t j = 0; j < n_labels; ++j) sums[s * n_labels + j] += probs[k * n_labels + j] - probs[j];
    }
  }
  out.scores.assign(m * n_labels, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    if (out.counts_masked[s] == 0 || out.counts_unmasked[s] == 0) {
      fail(ErrorKind::numeric, "sentence " + std::to_string(s) + " of document " + doc.id() +
                                   " was never observed " + (out.counts_masked[s] == 0 ? "masked" : "unmasked"));
    }
    const double cm = static_cast<double>(out.counts_masked[s]);
    const double cu = static_cast<double>(out.counts_unmasked[s]);
    for (std::size_t j = 0; j < n_labels; ++j) {
      out.scores[s * n_labels + j] = sum_unmasked[s * n_labels + j] / cu - sum_masked[s * n_labels + j] / cm;
    }
  }
  return out;
}

}  // namespace detail

// Draws the K i.i.d. mask patterns, then tops up any sentence that was never
// seen in one of the two states with `min_count_guard` extra patterns forcing
// that state (other sentences drawn i.i.d. as usual).
inline std::vector<MaskPattern> draw_mask_patterns(std::size_t num_sentences, const MspConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  std::vector<MaskPattern> patterns;
  patterns.reserve(static_cast<std::size_t>(cfg.num_iterations));
  std::vector<std::size_t> masked(num_sentences, 0);
  const auto draw = [&] {
    MaskPattern p(num_sentences);
    for (auto& bit : p) bit = bernoulli(rng, cfg.mask_probability) ? 1 : 0;
    return p;
  };
  const auto record = [&](MaskPattern p) {
    for (std::size_t s = 0; s < num_sentences; ++s) masked[s] += p[s] ? 1 : 0;
    patterns.push_back(std::move(p));
  };
  for (int k = 0; k < cfg.num_iterations; ++k) record(draw());
  for (std::size_t s = 0; s < num_sentences; ++s) {
    const bool never_masked = masked[s] == 0;
    const bool never_unmasked = masked[s] == patterns.size();
    if (!never_masked && !never_unmasked) continue;
    for (int g = 0; g < cfg.min_count_guard; ++g) {
      auto p = draw();
      p[s] = never_masked ? 1 : 0;
      record(std::move(p));
    }
  }
  return patterns;
}

// Masked sampling attribution: scores[s][j] is the mean probability of label
// j over iterations where sentence s was kept, minus the mean over iterations
// where it was masked.
inline ImportanceMatrix explain(const Document& doc, const Scorer& scorer, const MspConfig& cfg) {
  validate(cfg);
  if (doc.sentences().empty()) fail(ErrorKind::validation, "document " + doc.id() + " has no sentences");
  const auto patterns = draw_mask_patterns(doc.sentences().size(), cfg);
  return detail::tally(doc, scorer, patterns, cfg.mask_token, cfg.batch_size, cfg.workers);
}

inline constexpr std::size_t kMaxExhaustiveSentences = 16;

// Same estimator over all 2^m mask patterns; the exact limit of explain()
// at mask probability 0.5.
inline ImportanceMatrix explain_exhaustive(const Document& doc, const Scorer& scorer,
                                           const std::string& mask_token = "[MASK]",
                                           std::size_t workers = 1) {
  const std::size_t m = doc.sentences().size();
  if (m == 0) fail(ErrorKind::validation, "document " + doc.id() + " has no sentences");
  if (m > kMaxExhaustiveSentences) {
    fail(ErrorKind::validation, "document " + doc.id() + " has " + std::to_string(m) +
                                    " sentences; exhaustive explanation supports at most " +
                                    std::to_string(kMaxExhaustiveSentences));
  }
  const std::size_t n = std::size_t{1} << m;
  std::vector<MaskPattern> patterns(n, MaskPattern(m));
  for (std::size_t bits = 0; bits < n; ++bits) {
    for (std::size_t s = 0; s < m; ++s) patterns[bits][s] = (bits >> s) & 1U ? 1 : 0;
  }
  return detail::tally(doc, scorer, patterns, mask_token, 256, workers);
}

// JSON-lines record: one object per (document, run) with the config echoed.
inline Json to_json(const ImportanceMatrix& im, const Json& config) {
  Json rows = Json::array();
  for (std::size_t s = 0; s < im.num_sentences; ++s) {
    rows.push_back(std::vector<double>(im.scores.begin() + static_cast<std::ptrdiff_t>(s * im.label_codes.size()),
                                       im.scores.begin() + static_cast<std::ptrdiff_t>((s + 1) * im.label_codes.size())));
  }
  return Json{{"doc_id", im.doc_id},
              {"labels", im.label_codes},
              {"num_sentences", im.num_sentences},
              {"scores", std::move(rows)},
              {"counts_masked", im.counts_masked},
              {"counts_unmasked", im.counts_unmasked},
              {"scorer_calls", im.scorer_calls},
              {"config", config}};
}

inline ImportanceMatrix importance_from_json(const Json& j) {
  ImportanceMatrix im;
  im.doc_id = required<std::string>(j, "doc_id");
  im.label_codes = required<std::vector<std::string>>(j, "labels");
  im.num_sentences = required<std::size_t>(j, "num_sentences");
  const auto rows = required<std::vector<std::vector<double>>>(j, "scores");
  if (rows.size() != im.num_sentences) fail(ErrorKind::input, "importance rows do not match num_sentences");
  for (const auto& r : rows) {
    if (r.size() != im.label_codes.size()) fail(ErrorKind::input, "importance row has the wrong width");
    im.scores.insert(im.scores.end(), r.begin(), r.end());
  }
  im.counts_masked = required<std::vector<std::size_t>>(j, "counts_masked");
  im.counts_unmasked = required<std::vector<std::size_t>>(j, "counts_unmasked");
  im.scorer_calls = j.value("scorer_calls", std::size_t{0});
  return im;
}

inline std::map<std::string, ImportanceMatrix> load_importance(const std::filesystem::path& path) {
  std::map<std::string, ImportanceMatrix> out;
  read_jsonl(path, [&](const Json& r, std::size_t line) {
    auto im = importance_from_json(r);
    auto id = im.doc_id;
    if (!out.emplace(id, std::move(im)).second) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(line) + ": duplicate doc_id " + id);
    }
  });
  return out;
}

}  // namespace xaiqa
