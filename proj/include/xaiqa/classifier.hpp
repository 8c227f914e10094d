#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xaiqa/corpus.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/rng.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

// Row-major texts x labels matrix of probabilities.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  const std::vector<double>& values() const { return values_; }

  bool valid_probabilities() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// The black-box multi-label classifier. Column order of score() equals
// label_codes(), which must match the vocabulary order. Implementations must
// be safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const std::vector<std::string>& label_codes() const = 0;
  virtual ScoreMatrix score(std::span<const std::string> texts) const = 0;
};

// Adapts a per-text callable returning one probability per label.
class FunctionScorer final : public Scorer {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;

  FunctionScorer(std::vector<std::string> labels, Fn fn)
      : labels_(std::move(labels)), fn_(std::move(fn)) {}

  const std::vector<std::string>& label_codes() const override { return labels_; }

  ScoreMatrix score(std::span<const std::string> texts) const override {
    ScoreMatrix out(texts.size(), labels_.size());
    for (std::size_t r = 0; r < texts.size(); ++r) {
      const auto v = fn_(texts[r]);
      if (v.size() != labels_.size()) fail(ErrorKind::validation, "scorer returned the wrong number of labels");
      std::copy(v.begin(), v.end(), out.row(r).begin());
    }
    return out;
  }

 private:
  std::vector<std::string> labels_;
  Fn fn_;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-|z|)) + max(z, 0) - y z, stable for large |z|.
inline double logistic_loss(double z, double y) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
}

// Sorted by feature index.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Log-scaled term frequency (1 + ln tf) times smoothed idf
// (ln((1 + N) / (1 + df)) + 1). Features are not length normalised so that
// adding a term occurrence can only raise that term's feature.
class TfidfFeaturizer {
 public:
  TfidfFeaturizer() = default;
  TfidfFeaturizer(std::vector<std::string> terms, std::vector<double> idf)
      : terms_(std::move(terms)), idf_(std::move(idf)) {
    if (terms_.size() != idf_.size()) fail(ErrorKind::input, "vocabulary and idf differ in length");
    for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], static_cast<std::uint32_t>(i));
  }

  static TfidfFeaturizer fit(std::span<const std::string> texts) {
    std::map<std::string, std::size_t> df;
    for (const auto& t : texts) {
      auto toks = text::tokenize(t);
      std::sort(toks.begin(), toks.end());
      toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
      for (auto& tok : toks) ++df[tok];
    }
    std::vector<std::string> terms;
    std::vector<double> idf;
    const double n = static_cast<double>(texts.size());
    for (const auto& [term, count] : df) {
      terms.push_back(term);
      idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return TfidfFeaturizer(std::move(terms), std::move(idf));
  }

  std::size_t dim() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }

  SparseVector transform(std::string_view s) const {
    std::map<std::uint32_t, std::size_t> counts;
    for (const auto& tok : text::tokenize(s)) {
      const auto it = index_.find(tok);
      if (it != index_.end()) ++counts[it->second];
    }
    SparseVector out;
    out.reserve(counts.size());
    for (const auto& [idx, c] : counts) {
      out.emplace_back(idx, (1.0 + std::log(static_cast<double>(c))) * idf_[idx]);
    }
    return out;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct TrainConfig {
  double learning_rate = 1.0;
  int epochs = 100;
  int batch_size = 16;
  double weight_decay = 0.01;
  std::uint64_t seed = 13;
  // Consecutive step-size halvings tried before an epoch is abandoned.
  int max_backtracks = 40;
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
              {"batch_size", c.batch_size},       {"weight_decay", c.weight_decay},
              {"seed", c.seed},                   {"max_backtracks", c.max_backtracks}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.max_backtracks = j.value("max_backtracks", c.max_backtracks);
  return c;
}

inline constexpr int kLinearModelSchemaVersion = 1;

// Per-label logistic regression over TF-IDF features.
class LinearModel final : public Scorer {
 public:
  LinearModel() = default;
  LinearModel(std::vector<std::string> labels, TfidfFeaturizer featurizer)
      : labels_(std::move(labels)),
        featurizer_(std::move(featurizer)),
        weights_(labels_.size() * featurizer_.dim(), 0.0),
        bias_(labels_.size(), 0.0) {}

  const std::vector<std::string>& label_codes() const override { return labels_; }

  ScoreMatrix score(std::span<const std::string> texts) const override {
    ScoreMatrix out(texts.size(), labels_.size());
    for (std::size_t r = 0; r < texts.size(); ++r) {
      const auto x = featurizer_.transform(texts[r]);
      for (std::size_t j = 0; j < labels_.size(); ++j) out(r, j) = sigmoid(logit(x, j));
    }
    return out;
  }

  double logit(const SparseVector& x, std::size_t label) const {
    const double* w = weights_.data() + label * featurizer_.dim();
    double z = bias_[label];
    for (const auto& [idx, v] : x) z += w[idx] * v;
    return z;
  }

  const TfidfFeaturizer& featurizer() const { return featurizer_; }
  std::size_t num_features() const { return featurizer_.dim(); }

  double weight(std::size_t label, std::size_t feature) const {
    return weights_[label * featurizer_.dim() + feature];
  }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  TrainConfig train_config;
  std::vector<std::string> excluded_labels;
  std::vector<double> loss_history;  // loss before training, then after each epoch

 private:
  std::vector<std::string> labels_;
  TfidfFeaturizer featurizer_;
  std::vector<double> weights_;  // labels x features, row-major
  std::vector<double> bias_;
};

namespace detail {

struct TrainingSet {
  std::vector<SparseVector> x;
  std::vector<std::vector<char>> y;  // docs x labels
};

// Mean per-label logistic loss plus (decay / 2) * ||W||^2. Bias is not decayed.
inline double training_loss(const LinearModel& m, const TrainingSet& data, double decay) {
  const std::size_t n_labels = m.label_codes().size();
  double loss = 0.0;
  for (std::size_t n = 0; n < data.x.size(); ++n) {
    for (std::size_t j = 0; j < n_labels; ++j) {
      loss += logistic_loss(m.logit(data.x[n], j), data.y[n][j] ? 1.0 : 0.0);
    }
  }
  loss /= static_cast<double>(data.x.size() * std::max<std::size_t>(n_labels, 1));
  double sq = 0.0;
  for (double w : m.weights()) sq += w * w;
  return loss + 0.5 * decay * sq;
}

inline bool all_finite(const LinearModel& m) {
  const auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(m.weights().begin(), m.weights().end(), finite) &&
         std::all_of(m.bias().begin(), m.bias().end(), finite);
}

}  // namespace detail

// Mini-batch gradient descent with L2 weight decay. Each epoch is accepted
// only if the full training loss does not increase; otherwise the epoch is
// replayed from the previous parameters with half the step size. Labels
// without positive examples keep zero weights (only their bias is fitted) and
// are listed in `excluded_labels`.
inline LinearModel train_linear(const Corpus& corpus, const TrainConfig& cfg,
                                std::vector<std::string>* warnings = nullptr) {
  const auto& docs = corpus.documents();
  if (docs.empty()) fail(ErrorKind::validation, "cannot train on an empty corpus");
  if (cfg.epochs < 0) fail(ErrorKind::validation, "epochs must be >= 0");
  if (cfg.batch_size < 1) fail(ErrorKind::validation, "batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::validation, "learning_rate must be > 0");
  if (cfg.weight_decay < 0.0) fail(ErrorKind::validation, "weight_decay must be >= 0");

  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text());
  LinearModel model(corpus.vocab().codes(), TfidfFeaturizer::fit(texts));
  model.train_config = cfg;

  const std::size_t n_docs = docs.size();
  const std::size_t n_labels = corpus.vocab().size();
  const std::size_t dim = model.num_features();

  detail::TrainingSet data;
  data.x.reserve(n_docs);
  for (const auto& t : texts) data.x.push_back(model.featurizer().transform(t));
  data.y.assign(n_docs, std::vector<char>(n_labels, 0));
  std::vector<char> trainable(n_labels, 0);
  for (std::size_t d = 0; d < n_docs; ++d) {
    for (auto j : corpus.positives(d)) {
      data.y[d][j] = 1;
      trainable[j] = 1;
    }
  }
  for (std::size_t j = 0; j < n_labels; ++j) {
    if (!trainable[j]) {
      model.excluded_labels.push_back(model.label_codes()[j]);
      if (warnings) warnings->push_back("label " + model.label_codes()[j] + " has no positive examples; weights fixed at zero");
    }
  }

  Rng rng(cfg.seed);
  double lr = cfg.learning_rate;
  double loss = detail::training_loss(model, data, cfg.weight_decay);
  if (!std::isfinite(loss)) fail(ErrorKind::numeric, "non-finite initial loss");
  model.loss_history.push_back(loss);

  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(n_labels, 1));
  std::vector<std::size_t> order(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(rng, order);
    const auto saved_w = model.weights();
    const auto saved_b = model.bias();
    bool accepted = false;
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t bad_batch = kNone;
    for (int attempt = 0; attempt <= cfg.max_backtracks && !accepted; ++attempt) {
      bad_batch = kNone;
      for (std::size_t begin = 0, batch = 0; begin < n_docs; begin += cfg.batch_size, ++batch) {
        const std::size_t end = std::min(n_docs, begin + static_cast<std::size_t>(cfg.batch_size));
        const double scale = lr * norm / static_cast<double>(end - begin);
        // residuals from the pre-update parameters of this batch
        std::vector<double> residual((end - begin) * n_labels);
        for (std::size_t k = begin; k < end; ++k) {
          const auto& x = data.x[order[k]];
          for (std::size_t j = 0; j < n_labels; ++j) {
            residual[(k - begin) * n_labels + j] =
                sigmoid(model.logit(x, j)) - (data.y[order[k]][j] ? 1.0 : 0.0);
          }
        }
        const double shrink = 1.0 - lr * cfg.weight_decay;
        for (std::size_t j = 0; j < n_labels; ++j) {
          if (!trainable[j]) continue;
          double* w = model.weights().data() + j * dim;
          for (std::size_t f = 0; f < dim; ++f) w[f] *= shrink;
        }
        for (std::size_t k = begin; k < end; ++k) {
          const auto& x = data.x[order[k]];
          for (std::size_t j = 0; j < n_labels; ++j) {
            const double r = residual[(k - begin) * n_labels + j];
            model.bias()[j] -= scale * r;
            if (!trainable[j]) continue;
            double* w = model.weights().data() + j * dim;
            for (const auto& [idx, v] : x) w[idx] -= scale * r * v;
          }
        }
        if (!detail::all_finite(model)) {
          bad_batch = batch;
          break;
        }
      }
      const double next = bad_batch != kNone ? std::nan("") : detail::training_loss(model, data, cfg.weight_decay);
      if (std::isfinite(next) && next <= loss) {
        loss = next;
        accepted = true;
      } else {
        model.weights() = saved_w;
        model.bias() = saved_b;
        lr *= 0.5;
      }
    }
    if (!accepted && bad_batch != kNone) {
      fail(ErrorKind::numeric, "non-finite parameters at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(bad_batch));
    }
    model.loss_history.push_back(loss);
  }
  return model;
}

inline Json to_json(const LinearModel& m) {
  Json weights = Json::array();
  for (std::size_t j = 0; j < m.label_codes().size(); ++j) {
    weights.push_back(std::vector<double>(m.weights().begin() + static_cast<std::ptrdiff_t>(j * m.num_features()),
                                          m.weights().begin() + static_cast<std::ptrdiff_t>((j + 1) * m.num_features())));
  }
  return Json{{"schema_version", kLinearModelSchemaVersion},
              {"kind", "xaiqa.linear_model"},
              {"labels", m.label_codes()},
              {"terms", m.featurizer().terms()},
              {"idf", m.featurizer().idf()},
              {"weights", std::move(weights)},
              {"bias", m.bias()},
              {"excluded_labels", m.excluded_labels},
              {"train_config", to_json(m.train_config)},
              {"loss_history", m.loss_history}};
}

inline LinearModel linear_model_from_json(const Json& j) {
  if (j.value("kind", std::string{}) != "xaiqa.linear_model") fail(ErrorKind::input, "not a linear model file");
  if (j.value("schema_version", 0) != kLinearModelSchemaVersion) {
    fail(ErrorKind::input, "unsupported model schema_version");
  }
  LinearModel m(required<std::vector<std::string>>(j, "labels"),
                TfidfFeaturizer(required<std::vector<std::string>>(j, "terms"),
                                required<std::vector<double>>(j, "idf")));
  const auto rows = required<std::vector<std::vector<double>>>(j, "weights");
  if (rows.size() != m.label_codes().size()) fail(ErrorKind::input, "weight matrix has the wrong number of rows");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.num_features()) fail(ErrorKind::input, "weight matrix has the wrong number of columns");
    std::copy(rows[r].begin(), rows[r].end(), m.weights().begin() + static_cast<std::ptrdiff_t>(r * m.num_features()));
  }
  m.bias() = required<std::vector<double>>(j, "bias");
  if (m.bias().size() != m.label_codes().size()) fail(ErrorKind::input, "bias has the wrong length");
  if (!detail::all_finite(m)) fail(ErrorKind::input, "model parameters are not finite");
  m.excluded_labels = j.value("excluded_labels", std::vector<std::string>{});
  m.train_config = train_config_from_json(j.value("train_config", Json::object()));
  m.loss_history = j.value("loss_history", std::vector<double>{});
  return m;
}

inline void save_linear_model(const std::filesystem::path& path, const LinearModel& m) {
  write_text(path, to_json(m).dump() + "\n");
}

inline LinearModel load_linear_model(const std::filesystem::path& path) {
  try {
    return linear_model_from_json(Json::parse(read_text(path)));
  } catch (const Json::exception& e) {
    fail(ErrorKind::input, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Average precision

struct RankedItem {
  double score = 0.0;
  bool positive = false;
  std::string id;  // tie-break key
};

// Step-interpolated AP: sum over ranks of (R_n - R_{n-1}) * P_n, ranking by
// score descending with ties broken by id ascending. nullopt when there are
// no positives.
inline std::optional<double> average_precision(std::vector<RankedItem> items) {
  std::stable_sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  const auto total = std::count_if(items.begin(), items.end(), [](const RankedItem& i) { return i.positive; });
  if (total == 0) return std::nullopt;
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (!items[k].positive) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(total);
}

struct ClassifierMetrics {
  double micro_ap = 0.0;
  double macro_ap = 0.0;
  std::map<std::string, double> per_label_ap;
  std::vector<std::string> undefined_labels;  // no positives; excluded from macro
};

inline ClassifierMetrics evaluate_classifier(const ScoreMatrix& scores, const Corpus& corpus) {
  const auto& docs = corpus.documents();
  const auto& vocab = corpus.vocab();
  if (scores.rows() != docs.size() || scores.cols() != vocab.size()) {
    fail(ErrorKind::validation, "score matrix shape does not match the corpus");
  }
  ClassifierMetrics m;
  std::vector<RankedItem> pooled;
  double macro_sum = 0.0;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    std::vector<RankedItem> items;
    items.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      items.push_back({scores(d, j), corpus.has_label(d, j), docs[d].id()});
      // micro pooling breaks ties by doc id, then label code
      pooled.push_back({scores(d, j), corpus.has_label(d, j), docs[d].id() + '\x1f' + vocab[j].code});
    }
    if (const auto ap = average_precision(std::move(items))) {
      m.per_label_ap[vocab[j].code] = *ap;
      macro_sum += *ap;
    } else {
      m.undefined_labels.push_back(vocab[j].code);
    }
  }
  m.macro_ap = m.per_label_ap.empty() ? 0.0 : macro_sum / static_cast<double>(m.per_label_ap.size());
  m.micro_ap = average_precision(std::move(pooled)).value_or(0.0);
  return m;
}

inline Json to_json(const ClassifierMetrics& m) {
  Json per_label = Json::object();
  for (const auto& [code, ap] : m.per_label_ap) per_label[code] = ap;
  return Json{{"micro_ap", m.micro_ap},
              {"macro_ap", m.macro_ap},
              {"per_label_ap", std::move(per_label)},
              {"undefined_labels", m.undefined_labels}};
}

}  // namespace xaiqa
