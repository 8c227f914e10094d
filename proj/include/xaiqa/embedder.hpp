#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

using Embedding = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) const = 0;

  Embedding embed_one(const std::string& text) const {
    return embed(std::span<const std::string>(&text, 1)).front();
  }
};

// Inner-product cosine; 0 when either side is the zero vector.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::validation, "cosine of vectors with dimensions " + std::to_string(a.size()) +
                                    " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Index of the candidate most similar to `query`; ties go to the lowest index.
inline std::size_t argmax_cosine(const Embedding& query, const std::vector<Embedding>& candidates,
                                 double* best_score = nullptr) {
  if (candidates.empty()) fail(ErrorKind::validation, "argmax over an empty candidate set");
  std::size_t best = 0;
  double best_sim = cosine(query, candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double sim = cosine(query, candidates[i]);
    if (sim > best_sim) {
      best = i;
      best_sim = sim;
    }
  }
  if (best_score) *best_score = best_sim;
  return best;
}

// Hashed bag of words. Each token maps to a signed one-hot vector in one of
// `dim` buckets (the token's hash vector); a text embeds as the mean of its
// token vectors weighted by idf. Once fitted, tokens unseen at fit time carry
// zero weight. Unfitted, every token weighs 1.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 512, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim_ < 8) fail(ErrorKind::validation, "builtin embedder dimension must be >= 8");
  }

  void fit(std::span<const std::string> texts) {
    std::map<std::string, std::size_t> df;
    for (const auto& t : texts) {
      auto toks = text::tokenize(t);
      std::sort(toks.begin(), toks.end());
      toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
      for (auto& tok : toks) ++df[tok];
    }
    idf_.clear();
    const double n = static_cast<double>(texts.size());
    for (const auto& [tok, count] : df) {
      idf_.emplace(tok, std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    fitted_ = true;
  }

  bool fitted() const { return fitted_; }
  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  double token_weight(const std::string& token) const {
    if (!fitted_) return 1.0;
    const auto it = idf_.find(token);
    return it == idf_.end() ? 0.0 : it->second;
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      Embedding v(dim_, 0.0);
      const auto toks = text::tokenize(t);
      for (const auto& tok : toks) {
        const double w = token_weight(tok);
        if (w == 0.0) continue;
        const std::uint64_t h = text::fnv1a64(tok, seed_);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % dim_] += sign * w;
      }
      if (!toks.empty()) {
        const double inv = 1.0 / static_cast<double>(toks.size());
        for (auto& x : v) x *= inv;
      }
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  bool fitted_ = false;
  std::unordered_map<std::string, double> idf_;
};

enum class EmbedderProvider { builtin_hash_tfidf, remote };

struct EmbedderConfig {
  EmbedderProvider provider = EmbedderProvider::builtin_hash_tfidf;
  std::size_t dim = 512;
  std::string endpoint;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
};

inline Json to_json(const EmbedderConfig& c) {
  return Json{{"provider", c.provider == EmbedderProvider::remote ? "remote" : "builtin_hash_tfidf"},
              {"dim", c.dim},
              {"endpoint", c.endpoint},
              {"seed", c.seed}};
}

}  // namespace xaiqa
