#pragma once

// HTTP clients for neural scorers and sentence encoders hosted out of
// process. Requires cpp-httplib on the include path.
//
// Scorer protocol:
//   POST /handshake {"labels": [str, ...]}        -> {"labels": [str, ...]}
//   POST /score     {"texts": [str, ...]}         -> {"scores": [[float, ...], ...],
//                                                     "truncated": [bool, ...]}
// The handshake fixes the column order; the server must echo the labels in
// the order it will score them.
//
// Encoder protocol:
//   POST /embed     {"texts": [str, ...]}         -> {"vectors": [[float, ...], ...], "dim": int}

#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "httplib.h"
#include "xaiqa/classifier.hpp"
#include "xaiqa/embedder.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"

namespace xaiqa {

namespace detail {

inline Json post_json(const std::string& endpoint, const std::string& path, const Json& body,
                      const std::string& context) {
  httplib::Client client(endpoint);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) fail(ErrorKind::transport, context + ": " + httplib::to_string(res.error()));
  if (res->status != 200) fail(ErrorKind::transport, context + ": HTTP status " + std::to_string(res->status));
  try {
    auto parsed = Json::parse(res->body);
    if (!parsed.is_object()) fail(ErrorKind::transport, context + ": response is not a JSON object");
    return parsed;
  } catch (const Json::exception& e) {
    fail(ErrorKind::transport, context + ": malformed response: " + e.what());
  }
}

}  // namespace detail

class RemoteScorer final : public Scorer {
 public:
  RemoteScorer(std::string endpoint, std::vector<std::string> labels, std::size_t batch_size = 16)
      : endpoint_(std::move(endpoint)), labels_(std::move(labels)), batch_size_(batch_size) {
    if (batch_size_ == 0) fail(ErrorKind::validation, "batch_size must be >= 1");
    const auto reply = detail::post_json(endpoint_, "/handshake", Json{{"labels", labels_}}, "handshake");
    std::vector<std::string> echoed;
    try {
      echoed = reply.at("labels").get<std::vector<std::string>>();
    } catch (const Json::exception&) {
      fail(ErrorKind::transport, "handshake: response lacks a \"labels\" array");
    }
    if (echoed != labels_) fail(ErrorKind::transport, "handshake: server label order differs from the vocabulary");
  }

  const std::vector<std::string>& label_codes() const override { return labels_; }

  ScoreMatrix score(std::span<const std::string> texts) const override {
    ScoreMatrix out(texts.size(), labels_.size());
    for (std::size_t begin = 0, batch = 0; begin < texts.size(); begin += batch_size_, ++batch) {
      const std::size_t end = std::min(texts.size(), begin + batch_size_);
      const std::string ctx = "score batch " + std::to_string(batch);
      const auto reply = detail::post_json(
          endpoint_, "/score",
          Json{{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  texts.begin() + static_cast<std::ptrdiff_t>(end))}},
          ctx);
      std::vector<std::vector<double>> rows;
      std::vector<bool> truncated;
      try {
        rows = reply.at("scores").get<std::vector<std::vector<double>>>();
        truncated = reply.value("truncated", std::vector<bool>(end - begin, false));
      } catch (const Json::exception&) {
        fail(ErrorKind::transport, ctx + ": malformed response");
      }
      if (rows.size() != end - begin || truncated.size() != end - begin) {
        fail(ErrorKind::transport, ctx + ": expected " + std::to_string(end - begin) + " rows");
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != labels_.size()) {
          fail(ErrorKind::transport, ctx + ": row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                         " scores, expected " + std::to_string(labels_.size()));
        }
        for (std::size_t j = 0; j < labels_.size(); ++j) {
          const double v = rows[r][j];
          if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            fail(ErrorKind::transport, ctx + ": score outside [0, 1] at row " + std::to_string(r));
          }
          out(begin + r, j) = v;
        }
        if (truncated[r]) truncated_.fetch_add(1);
      }
      scored_.fetch_add(end - begin);
    }
    return out;
  }

  // Coverage bookkeeping: texts the server reported as truncated.
  std::size_t truncated_count() const { return truncated_.load(); }
  std::size_t scored_count() const { return scored_.load(); }

 private:
  std::string endpoint_;
  std::vector<std::string> labels_;
  std::size_t batch_size_;
  mutable std::atomic<std::size_t> truncated_{0};
  mutable std::atomic<std::size_t> scored_{0};
};

class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::size_t batch_size = 64)
      : endpoint_(std::move(endpoint)), batch_size_(batch_size) {
    if (batch_size_ == 0) fail(ErrorKind::validation, "batch_size must be >= 1");
  }

  // Known after the first successful call.
  std::size_t dim() const override { return dim_.load(); }

  std::vector<Embedding> embed(std::span<const std::string> texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0, batch = 0; begin < texts.size(); begin += batch_size_, ++batch) {
      const std::size_t end = std::min(texts.size(), begin + batch_size_);
      const std::string ctx = "embed batch " + std::to_string(batch);
      const auto reply = detail::post_json(
          endpoint_, "/embed",
          Json{{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  texts.begin() + static_cast<std::ptrdiff_t>(end))}},
          ctx);
      std::vector<std::vector<double>> vectors;
      std::size_t dim = 0;
      try {
        vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
        dim = reply.at("dim").get<std::size_t>();
      } catch (const Json::exception&) {
        fail(ErrorKind::transport, ctx + ": malformed response");
      }
      if (vectors.size() != end - begin) {
        fail(ErrorKind::transport, ctx + ": expected " + std::to_string(end - begin) + " vectors");
      }
      std::size_t expected = dim_.load();
      if (expected == 0) {
        dim_.store(dim);
        expected = dim;
      }
      if (dim != expected) fail(ErrorKind::transport, ctx + ": dimension changed between batches");
      for (auto& v : vectors) {
        if (v.size() != dim) fail(ErrorKind::transport, ctx + ": vector length does not match dim");
        for (double x : v) {
          if (!std::isfinite(x)) fail(ErrorKind::transport, ctx + ": non-finite embedding value");
        }
        out.push_back(std::move(v));
      }
    }
    return out;
  }

 private:
  std::string endpoint_;
  std::size_t batch_size_;
  mutable std::atomic<std::size_t> dim_{0};
};

}  // namespace xaiqa
