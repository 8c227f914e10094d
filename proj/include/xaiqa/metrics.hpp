#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xaiqa/error.hpp"
#include "xaiqa/hardness.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/stats.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

// Shared answer normalisation for all three metrics: lowercase, punctuation
// acts as a separator, English articles are dropped. Using one token stream
// everywhere makes EM = 1 imply F1 = 1 and ROUGE-2 = 1.
inline std::vector<std::string> answer_tokens(std::string_view s) {
  auto toks = text::tokenize(s);
  std::erase_if(toks, [](const std::string& t) { return t == "a" || t == "an" || t == "the"; });
  return toks;
}

inline std::string normalize_answer(std::string_view s) {
  std::string out;
  for (const auto& t : answer_tokens(s)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Clipped bigram recall against the reference. References with fewer than
// two tokens fall back to unigram recall; an empty reference scores 1 only
// against an empty prediction.
inline double rouge2_recall(std::string_view prediction, std::string_view reference) {
  const auto pred = answer_tokens(prediction);
  const auto ref = answer_tokens(reference);
  if (ref.empty()) return pred.empty() ? 1.0 : 0.0;
  std::map<std::string, std::size_t> available;
  std::size_t total = 0;
  std::size_t hit = 0;
  if (ref.size() < 2) {
    for (const auto& t : pred) ++available[t];
    for (const auto& t : ref) {
      ++total;
      auto it = available.find(t);
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++hit;
      }
    }
  } else {
    const auto key = [](const std::string& a, const std::string& b) { return a + '\x1f' + b; };
    for (std::size_t i = 0; i + 1 < pred.size(); ++i) ++available[key(pred[i], pred[i + 1])];
    for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
      ++total;
      auto it = available.find(key(ref[i], ref[i + 1]));
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++hit;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

// Multiset token overlap F1.
inline double token_f1(std::string_view prediction, std::string_view reference) {
  const auto pred = answer_tokens(prediction);
  const auto ref = answer_tokens(reference);
  if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : ref) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double p = static_cast<double>(common) / static_cast<double>(pred.size());
  const double r = static_cast<double>(common) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

inline double exact_match(std::string_view prediction, std::string_view reference) {
  return normalize_answer(prediction) == normalize_answer(reference) ? 1.0 : 0.0;
}

struct ItemScores {
  double rouge2 = 0.0;
  double f1 = 0.0;
  double em = 0.0;
};

// Scores against each reference and keeps the best value per metric.
inline ItemScores score_against(std::string_view prediction, const std::vector<std::string>& references) {
  if (references.empty()) fail(ErrorKind::input, "gold item has no reference answers");
  ItemScores best;
  for (const auto& ref : references) {
    best.rouge2 = std::max(best.rouge2, rouge2_recall(prediction, ref));
    best.f1 = std::max(best.f1, token_f1(prediction, ref));
    best.em = std::max(best.em, exact_match(prediction, ref));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Files

struct GoldAnswer {
  std::string text;
  std::size_t start = 0;
};

struct GoldItem {
  std::string item_id;
  std::string question;
  std::string context_doc_id;
  std::vector<GoldAnswer> answers;
};

struct Prediction {
  std::string item_id;
  std::string span_text;  // empty = abstained
  std::optional<long long> start_idx;
  bool parse_failed = false;
};

inline std::vector<GoldItem> load_gold(const std::filesystem::path& path) {
  std::vector<GoldItem> out;
  std::set<std::string> seen;
  read_jsonl(path, [&](const Json& r, std::size_t line) {
    GoldItem g;
    g.item_id = required<std::string>(r, "item_id");
    g.question = required<std::string>(r, "question");
    g.context_doc_id = required<std::string>(r, "context_doc_id");
    for (const auto& a : required<Json>(r, "answers")) {
      g.answers.push_back({required<std::string>(a, "text"), a.value("start", std::size_t{0})});
    }
    if (g.answers.empty()) fail(ErrorKind::input, path.string() + ":" + std::to_string(line) + ": no answers");
    if (!seen.insert(g.item_id).second) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(line) + ": duplicate item_id " + g.item_id);
    }
    out.push_back(std::move(g));
  });
  return out;
}

inline Json to_json(const GoldItem& g) {
  Json answers = Json::array();
  for (const auto& a : g.answers) answers.push_back(Json{{"text", a.text}, {"start", a.start}});
  return Json{{"item_id", g.item_id}, {"question", g.question},
              {"context_doc_id", g.context_doc_id}, {"answers", std::move(answers)}};
}

inline Json to_json(const Prediction& p) {
  Json j{{"item_id", p.item_id}, {"span_text", p.span_text}};
  j["start_idx"] = p.start_idx ? Json(*p.start_idx) : Json(nullptr);
  if (p.parse_failed) j["parse_failed"] = true;
  return j;
}

inline Prediction prediction_from_json(const Json& j) {
  Prediction p;
  p.item_id = required<std::string>(j, "item_id");
  const auto span = j.find("span_text");
  p.span_text = (span == j.end() || span->is_null()) ? std::string{} : span->get<std::string>();
  const auto start = j.find("start_idx");
  if (start != j.end() && start->is_number_integer()) p.start_idx = start->get<long long>();
  p.parse_failed = j.value("parse_failed", false);
  return p;
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  read_jsonl(path, [&](const Json& r, std::size_t) { out.push_back(prediction_from_json(r)); });
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct ItemResult {
  std::string item_id;
  ItemScores scores;
  bool missing_prediction = false;
};

struct StratumSummary {
  std::string name;  // "all" or "hardest_<pct>"
  std::size_t items = 0;
  stats::Interval rouge2;
  stats::Interval f1;
  stats::Interval em;
};

struct EvalReport {
  std::vector<ItemResult> items;
  std::vector<StratumSummary> strata;
  stats::BootstrapConfig bootstrap;
  std::size_t missing_predictions = 0;
};

inline const std::vector<double>& default_strata_fractions() {
  static const std::vector<double> f = {0.05, 0.10, 0.25, 0.50};
  return f;
}

namespace detail {

inline std::string stratum_name(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "hardest_%g%%", fraction * 100.0);
  return buf;
}

inline StratumSummary summarize(std::string name, const std::vector<const ItemResult*>& items,
                                const stats::BootstrapConfig& cfg) {
  StratumSummary s;
  s.name = std::move(name);
  s.items = items.size();
  if (items.empty()) return s;
  std::vector<double> r, f, e;
  for (const auto* it : items) {
    r.push_back(it->scores.rouge2);
    f.push_back(it->scores.f1);
    e.push_back(it->scores.em);
  }
  s.rouge2 = stats::bootstrap_ci(r, cfg);
  s.f1 = stats::bootstrap_ci(f, cfg);
  s.em = stats::bootstrap_ci(e, cfg);
  return s;
}

}  // namespace detail

// Scores every gold item (missing predictions count as abstentions), then
// summarises the full set and, when hardness records are supplied, each
// hardest-fraction stratum.
inline EvalReport evaluate(const std::vector<GoldItem>& gold, const std::vector<Prediction>& predictions,
                           const stats::BootstrapConfig& cfg,
                           const std::vector<HardnessRecord>* hardness = nullptr,
                           const std::vector<double>& fractions = default_strata_fractions()) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.item_id, &p).second) fail(ErrorKind::input, "duplicate prediction for " + p.item_id);
  }
  EvalReport report;
  report.bootstrap = cfg;
  std::map<std::string, const ItemResult*> result_by_id;
  report.items.reserve(gold.size());
  for (const auto& g : gold) {
    std::vector<std::string> refs;
    for (const auto& a : g.answers) refs.push_back(a.text);
    const auto it = by_id.find(g.item_id);
    ItemResult r;
    r.item_id = g.item_id;
    r.missing_prediction = it == by_id.end();
    r.scores = score_against(r.missing_prediction ? std::string_view{} : std::string_view(it->second->span_text), refs);
    report.missing_predictions += r.missing_prediction ? 1 : 0;
    report.items.push_back(std::move(r));
  }
  for (const auto& r : report.items) result_by_id.emplace(r.item_id, &r);

  std::vector<const ItemResult*> all;
  for (const auto& r : report.items) all.push_back(&r);
  report.strata.push_back(detail::summarize("all", all, cfg));

  if (hardness) {
    std::vector<HardnessRecord> known;
    for (const auto& h : *hardness) {
      if (result_by_id.count(h.item_id)) known.push_back(h);
    }
    for (double f : fractions) {
      std::vector<const ItemResult*> subset;
      for (const auto& h : hardest_subset(known, f)) subset.push_back(result_by_id.at(h.item_id));
      report.strata.push_back(detail::summarize(detail::stratum_name(f), subset, cfg));
    }
  }
  return report;
}

inline Json to_json(const stats::Interval& i) {
  return Json{{"mean", i.mean}, {"low", i.low}, {"high", i.high}};
}

inline Json to_json(const EvalReport& r) {
  Json items = Json::array();
  for (const auto& it : r.items) {
    items.push_back(Json{{"item_id", it.item_id},
                         {"rouge2", it.scores.rouge2},
                         {"f1", it.scores.f1},
                         {"em", it.scores.em},
                         {"missing_prediction", it.missing_prediction}});
  }
  Json strata = Json::array();
  for (const auto& s : r.strata) {
    strata.push_back(Json{{"stratum", s.name},
                          {"items", s.items},
                          {"rouge2", to_json(s.rouge2)},
                          {"f1", to_json(s.f1)},
                          {"em", to_json(s.em)}});
  }
  return Json{{"bootstrap", Json{{"iterations", r.bootstrap.iterations},
                                 {"level", r.bootstrap.level},
                                 {"seed", r.bootstrap.seed}}},
              {"tokenizer", text::kTokenizerVersion},
              {"missing_predictions", r.missing_predictions},
              {"strata", std::move(strata)},
              {"items", std::move(items)}};
}

inline std::string to_table(const EvalReport& r) {
  std::string out;
  char line[256];
  char ci[32];
  std::snprintf(ci, sizeof ci, " [%g%% CI]", r.bootstrap.level * 100.0);
  std::snprintf(line, sizeof line, "%-16s %6s  %-24s  %-24s  %-24s\n", "stratum", "n", ("rouge2" + std::string(ci)).c_str(),
                ("f1" + std::string(ci)).c_str(), ("em" + std::string(ci)).c_str());
  out += line;
  const auto cell = [](const stats::Interval& i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f [%.3f, %.3f]", i.mean, i.low, i.high);
    return std::string(buf);
  };
  for (const auto& s : r.strata) {
    std::snprintf(line, sizeof line, "%-16s %6zu  %-24s  %-24s  %-24s\n", s.name.c_str(), s.items,
                  cell(s.rouge2).c_str(), cell(s.f1).c_str(), cell(s.em).c_str());
    out += line;
  }
  return out;
}

}  // namespace xaiqa
