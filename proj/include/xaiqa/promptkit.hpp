#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xaiqa/corpus.hpp"
#include "xaiqa/error.hpp"
#include "xaiqa/generator.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/metrics.hpp"
#include "xaiqa/prompt_templates.hpp"
#include "xaiqa/rng.hpp"
#include "xaiqa/text.hpp"

namespace xaiqa {

inline constexpr std::size_t kDefaultWindowRadius = 100;
inline constexpr std::size_t kDefaultExampleCount = 10;

// Substring [max(0, start - radius), min(len, end + radius)) in scalar
// offsets. `offset_in_window` receives the answer's position in the window.
inline std::string build_context_window(const Document& doc, const AnswerSpan& span, std::size_t radius,
                                        std::size_t* offset_in_window = nullptr) {
  if (span.start >= span.end || span.end > doc.length()) {
    fail(ErrorKind::validation, "answer span out of range for document " + doc.id());
  }
  const std::size_t begin = span.start > radius ? span.start - radius : 0;
  const std::size_t end = std::min(doc.length(), span.end + radius);
  if (offset_in_window) *offset_in_window = span.start - begin;
  return doc.slice(begin, end);
}

struct FewShotExample {
  std::string id;
  std::string question;
  std::string answer_text;
  std::string context_window;
  std::size_t answer_offset = 0;  // scalar offset of the answer in the window
  std::size_t window_radius = kDefaultWindowRadius;
};

inline FewShotExample make_example(const Document& doc, const QAPair& pair,
                                   std::size_t radius = kDefaultWindowRadius) {
  FewShotExample ex;
  ex.id = pair_item_id(pair);
  ex.question = pair.question;
  ex.answer_text = pair.answer.text;
  ex.window_radius = radius;
  ex.context_window = build_context_window(doc, pair.answer, radius, &ex.answer_offset);
  return ex;
}

// Draws `n` pairs from a ranked list and returns them in rank order, so the
// last example is always the lowest ranked.
inline std::vector<QAPair> sample_examples(const std::vector<QAPair>& ranked, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto idx = sample_without_replacement(rng, ranked.size(), n);
  std::sort(idx.begin(), idx.end());
  std::vector<QAPair> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ranked[i]);
  return out;
}

enum class BudgetUnit { chars, approx_tokens };

struct PromptBudget {
  std::size_t max_units = 8192;
  BudgetUnit unit = BudgetUnit::approx_tokens;
  double chars_per_token = 4.0;
  // Overrides the unit estimate when set (e.g. a real tokenizer).
  std::function<std::size_t(std::string_view)> counter;

  std::size_t measure(std::string_view s) const {
    if (counter) return counter(s);
    const auto chars = text::scalar_length(s);
    if (unit == BudgetUnit::chars) return chars;
    return static_cast<std::size_t>(std::ceil(static_cast<double>(chars) / chars_per_token));
  }
};

struct PromptQuery {
  std::string query_id;
  std::string question;
  std::string document;
};

struct BuiltPrompt {
  std::string query_id;
  std::string text;
  std::vector<std::string> retained_examples;
  std::size_t unit_count = 0;
};

inline std::string render_answer_json(std::size_t start, std::string_view span_text) {
  return "{\"start_idx\": " + std::to_string(start) + ", \"span_text\": " + Json(std::string(span_text)).dump() + "}";
}

inline std::string render_query(const PromptQuery& q) {
  return "\nQuestion: \"" + q.question + "\"\nDocument: \"" + q.document + "\"\n";
}

inline std::string render_example(const FewShotExample& ex) {
  return "\nQuestion: \"" + ex.question + "\"\nDocument: \"" + ex.context_window + "\"\n" +
         render_answer_json(ex.answer_offset, ex.answer_text) + "\n";
}

// Zero-shot template + query when `examples` is empty; otherwise the few-shot
// header, the examples, the reminder suffix, then the query.
inline std::string render_prompt(std::span<const FewShotExample> examples, const PromptQuery& query) {
  if (examples.empty()) return std::string(prompts::kZeroShotTemplate) + render_query(query);
  std::string out(prompts::kFewShotHeader);
  for (const auto& ex : examples) out += render_example(ex);
  out += '\n';
  out += prompts::kFewShotSuffix;
  out += render_query(query);
  return out;
}

// Drops examples from the end of the list, one at a time, until the prompt
// fits the budget. The query document is never truncated: if the zero-shot
// prompt alone is over budget this fails.
inline BuiltPrompt assemble_prompt(const std::vector<FewShotExample>& examples, const PromptQuery& query,
                                   const PromptBudget& budget) {
  if (budget.max_units == 0) fail(ErrorKind::validation, "max_units must be positive");
  if (budget.counter == nullptr && !(budget.chars_per_token > 0.0)) {
    fail(ErrorKind::validation, "chars_per_token must be positive");
  }
  if (budget.max_units <= budget.measure(prompts::kZeroShotTemplate)) {
    fail(ErrorKind::validation, "budget of " + std::to_string(budget.max_units) +
                                    " units does not exceed the template length");
  }
  for (std::size_t keep = examples.size() + 1; keep-- > 0;) {
    auto prompt = render_prompt(std::span<const FewShotExample>(examples.data(), keep), query);
    const auto units = budget.measure(prompt);
    if (units > budget.max_units) continue;
    BuiltPrompt out;
    out.query_id = query.query_id;
    out.text = std::move(prompt);
    out.unit_count = units;
    for (std::size_t i = 0; i < keep; ++i) out.retained_examples.push_back(examples[i].id);
    return out;
  }
  fail(ErrorKind::validation, "query " + query.query_id + " exceeds the prompt budget without any examples");
}

// Bundle layout: <dir>/<query_id>.prompt.txt plus <dir>/manifest.json.
inline void write_prompt_bundle(const std::filesystem::path& dir, const std::vector<BuiltPrompt>& prompts) {
  Json manifest = Json::array();
  for (const auto& p : prompts) {
    if (p.query_id.empty() || p.query_id.find_first_of("/\\") != std::string::npos || p.query_id == "." ||
        p.query_id == "..") {
      fail(ErrorKind::validation, "query id \"" + p.query_id + "\" cannot be used as a file name");
    }
    write_text(dir / (p.query_id + ".prompt.txt"), p.text);
    manifest.push_back(Json{{"query_id", p.query_id},
                            {"retained_examples", p.retained_examples},
                            {"unit_count", p.unit_count}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace detail {

// End of the JSON object starting at `open` (index one past the matching
// brace), honouring string literals; npos if it never closes.
inline std::size_t match_object(std::string_view s, std::size_t open, int* depth_left = nullptr) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  if (depth_left) *depth_left = in_string ? -1 : depth;
  return std::string_view::npos;
}

inline std::optional<Prediction> read_answer_object(const std::string& candidate) {
  Json j;
  try {
    j = Json::parse(candidate);
  } catch (const Json::exception&) {
    return std::nullopt;
  }
  if (!j.is_object()) return std::nullopt;
  const auto span = j.find("span_text");
  if (span == j.end() || !span->is_string()) return std::nullopt;
  Prediction p;
  p.span_text = span->get<std::string>();
  const auto start = j.find("start_idx");
  if (start != j.end() && start->is_number_integer()) p.start_idx = start->get<long long>();
  return p;
}

}  // namespace detail

// Takes the first parsable {"start_idx", "span_text"} object in a model
// response, ignoring surrounding prose. With `recover_missing_brace`, an
// object cut off before its closing braces is closed and retried. Anything
// else yields an abstention flagged as a parse failure.
inline Prediction parse_model_answer(std::string_view raw, bool recover_missing_brace = false) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    int depth_left = 0;
    const auto close = detail::match_object(raw, open, &depth_left);
    std::string candidate;
    if (close != std::string_view::npos) {
      candidate = std::string(raw.substr(open, close - open));
    } else if (recover_missing_brace && depth_left > 0) {
      candidate = std::string(raw.substr(open)) + std::string(static_cast<std::size_t>(depth_left), '}');
    } else {
      continue;
    }
    if (auto p = detail::read_answer_object(candidate)) return *p;
  }
  Prediction abstain;
  abstain.parse_failed = true;
  return abstain;
}

}  // namespace xaiqa
