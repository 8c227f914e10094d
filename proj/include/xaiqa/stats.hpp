#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xaiqa/error.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/parallel.hpp"
#include "xaiqa/rng.hpp"

namespace xaiqa::stats {

// Mean computed as x0 + sum(x - x0) / n so that constant inputs reproduce
// the constant exactly.
inline double mean(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorKind::validation, "mean of an empty sample");
  const double x0 = xs[0];
  double acc = 0.0;
  for (double x : xs) acc += x - x0;
  return x0 + acc / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) fail(ErrorKind::validation, "variance needs at least two values");
  const double mu = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(xs.size() - 1);
}

inline constexpr int kBetaMaxIterations = 10000;

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  fail(ErrorKind::numeric, "incomplete beta continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) fail(ErrorKind::validation, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Two-sided p-value of Student's t with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) fail(ErrorKind::validation, "degrees of freedom must be positive");
  if (t == 0.0) return 1.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

// Two-sample t-test without assuming equal variances, with
// Welch-Satterthwaite degrees of freedom.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorKind::validation, "Welch test needs at least two values per sample");
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  if (va == 0.0 && vb == 0.0) fail(ErrorKind::validation, "Welch test is undefined when both samples are constant");
  const double se2 = va + vb;
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(se2);
  const double na1 = static_cast<double>(a.size() - 1);
  const double nb1 = static_cast<double>(b.size() - 1);
  r.df = se2 * se2 / (va * va / na1 + vb * vb / nb1);
  r.p_two_sided = t_two_sided_p(r.t, r.df);
  return r;
}

// Bernoulli sample with `successes` ones among `n` values.
inline std::vector<double> bernoulli_sample(std::size_t successes, std::size_t n) {
  if (successes > n) fail(ErrorKind::validation, "more successes than trials");
  std::vector<double> out(n, 0.0);
  std::fill_n(out.begin(), successes, 1.0);
  return out;
}

inline double raw_agreement(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) fail(ErrorKind::validation, "annotation vectors differ in length");
  if (a.empty()) fail(ErrorKind::validation, "agreement of empty annotation vectors");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// Cohen's kappa with marginal-product chance agreement. When chance agreement
// is 1 (both raters constant and equal) kappa is defined as 1.
inline double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  const double po = raw_agreement(a, b);
  const double n = static_cast<double>(a.size());
  const double pa = static_cast<double>(std::count(a.begin(), a.end(), true)) / n;
  const double pb = static_cast<double>(std::count(b.begin(), b.end(), true)) / n;
  const double pe = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

struct BootstrapConfig {
  std::size_t iterations = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Linear interpolation between order statistics (numpy's default).
inline double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

// Percentile bootstrap of the mean. Each resample draws from its own
// generator seeded from a sequence fixed up front, so the result does not
// depend on the worker count. The reported mean is the mean of the resampled
// means.
inline Interval bootstrap_ci(std::span<const double> values, const BootstrapConfig& cfg = {}) {
  if (values.empty()) fail(ErrorKind::validation, "bootstrap of an empty sample");
  if (cfg.iterations == 0) fail(ErrorKind::validation, "bootstrap needs at least one iteration");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) fail(ErrorKind::validation, "confidence level must lie in (0, 1)");
  Rng seeder(cfg.seed);
  std::vector<std::uint64_t> seeds(cfg.iterations);
  for (auto& s : seeds) s = seeder();

  std::vector<double> means(cfg.iterations);
  parallel_for(cfg.iterations, cfg.workers, [&](std::size_t it) {
    Rng rng(seeds[it]);
    std::vector<double> resample(values.size());
    for (auto& v : resample) v = values[static_cast<std::size_t>(uniform_below(rng, values.size()))];
    means[it] = mean(resample);
  });
  Interval out;
  out.mean = mean(means);
  std::sort(means.begin(), means.end());
  out.low = std::min(percentile(means, (1.0 - cfg.level) / 2.0), out.mean);
  out.high = std::max(percentile(means, (1.0 + cfg.level) / 2.0), out.mean);
  return out;
}

// ---------------------------------------------------------------------------
// Expert annotations

struct AnnotationRecord {
  std::string pair_id;
  std::string annotator_id;
  std::string method;  // generator that produced the pair; used for per-method counts
  bool correct = false;
  bool lexical = false;
  bool abbreviation = false;
  bool negation = false;
};

inline void validate(const AnnotationRecord& r) {
  if (!r.correct && (r.lexical || r.abbreviation || r.negation)) {
    fail(ErrorKind::input, "annotation of " + r.pair_id + " by " + r.annotator_id +
                               " marks lexical/abbreviation/negation on an incorrect answer");
  }
}

struct CombinedAnnotation {
  std::string pair_id;
  std::string method;
  bool correct_any = false;
  bool semantic = false;
  bool lexical = false;
  bool abbreviation = false;
  bool negation = false;
};

struct MethodCounts {
  std::size_t pairs = 0;
  std::size_t semantic = 0;
  std::size_t lexical = 0;
  std::size_t abbreviation = 0;
};

struct CombinedAnnotations {
  std::vector<CombinedAnnotation> pairs;  // sorted by pair_id
  std::map<std::string, MethodCounts> by_method;
};

// Two-annotator combination: lexical and abbreviation if either annotator
// marked them; semantic if at least one marked the answer correct and
// neither marked it lexical or abbreviation.
inline CombinedAnnotations combine_annotations(const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::vector<const AnnotationRecord*>> by_pair;
  for (const auto& r : records) {
    validate(r);
    by_pair[r.pair_id].push_back(&r);
  }
  CombinedAnnotations out;
  for (const auto& [pair_id, recs] : by_pair) {
    std::set<std::string> annotators;
    for (const auto* r : recs) annotators.insert(r->annotator_id);
    if (recs.size() != 2 || annotators.size() != 2) {
      fail(ErrorKind::input, "pair " + pair_id + " needs exactly one record from each of two annotators");
    }
    if (recs[0]->method != recs[1]->method) fail(ErrorKind::input, "pair " + pair_id + " has conflicting methods");
    CombinedAnnotation c;
    c.pair_id = pair_id;
    c.method = recs[0]->method;
    c.correct_any = recs[0]->correct || recs[1]->correct;
    c.lexical = recs[0]->lexical || recs[1]->lexical;
    c.abbreviation = recs[0]->abbreviation || recs[1]->abbreviation;
    c.negation = recs[0]->negation || recs[1]->negation;
    c.semantic = c.correct_any && !c.lexical && !c.abbreviation;
    auto& counts = out.by_method[c.method];
    ++counts.pairs;
    counts.semantic += c.semantic ? 1 : 0;
    counts.lexical += c.lexical ? 1 : 0;
    counts.abbreviation += c.abbreviation ? 1 : 0;
    out.pairs.push_back(std::move(c));
  }
  return out;
}

inline AnnotationRecord annotation_from_json(const Json& j) {
  AnnotationRecord r;
  r.pair_id = required<std::string>(j, "pair_id");
  r.annotator_id = required<std::string>(j, "annotator_id");
  r.method = j.value("method", std::string{});
  r.correct = required<bool>(j, "correct");
  r.lexical = j.value("lexical", false);
  r.abbreviation = j.value("abbreviation", false);
  r.negation = j.value("negation", false);
  return r;
}

}  // namespace xaiqa::stats
