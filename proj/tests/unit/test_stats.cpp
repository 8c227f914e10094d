#include <gtest/gtest.h>

#include "xaiqa/stats.hpp"

using namespace xaiqa;
using namespace xaiqa::stats;

// Oracle values below were computed with scipy 1.x (ttest_ind equal_var=False,
// special.betainc) and numpy.percentile.

TEST(IncompleteBeta, ScipyValues) {
  EXPECT_NEAR(incomplete_beta(0.5, 0.5, 0.3), 0.36901011956554536, 1e-12);
  EXPECT_NEAR(incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
  EXPECT_NEAR(incomplete_beta(10, 0.5, 0.9), 0.15164090963470994, 1e-12);
  EXPECT_NEAR(incomplete_beta(100, 0.5, 0.99), 0.1567758654244408, 1e-11);
  EXPECT_NEAR(incomplete_beta(0.1, 7, 0.01), 0.7961237717987596, 1e-12);
  EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
  EXPECT_THROW(incomplete_beta(0, 3, 0.5), Error);
}

TEST(Welch, SemanticProportions) {
  const auto a = bernoulli_sample(65, 200);
  const auto b = bernoulli_sample(30, 200);
  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.t, 4.191583157873571, 1e-10);
  EXPECT_NEAR(r.p_two_sided, 3.464984847766455e-05, 1e-12);
  EXPECT_LT(r.p_two_sided, 0.001);
  const auto s = welch_t_test(b, a);
  EXPECT_EQ(s.t, -r.t);
  EXPECT_EQ(s.p_two_sided, r.p_two_sided);
}

TEST(Welch, RealValuedSamples) {
  const std::vector<double> a = {1.2, 3.4, 2.2, 5.1, 4.4, 3.3};
  const std::vector<double> c = {0.5, 0.9, 1.7, 2.2, 1.1};
  const auto r = welch_t_test(a, c);
  EXPECT_NEAR(r.t, 3.0431937601062615, 1e-10);
  EXPECT_NEAR(r.p_two_sided, 0.017582493289824554, 1e-10);
  const auto same = welch_t_test(a, a);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p_two_sided, 1.0);
}

TEST(Welch, Errors) {
  const std::vector<double> one = {1.0};
  const std::vector<double> two = {1.0, 2.0};
  const std::vector<double> flat = {3.0, 3.0, 3.0};
  EXPECT_THROW(welch_t_test(one, two), Error);
  EXPECT_THROW(welch_t_test(flat, flat), Error);
  EXPECT_NO_THROW(welch_t_test(flat, two));
  EXPECT_THROW(bernoulli_sample(3, 2), Error);
}

TEST(Kappa, ContingencyArithmetic) {
  const std::vector<bool> a = {1, 1, 0, 1, 0, 0, 1, 1, 1, 0};
  const std::vector<bool> b = {1, 0, 0, 1, 0, 1, 1, 1, 0, 0};
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    (a[i] ? (b[i] ? n11 : n10) : (b[i] ? n01 : n00)) += 1;
  }
  const double n = n11 + n10 + n01 + n00;
  const double po = (n11 + n00) / n;
  const double pe = ((n11 + n10) / n) * ((n11 + n01) / n) + ((n01 + n00) / n) * ((n10 + n00) / n);
  EXPECT_NEAR(raw_agreement(a, b), po, 1e-12);
  EXPECT_NEAR(cohen_kappa(a, b), (po - pe) / (1 - pe), 1e-12);
  EXPECT_NEAR(cohen_kappa(a, b), 0.4, 1e-12);
  EXPECT_NEAR(cohen_kappa(a, a), 1.0, 1e-12);
  std::vector<bool> flipped;
  for (bool v : a) flipped.push_back(!v);
  const double pa = 0.6;
  const double pe_flip = pa * (1 - pa) * 2;
  EXPECT_NEAR(cohen_kappa(a, flipped), (0.0 - pe_flip) / (1 - pe_flip), 1e-12);
  EXPECT_EQ(cohen_kappa({true, true}, {true, true}), 1.0);
  EXPECT_THROW(cohen_kappa({true}, {true, false}), Error);
  EXPECT_THROW(raw_agreement({}, {}), Error);
}

TEST(Percentile, NumpyLinear) {
  const std::vector<double> v = {1, 2, 3, 4, 10};
  EXPECT_NEAR(percentile(v, 0.025), 1.1, 1e-12);
  EXPECT_NEAR(percentile(v, 0.975), 9.4, 1e-12);
  EXPECT_EQ(percentile(v, 0.0), 1.0);
  EXPECT_EQ(percentile(v, 1.0), 10.0);
}

TEST(Bootstrap, ConstantIsDegenerate) {
  for (double c : {0.0, 1.0, 0.1, 0.7, 1.0 / 3.0}) {
    const std::vector<double> v(37, c);
    const auto iv = bootstrap_ci(v);
    EXPECT_EQ(iv.mean, c);
    EXPECT_EQ(iv.low, c);
    EXPECT_EQ(iv.high, c);
  }
}

TEST(Bootstrap, DeterministicAndWorkerIndependent) {
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back((i * 37 % 11) / 10.0);
  BootstrapConfig a;
  a.seed = 3;
  BootstrapConfig b = a;
  b.workers = 4;
  const auto x = bootstrap_ci(v, a);
  const auto y = bootstrap_ci(v, b);
  EXPECT_EQ(x.mean, y.mean);
  EXPECT_EQ(x.low, y.low);
  EXPECT_EQ(x.high, y.high);
  EXPECT_LE(x.low, x.mean);
  EXPECT_LE(x.mean, x.high);
  EXPECT_NEAR(x.mean, mean(v), 0.02);
}

TEST(Bootstrap, IntervalShrinksWithSampleSize) {
  auto width = [](std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i % 2);
    BootstrapConfig cfg;
    cfg.seed = seed;
    const auto iv = bootstrap_ci(v, cfg);
    return iv.high - iv.low;
  };
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) EXPECT_LT(width(1000, seed), width(100, seed));
}

TEST(Bootstrap, Errors) {
  EXPECT_THROW(bootstrap_ci(std::vector<double>{}), Error);
  BootstrapConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(bootstrap_ci(std::vector<double>{1.0}, cfg), Error);
  cfg = {};
  cfg.level = 1.0;
  EXPECT_THROW(bootstrap_ci(std::vector<double>{1.0}, cfg), Error);
}

namespace {

AnnotationRecord rec(std::string pair, std::string who, bool correct, bool lexical = false, bool abbreviation = false) {
  return {std::move(pair), std::move(who), "xaiqa", correct, lexical, abbreviation, false};
}

}  // namespace

TEST(Annotations, CombinationRules) {
  const auto both_lexical = combine_annotations({rec("p", "A", true, true), rec("p", "B", true, true)});
  EXPECT_TRUE(both_lexical.pairs[0].lexical);
  EXPECT_FALSE(both_lexical.pairs[0].semantic);
  const auto one_correct = combine_annotations({rec("p", "A", true), rec("p", "B", false)});
  EXPECT_TRUE(one_correct.pairs[0].semantic);
  const auto one_abbrev = combine_annotations({rec("p", "A", true), rec("p", "B", true, false, true)});
  EXPECT_FALSE(one_abbrev.pairs[0].semantic);
  EXPECT_TRUE(one_abbrev.pairs[0].abbreviation);
  const auto neither = combine_annotations({rec("p", "A", false), rec("p", "B", false)});
  EXPECT_FALSE(neither.pairs[0].semantic);
  EXPECT_FALSE(neither.pairs[0].correct_any);
}

TEST(Annotations, Validation) {
  EXPECT_THROW(combine_annotations({rec("p", "A", false, true), rec("p", "B", true)}), Error);
  EXPECT_THROW(combine_annotations({rec("p", "A", true)}), Error);
  EXPECT_THROW(combine_annotations({rec("p", "A", true), rec("p", "A", true)}), Error);
  auto other = rec("p", "B", true);
  other.method = "cosine";
  EXPECT_THROW(combine_annotations({rec("p", "A", true), other}), Error);
}

TEST(Annotations, ReconstructedSummaryRow) {
  // 200 pairs: 65 semantic, 90 lexical only, 18 lexical + abbreviation, 27 abbreviation only.
  std::vector<AnnotationRecord> recs;
  for (int i = 0; i < 200; ++i) {
    const auto id = "p" + std::to_string(i);
    if (i < 65) {
      recs.push_back(rec(id, "A", true));
      recs.push_back(rec(id, "B", i % 3 == 0));
    } else if (i < 155) {
      recs.push_back(rec(id, "A", true, true));
      recs.push_back(rec(id, "B", i % 2 == 0));
    } else if (i < 173) {
      recs.push_back(rec(id, "A", true, true));
      recs.push_back(rec(id, "B", true, false, true));
    } else {
      recs.push_back(rec(id, "A", true, false, i % 2 == 0));
      recs.push_back(rec(id, "B", true, false, i % 2 != 0));
    }
  }
  const auto combined = combine_annotations(recs);
  const auto& c = combined.by_method.at("xaiqa");
  EXPECT_EQ(c.pairs, 200u);
  EXPECT_EQ(c.semantic, 65u);
  EXPECT_EQ(c.abbreviation, 45u);
  EXPECT_EQ(c.lexical, 108u);
}
