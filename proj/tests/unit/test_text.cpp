#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <numeric>

#include "xaiqa/jsonl.hpp"
#include "xaiqa/parallel.hpp"
#include "xaiqa/rng.hpp"
#include "xaiqa/text.hpp"
#include "../support/fixtures.hpp"

using namespace xaiqa;

TEST(Text, DecodeCountsScalarsNotBytes) {
  const std::string s = "caf\xC3\xA9 \xE2\x80\xA2 x";  // "café • x"
  EXPECT_EQ(text::scalar_length(s), 8u);
  text::Utf8Index idx(s);
  EXPECT_EQ(idx.size(), 8u);
  EXPECT_EQ(idx.byte_at(4), 5u);
  EXPECT_EQ(idx.byte_at(8), s.size());
}

TEST(Text, InvalidBytesBecomeReplacementScalars) {
  const std::string bad = "a\xFF" "b";
  const auto sc = text::decode(bad);
  ASSERT_EQ(sc.size(), 3u);
  EXPECT_EQ(sc[1].cp, 0xFFFDu);
  std::string round;
  text::append_utf8(round, 0x20AC);
  EXPECT_EQ(round, "\xE2\x82\xAC");
}

TEST(Text, TokenizeLowercasesAlphanumericRuns) {
  EXPECT_EQ(text::tokenize("Hypertension, BP 140/90!"),
            (std::vector<std::string>{"hypertension", "bp", "140", "90"}));
  EXPECT_EQ(text::tokenize("don't"), (std::vector<std::string>{"don", "t"}));
  EXPECT_TRUE(text::tokenize("  ...  ").empty());
  EXPECT_EQ(text::tokenize("\xE2\x80\xA2 caf\xC3\xA9"), (std::vector<std::string>{"caf\xC3\xA9"}));
}

TEST(Text, TrimHandlesUnicodeSpace) {
  EXPECT_EQ(text::trim("\xC2\xA0 abc \n"), "abc");
  EXPECT_EQ(text::trim("   "), "");
}

TEST(Text, HashIsSeededAndStable) {
  EXPECT_EQ(text::fnv1a64("", 0), 1469598103934665603ULL);
  EXPECT_NE(text::fnv1a64("abc", 1), text::fnv1a64("abc", 2));
  EXPECT_EQ(text::hex64(255), "00000000000000ff");
}

TEST(Rng, SeededSequencesRepeat) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(uniform_below(a, 17), uniform_below(b, 17));
}

TEST(Rng, UniformBelowIsRoughlyUniform) {
  Rng rng(1);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[uniform_below(rng, 4)];
  for (int c : counts) EXPECT_NEAR(c / 40000.0, 0.25, 0.01);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(3);
  auto s = sample_without_replacement(rng, 10, 7);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::unique(s.begin(), s.end()), s.end());
  EXPECT_EQ(s.size(), 7u);
  EXPECT_EQ(sample_without_replacement(rng, 3, 9).size(), 3u);
}

TEST(Parallel, EveryIndexOnceAndLowestErrorWins) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, 8, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 70) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "30");
  }
}

TEST(Jsonl, ReportsLineNumberOfBadRecord) {
  fixtures::TempDir dir("jsonl");
  write_text(dir / "x.jsonl", "{\"a\": 1}\n\n{oops}\n");
  try {
    read_jsonl(dir / "x.jsonl", [](const Json&, std::size_t) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, RoundTrip) {
  fixtures::TempDir dir("jsonl");
  write_jsonl(dir / "sub/y.jsonl", {Json{{"k", "v"}}, Json{{"k", 2}}});
  std::vector<Json> back;
  read_jsonl(dir / "sub/y.jsonl", [&](const Json& j, std::size_t) { back.push_back(j); });
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1]["k"], 2);
  EXPECT_THROW(read_text(dir / "missing"), Error);
}
