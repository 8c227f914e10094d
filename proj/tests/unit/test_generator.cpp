#include <gtest/gtest.h>

#include <map>

#include "xaiqa/generator.hpp"
#include "../support/fixtures.hpp"

using namespace xaiqa;

namespace {

struct DocSpec {
  std::string id;
  std::string text;
  std::vector<std::string> codes;
};

Corpus corpus_of(const std::vector<DocSpec>& docs, const std::vector<LabelEntry>& labels) {
  LabelVocabulary vocab;
  for (const auto& l : labels) vocab.add(l);
  std::vector<Document> out;
  std::vector<LabelAssignment> assignments;
  for (const auto& d : docs) {
    out.emplace_back(d.id, d.text);
    assignments.push_back({d.id, std::set<std::string>(d.codes.begin(), d.codes.end())});
  }
  return Corpus(std::move(out), std::move(vocab), std::move(assignments));
}

ImportanceMatrix matrix(const std::string& id, std::vector<std::string> codes, std::vector<double> scores) {
  ImportanceMatrix im;
  im.doc_id = id;
  im.num_sentences = scores.size() / codes.size();
  im.label_codes = std::move(codes);
  im.scores = std::move(scores);
  return im;
}

QAPair pair_for(const Corpus& corpus, const std::string& doc_id, const std::string& description,
                std::size_t sentence) {
  const auto& s = corpus.find(doc_id)->sentences().at(sentence);
  return QAPair{render_question(kDefaultQuestionTemplate, description), AnswerSpan{s.start, s.end, s.text},
                doc_id, "X", Method::xaiqa, 1.0, ""};
}

}  // namespace

TEST(Question, TemplateRendering) {
  EXPECT_EQ(render_question(kDefaultQuestionTemplate, "gout"),
            "Does the patient have gout in their medical history?");
  EXPECT_EQ(render_question("{X} or {X}?", "a"), "a or a?");
  EXPECT_THROW(render_question("no slot", "a"), Error);
}

TEST(GenerateXaiqa, PicksArgmaxSentence) {
  const auto corpus = corpus_of({{"d", "First one. Second one. Third one.", {"A"}}}, {{"A", "alpha"}});
  std::map<std::string, ImportanceMatrix> imp = {{"d", matrix("d", {"A"}, {0.1, 0.9, 0.2})}};
  const auto pairs = generate_xaiqa(corpus, imp);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].answer.text, "Second one.");
  EXPECT_EQ(pairs[0].score, 0.9);
  EXPECT_EQ(pairs[0].question, "Does the patient have alpha in their medical history?");
  EXPECT_EQ(pair_item_id(pairs[0]), "d--A");
}

TEST(GenerateXaiqa, TwoLabelsAndTies) {
  const auto corpus = corpus_of({{"d", "First one. Second one. Third one.", {"A", "B"}}}, {{"A", "alpha"}, {"B", "beta"}});
  std::map<std::string, ImportanceMatrix> imp = {
      {"d", matrix("d", {"A", "B"}, {0.3, 0.0, 0.1, 0.5, 0.3, 0.5})}};
  const auto pairs = generate_xaiqa(corpus, imp);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].label_code, "A");
  EXPECT_EQ(pairs[0].answer.text, "First one.");
  EXPECT_EQ(pairs[1].label_code, "B");
  EXPECT_EQ(pairs[1].answer.text, "Second one.");
}

TEST(GenerateXaiqa, MissingOrMismatchedImportance) {
  const auto corpus = corpus_of({{"d", "One. Two.", {"A"}}}, {{"A", "alpha"}});
  EXPECT_THROW(generate_xaiqa(corpus, {}), Error);
  std::map<std::string, ImportanceMatrix> bad = {{"d", matrix("d", {"A"}, {0.1, 0.2, 0.3})}};
  EXPECT_THROW(generate_xaiqa(corpus, bad), Error);
  std::map<std::string, ImportanceMatrix> other = {{"d", matrix("d", {"Z"}, {0.1, 0.2})}};
  EXPECT_THROW(generate_xaiqa(corpus, other), Error);
}

TEST(Generators, CountAndGroundednessOnPlantedCorpus) {
  const auto pc = fixtures::planted_corpus(30, 4);
  const auto corpus = pc.build();
  std::size_t positives = 0;
  for (std::size_t d = 0; d < corpus.documents().size(); ++d) positives += corpus.positives(d).size();
  std::map<std::string, ImportanceMatrix> imp;
  Rng rng(3);
  for (const auto& doc : corpus.documents()) {
    std::vector<double> s(doc.sentences().size() * corpus.vocab().entries().size());
    for (auto& v : s) v = uniform01(rng);
    std::vector<std::string> codes;
    for (const auto& e : corpus.vocab().entries()) codes.push_back(e.code);
    imp[doc.id()] = matrix(doc.id(), codes, s);
  }
  const auto emb = fit_corpus_embedder(corpus, 256, 0);
  const std::vector<std::vector<QAPair>> sets = {generate_xaiqa(corpus, imp), generate_cosine(corpus, emb),
                                                 generate_random(corpus, 5)};
  for (const auto& pairs : sets) {
    EXPECT_EQ(pairs.size(), positives);
    for (const auto& p : pairs) {
      EXPECT_TRUE(is_grounded(p, corpus)) << p.doc_id;
      EXPECT_EQ(corpus.find(p.doc_id)->slice(p.answer.start, p.answer.end), p.answer.text);
    }
    for (const auto& p : postprocess(pairs, corpus, emb)) {
      EXPECT_TRUE(is_grounded(p, corpus));
      EXPECT_EQ(p.method, Method::xaiqa_pp);
    }
  }
}

TEST(Postprocess, KeepsTheMatchingSegment) {
  const auto corpus = corpus_of({{"d", "Seen today. Known esophageal reflux; sleeps poorly at night. Home.", {"X"}}},
                                {{"X", "esophageal reflux"}});
  HashingEmbedder emb(512, 0);
  const auto out = postprocess({pair_for(corpus, "d", "esophageal reflux", 1)}, corpus, emb);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].answer.text, "Known esophageal reflux;");
  EXPECT_TRUE(is_grounded(out[0], corpus));
}

TEST(Postprocess, SingleSegmentUnchangedAndAllZeroTakesFirst) {
  const auto corpus = corpus_of({{"d", "Known gout flare. Quiet; calm; well.", {"X"}}}, {{"X", "gout"}});
  HashingEmbedder emb(512, 0);
  emb.fit(std::vector<std::string>{"gout", "known gout flare"});
  const auto single = postprocess({pair_for(corpus, "d", "gout", 0)}, corpus, emb);
  EXPECT_EQ(single[0].answer.text, "Known gout flare.");
  const auto zero = postprocess({pair_for(corpus, "d", "gout", 1)}, corpus, emb);
  EXPECT_EQ(zero[0].answer.text, "Quiet;");
}

TEST(Postprocess, NeverLengthensAndRejectsStaleAnswers) {
  const auto pc = fixtures::planted_corpus(20, 11);
  const auto corpus = pc.build();
  const auto emb = fit_corpus_embedder(corpus);
  const auto pairs = generate_random(corpus, 2);
  const auto out = postprocess(pairs, corpus, emb);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_LE(out[i].answer.end - out[i].answer.start, pairs[i].answer.end - pairs[i].answer.start);
    EXPECT_GE(out[i].answer.start, pairs[i].answer.start);
    EXPECT_LE(out[i].answer.end, pairs[i].answer.end);
  }
  auto stale = pairs.front();
  stale.answer.text += "x";
  EXPECT_THROW(postprocess({stale}, corpus, emb), Error);
}

TEST(GenerateCosine, PicksVerbatimDescription) {
  const auto corpus = corpus_of({{"d", "Seen in clinic. History of atrial fibrillation. Walks daily.", {"I48"}}},
                                {{"I48", "atrial fibrillation"}});
  const auto pairs = generate_cosine(corpus, fit_corpus_embedder(corpus));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].answer.text, "History of atrial fibrillation.");
}

TEST(GenerateCosine, NoOverlapFallsToFirstSentence) {
  const auto corpus = corpus_of({{"d", "Seen in clinic. Walks daily.", {"I48"}}}, {{"I48", "atrial fibrillation"}});
  const auto pairs = generate_cosine(corpus, fit_corpus_embedder(corpus));
  EXPECT_EQ(pairs[0].answer.text, "Seen in clinic.");
  EXPECT_EQ(pairs[0].score, 0.0);
}

TEST(GenerateRandom, UniformOverSentences) {
  std::vector<DocSpec> docs;
  for (int i = 0; i < 10000; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "d%05d", i);
    docs.push_back({id, "Zero. One. Two. Three.", {"A"}});
  }
  const auto corpus = corpus_of(docs, {{"A", "alpha"}});
  const auto pairs = generate_random(corpus, 42);
  std::map<std::string, double> freq;
  for (const auto& p : pairs) freq[p.answer.text] += 1.0 / static_cast<double>(pairs.size());
  ASSERT_EQ(freq.size(), 4u);
  for (const auto& [text, f] : freq) EXPECT_NEAR(f, 0.25, 0.02) << text;
  EXPECT_EQ(generate_random(corpus, 42), pairs);
}

TEST(SelectTopR, OrdersByScoreThenIds) {
  auto mk = [](std::string doc, std::string code, double score) {
    return QAPair{"q", AnswerSpan{0, 1, "a"}, std::move(doc), std::move(code), Method::xaiqa, score, ""};
  };
  const std::vector<QAPair> pairs = {mk("b", "A", 0.5), mk("a", "B", 0.5), mk("a", "A", 0.5), mk("c", "A", 0.9),
                                     mk("d", "A", 0.1)};
  const auto top = select_top_r(pairs, 3);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(pair_item_id(top[0]), "c--A");
  EXPECT_EQ(pair_item_id(top[1]), "a--A");
  EXPECT_EQ(pair_item_id(top[2]), "a--B");
  EXPECT_EQ(select_top_r(pairs, 50).size(), 5u);
  EXPECT_THROW(select_top_r(pairs, 0), Error);
  auto mixed = pairs;
  mixed[1].method = Method::cosine;
  EXPECT_THROW(select_top_r(mixed, 2), Error);
}

TEST(Mix, SizesAndErrors) {
  auto mk = [](std::string doc, Method m) {
    return QAPair{"q", AnswerSpan{0, 1, "a"}, std::move(doc), "A", m, 0.0, ""};
  };
  std::vector<QAPair> base, syn;
  for (int i = 0; i < 10; ++i) base.push_back(mk("b" + std::to_string(i), Method::base));
  for (int i = 0; i < 30; ++i) syn.push_back(mk("s" + std::to_string(i), Method::xaiqa));
  EXPECT_EQ(mix(base, syn, parse_ratio("1:1"), 0).size(), 20u);
  EXPECT_EQ(mix(base, syn, parse_ratio("1:2"), 0).size(), 30u);
  EXPECT_EQ(mix(base, syn, parse_ratio("3:1"), 0).size(), 13u);
  EXPECT_EQ(mix(base, syn, parse_ratio("1:0"), 0), base);
  EXPECT_EQ(mix(base, syn, parse_ratio("1:2"), 7), mix(base, syn, parse_ratio("1:2"), 7));
  const auto m = mix(base, syn, parse_ratio("1:3"), 1);
  std::set<std::string> ids;
  for (const auto& p : m) ids.insert(p.doc_id);
  EXPECT_EQ(ids.size(), 40u);
  EXPECT_THROW(mix(base, syn, parse_ratio("1:4"), 0), Error);
  EXPECT_THROW(mix(base, syn, parse_ratio("0:1"), 0), Error);
  EXPECT_THROW(parse_ratio("1-1"), Error);
  EXPECT_THROW(parse_ratio("1:x"), Error);
}

TEST(Pairs, JsonRoundTrip) {
  fixtures::TempDir dir("pairs");
  const auto corpus = fixtures::planted_corpus(5, 1).build();
  const auto pairs = generate_random(corpus, 9, kDefaultQuestionTemplate, "random-abc");
  save_pairs(dir / "p.jsonl", pairs);
  EXPECT_EQ(load_pairs(dir / "p.jsonl"), pairs);
  EXPECT_THROW(parse_method("nope"), Error);
}

TEST(Postprocess, BreakTokenFixtures) {
  HashingEmbedder emb(4096, 0);
  for (const auto& f : fixtures::split_fixtures()) {
    const auto corpus = corpus_of({{"d", f.text, {"X"}}}, {{"X", f.description}});
    const auto before = pair_for(corpus, "d", f.description, f.sentence);
    const auto out = postprocess({before}, corpus, emb);
    EXPECT_EQ(out[0].answer.text, f.expected) << f.text;
    EXPECT_TRUE(is_grounded(out[0], corpus));
    EXPECT_LE(out[0].answer.end - out[0].answer.start, before.answer.end - before.answer.start);
  }
}
