#include <gtest/gtest.h>

#include <random>

#include "omnitrace/omnitrace.hpp"
#include "test_support.hpp"

using namespace omnitrace;
using namespace omnitrace::testing;

namespace {

Trace trace_of(const std::vector<std::string>& tokens, bool space_joined = false) {
  std::vector<StepRecord> steps;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    StepRecord s;
    s.step = k + 1;
    s.token_text = tokens[k];
    steps.push_back(s);
  }
  Trace t = make_trace(2, {source(0, 0, 2)}, steps);
  t.space_joined = space_joined;
  t.generated_text = detokenize(t.steps, space_joined);
  return t;
}

std::vector<std::string> texts(const std::string& text, const Segmenter& seg = default_segmenter()) {
  std::vector<std::string> out;
  for (const auto& r : seg.split(text)) out.push_back(text.substr(r.begin, r.size()));
  return out;
}

}  // namespace

TEST(Chunking, TwoSentences) {
  const Trace t = trace_of({"A", " cat", ".", " A", " dog", "."});
  const auto chunks = segment_output(t);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, "A cat.");
  EXPECT_EQ(chunks[0].char_range, (CharRange{0, 6}));
  EXPECT_EQ(chunks[0].token_steps, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(chunks[1].text, " A dog.");
  EXPECT_EQ(chunks[1].token_steps, (std::vector<std::size_t>{4, 5, 6}));
  EXPECT_EQ(chunks[1].index, 1u);
}

TEST(Chunking, EmptyGenerationHasNoChunks) {
  EXPECT_TRUE(segment_output(trace_of({})).empty());
  EXPECT_TRUE(default_segmenter().split("").empty());
}

TEST(Chunking, AbbreviationsDoNotSplit) {
  EXPECT_EQ(texts("See e.g. Fig 1."), (std::vector<std::string>{"See e.g. Fig 1."}));
  EXPECT_EQ(texts("Dr. Smith came. He left."), (std::vector<std::string>{"Dr. Smith came.", " He left."}));
  EXPECT_EQ(texts("See Fig. 2 now.").size(), 1u);
  Segmenter custom({"e.g."});
  EXPECT_EQ(texts("See Fig. 2 now.", custom).size(), 2u);
  EXPECT_EQ(texts("2. Second item"), (std::vector<std::string>{"2. Second item"}));
}

TEST(Chunking, NewlinesStartNewChunks) {
  EXPECT_EQ(texts("- one\n- two\n- three"), (std::vector<std::string>{"- one", "\n- two", "\n- three"}));
}

TEST(Chunking, TerminalRunsAndClosers) {
  EXPECT_EQ(texts("Really?! Yes. (Fine.) Ok"),
            (std::vector<std::string>{"Really?!", " Yes.", " (Fine.)", " Ok"}));
  EXPECT_EQ(texts("3.14 is pi."), (std::vector<std::string>{"3.14 is pi."}));
}

TEST(Chunking, FullWidthTerminators) {
  EXPECT_EQ(texts("\xE4\xBD\xA0\xE5\xA5\xBD\xE3\x80\x82\xE5\x86\x8D\xE8\xA7\x81").size(), 2u);
}

TEST(Chunking, SpaceJoinedTokens) {
  const Trace t = trace_of({"Hello", "world", ".", "Bye", "."}, true);
  const auto chunks = segment_output(t);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].token_steps, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(chunks[1].token_steps, (std::vector<std::size_t>{4, 5}));
}

TEST(Chunking, TokenStraddlingBoundaryGoesToMajority) {
  // ". A" has its period in chunk 0 and two bytes in chunk 1.
  const Trace t = trace_of({"Hi", ". A", " b"});
  const auto chunks = segment_output(t);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].token_steps, (std::vector<std::size_t>{1}));
  EXPECT_EQ(chunks[1].token_steps, (std::vector<std::size_t>{2, 3}));
}

TEST(ChunkingProperty, PartitionsAreLosslessAndIdempotent) {
  std::mt19937_64 gen(7);
  const std::vector<std::string> vocab = {"A",  " cat", ".",  " dog", "!",   "?",  "\n", " e.g.", " Dr.",
                                          " 3", ".5",   ")",  " \"x", ".\"", " ", "word", "\xE3\x80\x82"};
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<std::string> toks;
    const std::size_t len = gen() % 15;
    for (std::size_t i = 0; i < len; ++i) toks.push_back(vocab[gen() % vocab.size()]);
    const Trace t = trace_of(toks, gen() % 2 == 0);
    const auto chunks = segment_output(t);

    std::string joined;
    std::size_t prev_end = 0;
    for (const auto& c : chunks) {
      EXPECT_EQ(c.char_range.begin, prev_end);
      EXPECT_GT(c.char_range.size(), 0u);
      prev_end = c.char_range.end;
      joined += c.text;
    }
    EXPECT_EQ(joined, t.generated_text);

    std::vector<std::size_t> steps;
    for (const auto& c : chunks) steps.insert(steps.end(), c.token_steps.begin(), c.token_steps.end());
    if (!chunks.empty()) {
      ASSERT_EQ(steps.size(), t.steps.size());
      for (std::size_t k = 0; k < steps.size(); ++k) EXPECT_EQ(steps[k], k + 1);
    }

    for (const auto& c : chunks) {
      const auto again = default_segmenter().split(c.text);
      ASSERT_EQ(again.size(), 1u) << "chunk '" << c.text << "'";
      EXPECT_EQ(again[0], (CharRange{0, c.text.size()}));
    }
  }
}

TEST(PosTagger, ClosedClassesAndMorphology) {
  EXPECT_EQ(tag_pos(" the"), "DET");
  EXPECT_EQ(tag_pos(" 42"), "NUM");
  EXPECT_EQ(tag_pos(" running"), "VERB");
  EXPECT_EQ(tag_pos(" of"), "ADP");
  EXPECT_EQ(tag_pos(" quickly"), "ADV");
  EXPECT_EQ(tag_pos(" Paris"), "PROPN");
  EXPECT_EQ(tag_pos("Paris", true), "NOUN");
  EXPECT_EQ(tag_pos(" cat."), "NOUN");
  EXPECT_EQ(tag_pos("."), "X");
  EXPECT_EQ(tag_pos(" is"), "AUX");
}
