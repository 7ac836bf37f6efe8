#include <gtest/gtest.h>

#include <sstream>

#include "omnitrace/omnitrace.hpp"
#include "test_support.hpp"

using namespace omnitrace;
using namespace omnitrace::testing;

namespace {

const char* kHeader =
    R"({"version":1,"example_id":"ex","space_joined":false,)"
    R"("timeline":{"tokens":[{"index":0,"modality":"text","text":"A"},{"index":1,"modality":"text","text":" b"},)"
    R"({"index":2,"modality":"image"},{"index":3,"modality":"image"}]},)"
    R"("sources":[{"id":0,"modality":"text","range":[0,2]},{"id":1,"modality":"image","range":[2,4]}]})";

ErrorCode code_of(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

std::string message_of(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(TraceIo, HeaderOnlyGivesEmptyGeneration) {
  const Trace t = parse_trace(std::string(kHeader) + "\n");
  EXPECT_TRUE(t.steps.empty());
  EXPECT_EQ(t.generated_text, "");
  EXPECT_EQ(t.timeline.size(), 4u);
  ASSERT_EQ(t.sources.size(), 2u);
  EXPECT_EQ(t.sources[1].modality, Modality::kImage);
}

TEST(TraceIo, OverlappingSourcesRejected) {
  std::string h = kHeader;
  h.replace(h.find("[2,4]"), 5, "[1,4]");
  EXPECT_EQ(code_of(h), ErrorCode::kValidation);
  EXPECT_NE(message_of(h).find("sources overlap"), std::string::npos);
}

TEST(TraceIo, StepsWithGrowingContextAccepted) {
  std::string text = std::string(kHeader) + "\n";
  text += R"({"t":1,"token":"X","channels":{"attn":{"dense":[0.1,0.2,0.3,0.4]}}})" "\n";
  text += R"({"t":2,"token":" y","channels":{"attn":{"dense":[0.1,0.2,0.3,0.2,0.2]}}})" "\n";
  text += R"({"t":3,"token":".","channels":{"attn":{"sparse":{"idx":[0,5],"val":[0.5,0.5]}}}})" "\n";
  const Trace t = parse_trace(text);
  ASSERT_EQ(t.steps.size(), 3u);
  EXPECT_EQ(t.generated_text, "X y.");
  EXPECT_TRUE(t.steps[2].channels.at("attn").rows[0].sparse);
}

TEST(TraceIo, SynthTraceRoundTripsByteExactly) {
  SynthSpec spec;
  spec.chunks = 1;
  spec.steps_per_chunk = 3;
  spec.noise = 0.25;
  spec.layers = 2;
  spec.heads = 3;
  spec.seed = 11;
  const Trace t = generate_trace(spec).trace;
  // Dense rows at steps 1..3 cover n, n+1, n+2 positions.
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_EQ(t.steps[k].channels.at("attn").rows[0].dense.size(), t.timeline.size() + k);
  const std::string once = serialize_trace(t);
  const Trace back = parse_trace(once);
  EXPECT_EQ(back, t);
  EXPECT_EQ(serialize_trace(back), once);
}

TEST(TraceIo, SparseLayerHeadRoundTrip) {
  SynthSpec spec;
  spec.sparse = true;
  spec.layers = 2;
  spec.heads = 2;
  spec.modalities = {Modality::kAudio, Modality::kText};
  spec.seed = 5;
  const Trace t = generate_trace(spec).trace;
  EXPECT_TRUE(t.steps[0].channels.at("attn").rows[0].sparse);
  EXPECT_EQ(parse_trace(serialize_trace(t)), t);
}

TEST(TraceIo, MalformedLineReportsLineNumber) {
  const std::string text = std::string(kHeader) + "\n{\"t\":1,\n";
  try {
    parse_trace(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
}

TEST(TraceIo, UnsupportedVersion) {
  std::string h = kHeader;
  h.replace(h.find("\"version\":1"), 11, "\"version\":2");
  EXPECT_EQ(code_of(h), ErrorCode::kUnsupportedVersion);
}

TEST(TraceIo, UnknownFieldsWarnOnce) {
  std::string text = std::string(kHeader);
  text.insert(1, "\"producer\":\"x\",");
  text += "\n";
  text += R"({"t":1,"token":"X","extra":1,"channels":{"attn":{"dense":[0,0,0,1]}}})" "\n";
  text += R"({"t":2,"token":"Y","extra":2,"channels":{"attn":{"dense":[0,0,0,1,0]}}})" "\n";
  std::vector<std::string> warnings;
  parse_trace(text, &warnings);
  ASSERT_EQ(warnings.size(), 2u);
  EXPECT_NE(warnings[0].find("producer"), std::string::npos);
  EXPECT_NE(warnings[1].find("extra"), std::string::npos);
}

TEST(TraceIo, StepValidation) {
  const std::string h = std::string(kHeader) + "\n";
  // wrong dense length
  EXPECT_EQ(code_of(h + R"({"t":1,"token":"X","channels":{"attn":{"dense":[0,1]}}})"), ErrorCode::kValidation);
  EXPECT_NE(message_of(h + R"({"t":1,"token":"X","channels":{"attn":{"dense":[0,1]}}})").find("(line 2)"),
            std::string::npos);
  // gap in steps
  EXPECT_EQ(code_of(h + R"({"t":2,"token":"X","channels":{}})"), ErrorCode::kValidation);
  // sparse indices not increasing
  EXPECT_EQ(code_of(h + R"({"t":1,"token":"X","channels":{"a":{"sparse":{"idx":[2,1],"val":[1,1]}}}})"),
            ErrorCode::kValidation);
  // sparse index beyond context
  EXPECT_EQ(code_of(h + R"({"t":1,"token":"X","channels":{"a":{"sparse":{"idx":[4],"val":[1]}}}})"),
            ErrorCode::kValidation);
  // negative attention
  EXPECT_EQ(code_of(h + R"({"t":1,"token":"X","channels":{"attn":{"dense":[0,-1,0,1]}}})"),
            ErrorCode::kValidation);
  // wrong row count for lh_shape
  EXPECT_EQ(code_of(h + R"({"t":1,"token":"X","channels":{"attn":{"lh_shape":[2,1],"dense":[[0,0,0,1]]}}})"),
            ErrorCode::kValidation);
}

TEST(TraceIo, GradientChannelsMayBeNegative) {
  const std::string text =
      std::string(kHeader) + "\n" + R"({"t":1,"token":"X","channels":{"attgrad":{"dense":[0,-1,0,1]}}})";
  EXPECT_NO_THROW(parse_trace(text));
}

TEST(TraceIo, DeclaredGeneratedTextMustMatch) {
  std::string h = kHeader;
  h.insert(1, "\"generated_text\":\"nope\",");
  const std::string text = h + "\n" + R"({"t":1,"token":"X","channels":{}})";
  EXPECT_EQ(code_of(text), ErrorCode::kValidation);
  std::string ok = kHeader;
  ok.insert(1, "\"generated_text\":\"X\",");
  EXPECT_NO_THROW(parse_trace(ok + "\n" + R"({"t":1,"token":"X","channels":{}})"));
}

TEST(TraceIo, SpaceJoinedDetokenization) {
  std::string h = kHeader;
  h.replace(h.find("\"space_joined\":false"), 20, "\"space_joined\":true");
  const Trace t = parse_trace(h + "\n" + R"({"t":1,"token":"Hi","channels":{}})" "\n" +
                              R"({"t":2,"token":"there","channels":{}})");
  EXPECT_EQ(t.generated_text, "Hi there");
  EXPECT_EQ(parse_trace(serialize_trace(t)), t);
}

TEST(TraceIo, MissingSourcesAreBuiltFromSegmentHints) {
  const std::string text =
      R"({"version":1,"example_id":"a","timeline":{"duration_s":20,"tokens":[)"
      R"({"index":0,"modality":"audio","time":[0,4]},{"index":1,"modality":"audio","time":[4,8]},)"
      R"({"index":2,"modality":"audio","time":[8,12]},{"index":3,"modality":"audio","time":[12,16]},)"
      R"({"index":4,"modality":"audio","time":[16,20]}]},)"
      R"("segment_hints":[{"time":[0,5]},{"time":[5,12]},{"time":[12,20]}]})";
  const Trace t = parse_trace(text);
  ASSERT_EQ(t.sources.size(), 3u);
  EXPECT_EQ(t.sources[1].time, (Interval{5, 12}));
  EXPECT_EQ(t.sources[1].token_range, (TokenRange{1, 3}));
}

TEST(TraceIo, SameMalformedInputSameError) {
  std::string h = kHeader;
  h.replace(h.find("[2,4]"), 5, "[1,4]");
  EXPECT_EQ(message_of(h), message_of(h));
  EXPECT_EQ(code_of(h), code_of(h));
}

TEST(TraceIo, OptionMapMustReferenceSources) {
  std::string h = kHeader;
  h.insert(1, "\"option_map\":{\"A\":7},");
  EXPECT_EQ(code_of(h), ErrorCode::kValidation);
}

namespace {

Trace two_sentence_trace() {
  std::vector<StepRecord> steps;
  const char* toks[] = {"A", " cat", ".", " A", " dog", "."};
  for (std::size_t k = 0; k < 6; ++k) {
    std::vector<double> row(4 + k, 0.0);
    row[0] = 1.0;
    steps.push_back(attn_step(k + 1, toks[k], row));
  }
  return make_trace(4, {source(0, 0, 2), source(1, 2, 4, Modality::kImage)}, steps);
}

}  // namespace

TEST(Gold, WellFormedAgainstTrace) {
  const Trace t = two_sentence_trace();
  std::istringstream in(R"({"example_id":"ex","chunks":[{"source_ids":[1,0]},{"source_ids":[]}]})");
  const GoldLabels g = validate_gold(in, t);
  ASSERT_EQ(g.chunk_count(), 2u);
  EXPECT_EQ(g.chunks[0].source_ids, (std::vector<SourceId>{0, 1}));
}

TEST(Gold, UnknownSourceId) {
  const Trace t = two_sentence_trace();
  std::istringstream in(R"({"example_id":"ex","chunks":[{"source_ids":[99]},{"source_ids":[]}]})");
  try {
    validate_gold(in, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.message(), "unknown source id 99");
    EXPECT_EQ(e.code(), ErrorCode::kGold);
  }
}

TEST(Gold, InvertedInterval) {
  std::istringstream in(R"({"example_id":"ex","chunks":[{"spans":[[5.0,3.0]]}]})");
  try {
    parse_gold(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.message(), "inverted interval");
  }
}

TEST(Gold, ChunkCountAndExampleIdMismatch) {
  const Trace t = two_sentence_trace();
  std::istringstream one(R"({"example_id":"ex","chunks":[{"source_ids":[0]}]})");
  EXPECT_THROW(validate_gold(one, t), Error);
  std::istringstream other(R"({"example_id":"zz","chunks":[{"source_ids":[0]},{"source_ids":[]}]})");
  EXPECT_THROW(validate_gold(other, t), Error);
}

TEST(Gold, OverlappingSpansMerged) {
  std::istringstream in(R"({"example_id":"ex","chunks":[{"spans":[[3,5],[0,2],[1.5,3.5],[7,7]]}]})");
  const GoldLabels g = parse_gold(in);
  EXPECT_EQ(g.chunks[0].spans, (std::vector<Interval>{{0, 5}, {7, 7}}));
  std::ostringstream out;
  serialize_gold(g, out);
  std::istringstream again(out.str());
  EXPECT_EQ(parse_gold(again), g);
}
