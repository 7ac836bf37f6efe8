#include <gtest/gtest.h>

#include <random>

#include "omnitrace/omnitrace.hpp"
#include "oracles/trace_oracle.hpp"
#include "test_support.hpp"

using namespace omnitrace;
using namespace omnitrace::testing;

namespace {

StepRecord step_with(const std::string& channel, ScoreVector v, std::size_t t = 1) {
  StepRecord s;
  s.step = t;
  s.token_text = " x";
  s.channels[channel] = std::move(v);
  return s;
}

std::vector<SourceUnit> quarter_sources() {
  return {source(0, 0, 1), source(1, 1, 2), source(2, 2, 3), source(3, 3, 4)};
}

ReducedStepSignal signal(std::vector<double> scores) {
  ReducedStepSignal s;
  s.step = 1;
  s.scores = std::move(scores);
  return s;
}

}  // namespace

TEST(Tracing, AttMeanOfIdenticalRowsIsThatRow) {
  const std::vector<double> row = {0.1, 0.2, 0.3, 0.4};
  const auto step = step_with("attn", dense_lh(2, 3, std::vector<std::vector<double>>(6, row)));
  const auto out = reduce_channel(step, 4, ChannelMethod::attmean());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.scores[i], row[i], 1e-12);
}

TEST(Tracing, RawAttUsesLastLayer) {
  const auto step = step_with("attn", dense_lh(2, 1, {{1, 0}, {0, 1}}));
  const auto raw = reduce_channel(step, 2, ChannelMethod::rawatt());
  EXPECT_EQ(raw.scores, (std::vector<double>{0, 1}));
  const auto mean = reduce_channel(step, 2, ChannelMethod::attmean());
  EXPECT_EQ(mean.scores, (std::vector<double>{0.5, 0.5}));
}

TEST(Tracing, PassthroughClampsAndNormalizes) {
  const auto step = step_with("attgrad", dense({-0.5, 0.5, 1.0}));
  const auto out = reduce_channel(step, 3, ChannelMethod::passthrough("attgrad"));
  EXPECT_DOUBLE_EQ(out.scores[0], 0.0);
  EXPECT_NEAR(out.scores[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(out.scores[2], 2.0 / 3.0, 1e-12);
}

TEST(Tracing, SparseRowsExpandOverContext) {
  ScoreVector v;
  ScoreRow row;
  row.sparse = true;
  row.indices = {1, 3};
  row.values = {1.0, 3.0};
  v.rows.push_back(row);
  const auto out = reduce_channel(step_with("x", v), 5, ChannelMethod::passthrough("x"));
  EXPECT_EQ(out.scores, (std::vector<double>{0, 0.25, 0, 0.75, 0}));
}

TEST(Tracing, TraceTokenPicksMaxMass) {
  const std::vector<SourceUnit> sources = {source(0, 0, 2), source(1, 2, 4)};
  const auto r = trace_token(signal({0.1, 0.2, 0.3, 0.15}), sources);
  EXPECT_EQ(r.source_id, 1);
  EXPECT_NEAR(r.confidence, 0.45, 1e-12);
}

TEST(Tracing, TiesGoToLowestId) {
  const std::vector<SourceUnit> sources = {source(1, 2, 4), source(0, 0, 2)};
  const auto r = trace_token(signal({0.25, 0.25, 0.25, 0.25}), sources);
  EXPECT_EQ(r.source_id, 0);
  EXPECT_DOUBLE_EQ(r.confidence, 0.5);
}

TEST(Tracing, ZeroSignalMapsToNoSource) {
  const auto r = trace_token(signal({0, 0, 0, 0}), quarter_sources());
  EXPECT_FALSE(r.has_source());
  EXPECT_EQ(r.confidence, 0.0);
}

TEST(Tracing, MassOutsideSourcesIsNotRedistributed) {
  // Positions 2 and 3 (prior generated tokens) belong to no source.
  const std::vector<SourceUnit> sources = {source(0, 0, 1), source(1, 1, 2)};
  const auto r = trace_token(signal({0.1, 0.2, 0.3, 0.4}), sources);
  EXPECT_EQ(r.source_id, 1);
  EXPECT_NEAR(r.confidence, 0.2, 1e-12);
}

TEST(Tracing, MissingChannelOrShapeIsAnError) {
  const auto step = step_with("attn", dense({1, 0}));
  try {
    reduce_channel(step, 2, ChannelMethod::attmean("other"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(e.message().find("missing channel 'other'"), std::string::npos);
  }
  try {
    reduce_channel(step, 2, ChannelMethod::attmean());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(e.message().find("layer_head_shape"), std::string::npos);
  }
}

TEST(Tracing, ChannelMethodParsing) {
  EXPECT_EQ(ChannelMethod::parse("attmean").to_string(), "attmean");
  EXPECT_EQ(ChannelMethod::parse("rawatt:a2").channel, "a2");
  EXPECT_EQ(ChannelMethod::parse("raw:attgrad").kind, ChannelMethod::Kind::kPassthrough);
  EXPECT_THROW(ChannelMethod::parse("bogus"), Error);
  EXPECT_THROW(ChannelMethod::parse("raw"), Error);
  EXPECT_THROW(ChannelMethod::parse("attmean:"), Error);
}

TEST(Tracing, SynthOneHotOnSource) {
  SynthSpec spec = planted_spec(1, {{2}});
  spec.steps_per_chunk = 3;
  const Trace t = generate_trace(spec).trace;
  for (const auto& r : trace_all(t, ChannelMethod::attmean())) {
    EXPECT_EQ(r.source_id, 2);
    EXPECT_NEAR(r.confidence, 1.0, 1e-12);
  }
}

TEST(Tracing, PosTagsPreferRecordedTags) {
  std::vector<StepRecord> steps = {attn_step(1, "The", {1, 0}), attn_step(2, " cat", {1, 0, 0}, "VERB")};
  const Trace t = make_trace(2, {source(0, 0, 2)}, steps);
  const auto r = trace_all(t, ChannelMethod::attmean());
  EXPECT_EQ(r[0].pos_tag, "DET");
  EXPECT_EQ(r[1].pos_tag, "VERB");
}

TEST(TracingProperty, ScaleInvarianceAndMassBound) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scales[] = {0.5, 3.0, 10.0};
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t ctx = 2 + gen() % 20;
    std::vector<double> row(ctx);
    for (auto& x : row) x = u(gen) < 0.3 ? 0.0 : u(gen);
    const auto base = reduce_channel(step_with("a", dense(row)), ctx, ChannelMethod::passthrough("a"));
    std::vector<SourceUnit> sources;
    std::size_t pos = 0;
    SourceId id = 0;
    while (pos < ctx) {
      const std::size_t len = 1 + gen() % 4;
      if (gen() % 3 != 0) sources.push_back(source(id++, pos, std::min(ctx, pos + len)));
      pos += len;
    }
    const auto ref = trace_token(base, sources);
    double total = 0.0;
    for (double m : source_masses(base.scores, sources)) total += m;
    EXPECT_LE(total, 1.0 + 1e-12);
    for (double lambda : scales) {
      std::vector<double> scaled = row;
      for (auto& x : scaled) x *= lambda;
      const auto s = reduce_channel(step_with("a", dense(scaled)), ctx, ChannelMethod::passthrough("a"));
      const auto r = trace_token(s, sources);
      EXPECT_EQ(r.source_id, ref.source_id);
      EXPECT_NEAR(r.confidence, ref.confidence, 1e-12);
    }
  }
}

TEST(TracingProperty, MatchesBruteForceOracle) {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t ctx = 1 + gen() % 16;
    std::vector<double> row(ctx);
    for (auto& x : row) x = gen() % 4 == 0 ? 0.0 : u(gen);
    if (gen() % 5 == 0) row.assign(ctx, 0.25);  // force ties
    std::vector<SourceUnit> sources;
    std::vector<oracle::NaiveSource> naive;
    std::size_t pos = 0;
    std::vector<SourceId> ids = {3, 0, 2, 1};
    std::shuffle(ids.begin(), ids.end(), gen);
    for (std::size_t k = 0; k < 4 && pos < ctx; ++k) {
      const std::size_t len = 1 + gen() % 4;
      const std::size_t end = std::min(ctx, pos + len);
      sources.push_back(source(ids[k], pos, end));
      naive.push_back({ids[k], pos, end});
      pos = end + gen() % 2;
    }
    const auto got = trace_token(
        reduce_channel(step_with("attgrad", dense(row)), ctx, ChannelMethod::passthrough("attgrad")), sources);
    const auto [want_id, want_mass] = oracle::trace_token(oracle::normalize(row), naive);
    EXPECT_EQ(got.source_id, want_id);
    EXPECT_NEAR(got.confidence, want_mass, 1e-12);
  }
}
