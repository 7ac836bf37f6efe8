#include <gtest/gtest.h>

#include <sstream>

#include "omnitrace/omnitrace.hpp"
#include "test_support.hpp"

using namespace omnitrace;
using namespace omnitrace::testing;

namespace {

std::vector<Chunk> chunks(std::size_t n) {
  std::vector<Chunk> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back({k, {}, {}, {}});
  return out;
}

EmbeddingTable table_of(const std::string& text) {
  std::istringstream in(text);
  return parse_embeddings(in);
}

}  // namespace

TEST(EmbedBaseline, ParsesSidecar) {
  const auto t = table_of("# dims follow\nsource 0 1 0\nsource 1 0 1\n\nchunk 0 1 1\n");
  EXPECT_EQ(t.dimension, 2u);
  EXPECT_EQ(t.sources.size(), 2u);
  EXPECT_EQ(t.chunks.at(0), (std::vector<double>{1, 1}));
  EXPECT_THROW(table_of("source 0 1 0\nsource 1 1\n"), Error);
  EXPECT_THROW(table_of("thing 0 1\n"), ParseError);
  EXPECT_THROW(table_of("source 0 1 x\n"), ParseError);
}

TEST(EmbedBaseline, IdentityAndOrthogonal) {
  const auto t = table_of("source 0 1 0 0\nsource 1 0 1 0\nchunk 0 1 0 0\n");
  const auto r = embed_attribute(t, chunks(1));
  EXPECT_EQ(r[0].selected, (std::vector<SourceId>{0}));
}

TEST(EmbedBaseline, ThresholdIsInclusive) {
  // cos = 0.25 exactly: (1, sqrt(15)) against (1, 0) over |(1, sqrt 15)| = 4.
  const auto t = table_of("source 0 1 0\nchunk 0 1 3.872983346207417\n");
  const double c = cosine_similarity(t.chunks.at(0), t.sources.at(0));
  EXPECT_NEAR(c, 0.25, 1e-15);
  const auto at = embed_attribute(t, chunks(1), c);
  EXPECT_EQ(at[0].selected.size(), 1u);
  const auto above = embed_attribute(t, chunks(1), std::nextafter(c, 1.0));
  EXPECT_TRUE(above[0].selected.empty());
}

TEST(EmbedBaseline, OrderedBySimilarity) {
  // source 0 sits at cos 0.196, under the default threshold
  const auto t = table_of("source 0 1 0\nsource 1 1 1\nsource 2 0 1\nchunk 0 0.2 1\n");
  EXPECT_EQ(embed_attribute(t, chunks(1))[0].selected, (std::vector<SourceId>{2, 1}));
}

TEST(EmbedBaseline, Errors) {
  EXPECT_THROW(embed_attribute(table_of("source 0 0 0\nchunk 0 1 0\n"), chunks(1)), Error);
  EXPECT_THROW(embed_attribute(table_of("source 0 1 0\nchunk 0 1 0\n"), chunks(2)), Error);
}

TEST(EmbedBaseline, RescalingIsInvariant) {
  const auto a = table_of("source 0 1 2\nsource 1 -1 0.5\nsource 2 3 1\nchunk 0 2 1\n");
  const auto b = table_of("source 0 10 20\nsource 1 -0.1 0.05\nsource 2 6 2\nchunk 0 0.2 0.1\n");
  EXPECT_EQ(embed_attribute(a, chunks(1))[0].selected, embed_attribute(b, chunks(1))[0].selected);
}

TEST(RandomBaseline, DeterministicPerSeed) {
  const std::vector<SourceUnit> sources = {source(0, 0, 1), source(1, 1, 2), source(2, 2, 3), source(3, 3, 4)};
  const auto a = random_attribute(sources, chunks(50), 7);
  const auto b = random_attribute(sources, chunks(50), 7);
  const auto c = random_attribute(sources, chunks(50), 8);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].selected, b[k].selected);
    EXPECT_LE(a[k].selected.size(), 2u);
    EXPECT_TRUE(std::is_sorted(a[k].selected.begin(), a[k].selected.end()));
    differs = differs || a[k].selected != c[k].selected;
  }
  EXPECT_TRUE(differs);
}

TEST(RandomBaseline, NoSourcesGivesEmptySelections) {
  const auto r = random_attribute({}, chunks(5), 1);
  for (const auto& a : r) EXPECT_TRUE(a.selected.empty());
}

TEST(RandomBaseline, MeanSizeMatchesDistribution) {
  const std::vector<SourceUnit> sources = {source(0, 0, 1), source(1, 1, 2), source(2, 2, 3)};
  const auto r = random_attribute(sources, chunks(10000), 123);
  double total = 0.0;
  for (const auto& a : r) total += static_cast<double>(a.selected.size());
  EXPECT_NEAR(total / 10000.0, 1.0, 0.05);

  const std::vector<double> weights = {0.0, 0.0, 0.0, 1.0};
  for (const auto& a : random_attribute(sources, chunks(20), 5, weights)) EXPECT_EQ(a.selected.size(), 3u);
  const std::vector<double> bad = {0.0, -1.0};
  EXPECT_THROW(random_attribute(sources, chunks(1), 5, bad), Error);
}

TEST(Rng, Reproducible) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(c.below(7), 7u);
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
