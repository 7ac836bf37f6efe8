#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "omnitrace/chunking.hpp"
#include "omnitrace/curation.hpp"
#include "omnitrace/rng.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

inline constexpr double kDefaultEmbeddingThreshold = 0.25;

/// Precomputed embeddings of sources and generated chunks.
struct EmbeddingTable {
  std::size_t dimension = 0;
  std::map<SourceId, std::vector<double>> sources;
  std::map<std::size_t, std::vector<double>> chunks;

  void validate() const {
    auto check = [&](const std::vector<double>& v, const std::string& what) {
      if (v.size() != dimension)
        throw validation_error(what + ": dimension " + std::to_string(v.size()) + " != " +
                               std::to_string(dimension));
      bool nonzero = false;
      for (double x : v) {
        if (!std::isfinite(x)) throw validation_error(what + ": non-finite entry");
        nonzero = nonzero || x != 0.0;
      }
      if (!nonzero) throw validation_error(what + ": zero vector");
    };
    for (const auto& [id, v] : sources) check(v, "source " + std::to_string(id));
    for (const auto& [k, v] : chunks) check(v, "chunk " + std::to_string(k));
  }
};

/// Reads the text sidecar format: one vector per line, prefixed by its kind
/// and id (`source <id> v1 v2 ...` or `chunk <index> v1 v2 ...`). Lines
/// starting with '#' are comments. All vectors must share one dimension.
inline EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    long long id = 0;
    if (!(ls >> id) || id < 0) throw ParseError(line_no, "expected a non-negative id after '" + kind + "'");
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad number '" + tok + "'");
      }
    }
    if (!have_dim) {
      table.dimension = v.size();
      have_dim = true;
    } else if (v.size() != table.dimension) {
      throw ParseError(line_no, "dimension mismatch: expected " + std::to_string(table.dimension) + ", got " +
                                    std::to_string(v.size()));
    }
    if (kind == "source") {
      table.sources[static_cast<SourceId>(id)] = std::move(v);
    } else if (kind == "chunk") {
      table.chunks[static_cast<std::size_t>(id)] = std::move(v);
    } else {
      throw ParseError(line_no, "unknown record kind '" + kind + "'");
    }
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open embeddings " + path);
  return parse_embeddings(in);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw validation_error("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw validation_error("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Embedding-similarity baseline: each chunk selects every source whose
/// cosine similarity reaches `threshold`, most similar first.
inline std::vector<SpanAttribution> embed_attribute(const EmbeddingTable& table, const std::vector<Chunk>& chunks,
                                                    double threshold = kDefaultEmbeddingThreshold) {
  table.validate();
  std::vector<SpanAttribution> out;
  for (const auto& chunk : chunks) {
    auto it = table.chunks.find(chunk.index);
    if (it == table.chunks.end())
      throw validation_error("no embedding for chunk " + std::to_string(chunk.index));
    std::vector<std::pair<double, SourceId>> hits;
    for (const auto& [id, v] : table.sources) {
      const double c = cosine_similarity(it->second, v);
      if (c >= threshold) hits.emplace_back(c, id);
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    SpanAttribution attr;
    attr.chunk = chunk;
    for (const auto& [c, id] : hits) attr.selected.push_back(id);
    out.push_back(std::move(attr));
  }
  return out;
}

/// Random-matching baseline. For chunk k a generator seeded with seed ^ k
/// draws the selection size from `size_weights` (weight of size 0, 1, 2, ...;
/// uniform over {0, 1, 2} by default), clamps it to the source count, then
/// samples that many ids without replacement. Output ids are ascending.
inline std::vector<SpanAttribution> random_attribute(std::span<const SourceUnit> sources,
                                                     const std::vector<Chunk>& chunks, std::uint64_t seed,
                                                     std::span<const double> size_weights = {}) {
  static constexpr double kUniform012[] = {1.0, 1.0, 1.0};
  if (size_weights.empty()) size_weights = kUniform012;
  double total = 0.0;
  for (double w : size_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw invalid_argument("size weights must be finite and non-negative");
    total += w;
  }
  if (total <= 0.0) throw invalid_argument("size weights must not all be zero");

  std::vector<SourceId> ids;
  for (const auto& s : sources) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());

  std::vector<SpanAttribution> out;
  for (const auto& chunk : chunks) {
    Rng rng(seed ^ static_cast<std::uint64_t>(chunk.index));
    const double u = rng.uniform() * total;
    std::size_t k = size_weights.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < size_weights.size(); ++i) {
      acc += size_weights[i];
      if (u < acc) {
        k = i;
        break;
      }
    }
    k = std::min(k, ids.size());
    std::vector<SourceId> pool = ids;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    SpanAttribution attr;
    attr.chunk = chunk;
    attr.selected.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(attr.selected.begin(), attr.selected.end());
    out.push_back(std::move(attr));
  }
  return out;
}

}  // namespace omnitrace
