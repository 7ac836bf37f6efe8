#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "omnitrace/curation.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

inline constexpr double kDefaultBinSeconds = 1.0;

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  // Set when prediction and gold were both empty (or, for an aggregate, when
  // every chunk was): scored as a perfect 1.0 by convention.
  bool both_empty = false;

  bool operator==(const PRF&) const = default;
};

inline PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  if (tp + fp + fn == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    r.both_empty = true;
    return r;
  }
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

template <class T>
PRF set_prf(const std::set<T>& pred, const std::set<T>& gold) {
  std::size_t tp = 0;
  for (const auto& x : pred) tp += gold.count(x);
  return prf_from_counts(tp, pred.size() - tp, gold.size() - tp);
}

/// Multi-label PRF of one chunk's predicted source set.
inline PRF span_prf(std::span<const SourceId> pred, std::span<const SourceId> gold) {
  return set_prf(std::set<SourceId>(pred.begin(), pred.end()),
                 std::set<SourceId>(gold.begin(), gold.end()));
}

/// Bins of width `bin_s` touched by the spans. [s, e) marks floor(s/b) through
/// ceil(e/b) - 1; a zero-length span marks the bin containing s.
inline std::set<std::int64_t> time_bins(std::span<const Interval> spans, double bin_s = kDefaultBinSeconds) {
  if (!(bin_s > 0.0) || !std::isfinite(bin_s)) throw invalid_argument("bin width must be positive");
  for (const auto& s : spans) {
    if (!std::isfinite(s.start) || !std::isfinite(s.end)) throw invalid_argument("non-finite span time");
    if (s.start < 0.0 || s.end < 0.0) throw invalid_argument("negative span time");
    if (s.end < s.start) throw invalid_argument("inverted interval");
  }
  std::set<std::int64_t> bins;
  for (const auto& s : spans) {
    const auto first = static_cast<std::int64_t>(std::floor(s.start / bin_s));
    if (s.end == s.start) {
      bins.insert(first);
      continue;
    }
    const auto last = static_cast<std::int64_t>(std::ceil(s.end / bin_s)) - 1;
    for (std::int64_t b = first; b <= last; ++b) bins.insert(b);
  }
  return bins;
}

inline PRF time_f1(std::span<const Interval> pred, std::span<const Interval> gold,
                   double bin_s = kDefaultBinSeconds) {
  return set_prf(time_bins(pred, bin_s), time_bins(gold, bin_s));
}

/// Time intervals of the selected sources of a chunk.
inline std::vector<Interval> selected_spans(std::span<const SourceId> selected,
                                            std::span<const SourceUnit> sources) {
  std::vector<Interval> out;
  for (SourceId id : selected) {
    auto it = std::find_if(sources.begin(), sources.end(), [&](const SourceUnit& s) { return s.id == id; });
    if (it == sources.end()) throw validation_error("unknown source id " + std::to_string(id));
    if (!it->time) throw validation_error("untimed source " + std::to_string(id));
    out.push_back(*it->time);
  }
  return out;
}

enum class AverageMode { kMicro, kMacro };

/// Dataset aggregate. Micro sums counts (both-empty chunks add nothing; if
/// every chunk is both-empty the result is 1.0 with `both_empty` set). Macro
/// averages per-chunk F1, counting both-empty chunks as 1.0.
inline PRF aggregate_dataset(std::span<const PRF> per_chunk, AverageMode mode) {
  if (mode == AverageMode::kMicro) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : per_chunk) {
      tp += p.tp;
      fp += p.fp;
      fn += p.fn;
    }
    return prf_from_counts(tp, fp, fn);
  }
  if (per_chunk.empty()) throw invalid_argument("macro average of an empty set");
  PRF r;
  double p = 0.0, rc = 0.0, f = 0.0;
  bool all_empty = true;
  for (const auto& c : per_chunk) {
    p += c.precision;
    rc += c.recall;
    f += c.f1;
    r.tp += c.tp;
    r.fp += c.fp;
    r.fn += c.fn;
    all_empty = all_empty && c.both_empty;
  }
  const double n = static_cast<double>(per_chunk.size());
  r.precision = p / n;
  r.recall = rc / n;
  r.f1 = f / n;
  r.both_empty = all_empty;
  return r;
}

/// Per-chunk span PRF of an attributed example against gold source ids.
inline std::vector<PRF> evaluate_spans(const ExampleAttribution& ex, const GoldLabels& gold) {
  if (ex.chunks.size() != gold.chunk_count())
    throw Error(ErrorCode::kGold, "chunk count mismatch: prediction has " + std::to_string(ex.chunks.size()) +
                                      ", gold has " + std::to_string(gold.chunk_count()));
  std::vector<PRF> out;
  for (std::size_t k = 0; k < ex.chunks.size(); ++k)
    out.push_back(span_prf(ex.chunks[k].selected, gold.chunks[k].source_ids));
  return out;
}

/// Time-F1 of an attributed example. With `per_example_union` the spans of all
/// chunks are pooled into one prediction and one gold set.
inline std::vector<PRF> evaluate_time(const ExampleAttribution& ex, const GoldLabels& gold,
                                      double bin_s = kDefaultBinSeconds, bool per_example_union = false) {
  if (ex.chunks.size() != gold.chunk_count())
    throw Error(ErrorCode::kGold, "chunk count mismatch: prediction has " + std::to_string(ex.chunks.size()) +
                                      ", gold has " + std::to_string(gold.chunk_count()));
  auto gold_spans = [&](std::size_t k) {
    const auto& g = gold.chunks[k];
    if (g.timed) return g.spans;
    return selected_spans(g.source_ids, ex.sources);
  };
  std::vector<PRF> out;
  if (per_example_union) {
    std::vector<Interval> pred, gd;
    for (std::size_t k = 0; k < ex.chunks.size(); ++k) {
      auto p = selected_spans(ex.chunks[k].selected, ex.sources);
      pred.insert(pred.end(), p.begin(), p.end());
      auto g = gold_spans(k);
      gd.insert(gd.end(), g.begin(), g.end());
    }
    out.push_back(time_f1(pred, gd, bin_s));
    return out;
  }
  for (std::size_t k = 0; k < ex.chunks.size(); ++k)
    out.push_back(time_f1(selected_spans(ex.chunks[k].selected, ex.sources), gold_spans(k), bin_s));
  return out;
}

struct OptionConsistencyResult {
  std::optional<std::string> predicted_option;    // parsed from the generation
  std::optional<std::string> attribution_option;  // argmax of option mass
  std::map<std::string, double> masses;
  std::optional<std::size_t> answer_chunk;
  bool consistent = false;
  bool unparsable = false;

  bool operator==(const OptionConsistencyResult&) const = default;
};

/// Location of a parsed answer option inside the generated text.
struct ParsedOption {
  std::string label;
  std::size_t offset = 0;
};

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

inline bool standalone_letter(const std::string& text, std::size_t i) {
  const char c = text[i];
  if (c < 'A' || c > 'E') return false;
  const bool left = i == 0 || !is_word_char(text[i - 1]);
  const bool right = i + 1 >= text.size() || !is_word_char(text[i + 1]);
  return left && right;
}

}  // namespace detail

/// Deterministic answer parsing: the first standalone capital letter A-E within
/// a short window after a marker ("answer", then "option", then "choice";
/// the first marker kind that yields a letter wins), otherwise a
/// standalone letter ending the text (optionally bracketed or followed by
/// punctuation).
inline std::optional<ParsedOption> parse_answer_option(const std::string& text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  constexpr std::size_t kWindow = 24;
  std::optional<ParsedOption> best;
  for (const char* marker : {"answer", "option", "choice"}) {
    for (std::size_t at = lower.find(marker); at != std::string::npos; at = lower.find(marker, at + 1)) {
      if (at > 0 && detail::is_word_char(lower[at - 1])) continue;
      std::size_t i = at + std::char_traits<char>::length(marker);
      while (i < lower.size() && detail::is_word_char(lower[i])) ++i;  // answers, optional
      const std::size_t stop = std::min(text.size(), i + kWindow);
      for (; i < stop; ++i) {
        if (detail::standalone_letter(text, i)) {
          if (!best || i < best->offset) best = ParsedOption{std::string(1, text[i]), i};
          break;
        }
      }
    }
    if (best) return best;  // markers are tried in priority order
  }

  std::size_t e = text.size();
  while (e > 0 && (detail::is_space(text[e - 1]) || text[e - 1] == '.' || text[e - 1] == ')' ||
                   text[e - 1] == ']' || text[e - 1] == '!' || text[e - 1] == ':'))
    --e;
  if (e > 0 && detail::standalone_letter(text, e - 1)) return ParsedOption{std::string(1, text[e - 1]), e - 1};
  return std::nullopt;
}

/// Option-consistency of one QA example: does the option whose source gets
/// the most vote mass in the answer chunk match the option the model stated?
inline OptionConsistencyResult option_consistency(const ExampleAttribution& ex) {
  if (!ex.option_map || ex.option_map->empty())
    throw validation_error("option consistency requires an option_map");
  OptionConsistencyResult out;
  const auto parsed = parse_answer_option(ex.generated_text);
  if (!parsed) {
    out.unparsable = true;
    return out;
  }
  out.predicted_option = parsed->label;

  std::optional<std::size_t> answer_chunk;
  for (std::size_t k = 0; k < ex.chunks.size(); ++k) {
    const auto& r = ex.chunks[k].chunk.char_range;
    if (parsed->offset >= r.begin && parsed->offset < r.end) answer_chunk = k;
  }
  if (!answer_chunk) {
    out.unparsable = true;
    return out;
  }
  out.answer_chunk = answer_chunk;

  for (const auto& [label, id] : *ex.option_map) {
    double mass = 0.0;
    for (const auto& tok : ex.chunks[*answer_chunk].tokens)
      if (tok.source_id == id) mass += tok.vote;
    out.masses[label] = mass;
  }
  // std::map iterates labels lexicographically, so strict > keeps the first on ties.
  for (const auto& [label, mass] : out.masses)
    if (!out.attribution_option || mass > out.masses[*out.attribution_option]) out.attribution_option = label;
  out.consistent = out.attribution_option == out.predicted_option;
  return out;
}

/// Consistency rate over parsable examples; unparsable ones are only counted.
struct ConsistencySummary {
  std::size_t consistent = 0;
  std::size_t parsable = 0;
  std::size_t unparsable = 0;

  double rate() const noexcept {
    return parsable ? static_cast<double>(consistent) / static_cast<double>(parsable) : 0.0;
  }
};

inline ConsistencySummary summarize_consistency(std::span<const OptionConsistencyResult> results) {
  ConsistencySummary s;
  for (const auto& r : results) {
    if (r.unparsable) {
      ++s.unparsable;
      continue;
    }
    ++s.parsable;
    s.consistent += r.consistent ? 1 : 0;
  }
  return s;
}

}  // namespace omnitrace
