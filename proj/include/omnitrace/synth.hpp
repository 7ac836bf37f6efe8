#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "omnitrace/error.hpp"
#include "omnitrace/rng.hpp"
#include "omnitrace/trace_io.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

enum class Placement { kUniform, kSkewed };

enum class GoldKind { kIds, kSpans };

/// Parameters of a synthetic trace with planted token-to-source ground truth.
struct SynthSpec {
  std::string example_id;  // "synth-<seed>" when empty
  std::size_t n_sources = 4;
  std::size_t tokens_per_source = 4;
  std::size_t chunks = 2;
  std::size_t steps_per_chunk = 4;
  std::vector<Modality> modalities = {Modality::kText};  // cycled over sources
  double seconds_per_token = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 0;

  // Planted source set per chunk. When absent each chunk draws
  // `sources_per_chunk` distinct sources from the placement distribution.
  std::optional<std::vector<std::vector<SourceId>>> planted;
  std::size_t sources_per_chunk = 1;
  Placement placement = Placement::kUniform;
  double placement_mean = 0.5;  // target mean position under kSkewed

  // Fraction of each chunk's steps that are function words attending to a
  // source outside the planted set.
  double distractor_rate = 0.0;

  // Multiple-choice mode: adds `option_count` text option sources, an option
  // map and a final "The answer is X." chunk attending to option X.
  std::size_t option_count = 0;
  std::optional<char> planted_option;

  std::size_t layers = 1;
  std::size_t heads = 1;
  bool sparse = false;
  std::string channel = "attn";
  GoldKind gold_kind = GoldKind::kIds;

  bool operator==(const SynthSpec&) const = default;
};

struct SynthExample {
  Trace trace;
  GoldLabels gold;
};

namespace detail {

inline Error spec_error(const std::string& message) {
  return Error(ErrorCode::kInvalidArgument, "inconsistent synth spec: " + message);
}

inline constexpr const char* kSynthNouns[] = {
    "cat",   "dog",    "tree",  "river", "house",  "car",   "bird",  "flower",
    "stone", "boat",   "table", "window", "garden", "bridge", "cloud", "lamp",
};

inline constexpr std::pair<const char*, const char*> kSynthFunctionWords[] = {
    {"the", "DET"}, {"a", "DET"}, {"of", "ADP"}, {"in", "ADP"}, {"on", "ADP"},
};

inline std::string capitalized(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

/// Placement weight of each context source; positions are source midpoints
/// over the input length.
inline std::vector<double> placement_weights(const SynthSpec& spec, const std::vector<SourceUnit>& context,
                                             std::size_t n) {
  std::vector<double> w(context.size(), 1.0);
  if (spec.placement == Placement::kUniform) return w;
  // Linear density w_j = 1 + c (p_j - 1/2) with c chosen so the weighted mean
  // position equals placement_mean.
  const double mu = spec.placement_mean;
  double sum_p = 0.0, a = 0.0, b = 0.0;
  std::vector<double> p;
  for (const auto& s : context) {
    p.push_back(0.5 * static_cast<double>(s.token_range.begin + s.token_range.end) / static_cast<double>(n));
    sum_p += p.back();
    a += (p.back() - 0.5) * p.back();
    b += p.back() - 0.5;
  }
  const double m = static_cast<double>(context.size());
  const double denom = a - mu * b;
  if (std::abs(denom) < 1e-12) {
    if (std::abs(mu * m - sum_p) > 1e-12) throw spec_error("placement_mean is not reachable");
    return w;
  }
  const double c = (mu * m - sum_p) / denom;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = 1.0 + c * (p[j] - 0.5);
    if (w[j] < 0.0) throw spec_error("placement_mean is not reachable with these sources");
  }
  return w;
}

inline std::vector<SourceId> draw_weighted(Rng& rng, std::vector<double> weights, std::size_t k) {
  std::vector<SourceId> out;
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw spec_error("not enough sources with positive placement weight");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = weights.size();
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] <= 0.0) continue;
      acc += weights[j];
      pick = j;
      if (u < acc) break;
    }
    out.push_back(static_cast<SourceId>(pick));
    weights[pick] = 0.0;
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ScoreVector planted_channel(const SynthSpec& spec, TokenRange target, std::size_t context_length) {
  const std::size_t r = target.size();
  const std::size_t others = context_length - r;
  const bool spread = spec.noise > 0.0 && others > 0;
  const double on = (spread ? 1.0 - spec.noise : 1.0) / static_cast<double>(r);
  const double off = spread ? spec.noise / static_cast<double>(others) : 0.0;

  ScoreRow row;
  row.sparse = spec.sparse;
  for (std::size_t i = 0; i < context_length; ++i) {
    const double v = target.contains(i) ? on : off;
    if (spec.sparse) {
      if (v == 0.0) continue;
      row.indices.push_back(static_cast<std::uint32_t>(i));
      row.values.push_back(v);
    } else {
      row.dense.push_back(v);
    }
  }
  ScoreVector sv;
  sv.rows.assign(spec.layers * spec.heads, row);
  sv.layer_head_shape = LayerHeadShape{spec.layers, spec.heads};
  return sv;
}

}  // namespace detail

inline void validate_synth_spec(const SynthSpec& spec) {
  using detail::spec_error;
  if (spec.n_sources == 0) throw spec_error("n_sources must be positive");
  if (spec.tokens_per_source == 0) throw spec_error("tokens_per_source must be positive");
  if (spec.steps_per_chunk == 0) throw spec_error("steps_per_chunk must be positive");
  if (spec.modalities.empty()) throw spec_error("modalities must not be empty");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw spec_error("noise must lie in [0, 1]");
  if (!(spec.distractor_rate >= 0.0 && spec.distractor_rate <= 1.0))
    throw spec_error("distractor_rate must lie in [0, 1]");
  if (!(spec.placement_mean > 0.0 && spec.placement_mean < 1.0))
    throw spec_error("placement_mean must lie in (0, 1)");
  if (!(spec.seconds_per_token > 0.0) || !std::isfinite(spec.seconds_per_token))
    throw spec_error("seconds_per_token must be positive");
  if (spec.layers == 0 || spec.heads == 0) throw spec_error("layers and heads must be positive");
  if (spec.channel.empty()) throw spec_error("channel name must not be empty");
  if (spec.option_count > 5) throw spec_error("option_count must be at most 5");
  if (spec.planted_option) {
    if (spec.option_count == 0) throw spec_error("planted_option needs option_count > 0");
    if (*spec.planted_option < 'A' || *spec.planted_option >= static_cast<char>('A' + spec.option_count))
      throw spec_error(std::string("planted_option '") + *spec.planted_option + "' is not an option label");
  }
  if (spec.option_count > 0 && spec.gold_kind == GoldKind::kSpans)
    throw spec_error("option mode needs id gold");
  if (spec.gold_kind == GoldKind::kSpans)
    for (Modality m : spec.modalities)
      if (!is_timed(m)) throw spec_error("span gold needs audio or video sources only");

  std::size_t max_planted = spec.sources_per_chunk;
  if (spec.planted) {
    if (spec.planted->size() != spec.chunks)
      throw spec_error("planted lists " + std::to_string(spec.planted->size()) + " chunks, expected " +
                       std::to_string(spec.chunks));
    max_planted = 0;
    for (const auto& set : *spec.planted) {
      if (set.empty()) throw spec_error("planted source sets must not be empty");
      std::vector<SourceId> sorted = set;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw spec_error("duplicate planted source id");
      for (SourceId id : set)
        if (id < 0 || static_cast<std::size_t>(id) >= spec.n_sources)
          throw spec_error("planted source id " + std::to_string(id) + " out of range");
      max_planted = std::max(max_planted, set.size());
    }
  } else if (spec.sources_per_chunk == 0 || spec.sources_per_chunk > spec.n_sources) {
    throw spec_error("sources_per_chunk must lie in [1, n_sources]");
  }
  const auto distractors =
      static_cast<std::size_t>(std::floor(spec.distractor_rate * static_cast<double>(spec.steps_per_chunk) + 0.5));
  if (distractors + max_planted > spec.steps_per_chunk)
    throw spec_error("steps_per_chunk too small for planted sources and distractors");
  if (distractors > 0 && spec.n_sources < 2) throw spec_error("distractors need at least two sources");
}

/// Builds a trace whose step attention puts (1 - noise) of its mass on the
/// step's planted source and spreads the rest uniformly over every other
/// context position, together with gold labels equal to the planted sets.
/// The output depends only on the spec, including its seed.
inline SynthExample generate_trace(const SynthSpec& spec) {
  validate_synth_spec(spec);
  Rng rng(spec.seed);

  Trace trace;
  trace.example_id = spec.example_id.empty() ? "synth-" + std::to_string(spec.seed) : spec.example_id;
  bool any_timed = false;

  auto add_source = [&](Modality m, const std::vector<std::string>& words) {
    SourceUnit s;
    s.id = static_cast<SourceId>(trace.sources.size());
    s.modality = m;
    s.token_range.begin = trace.timeline.size();
    std::string text;
    for (const auto& w : words) {
      InputToken tok;
      tok.index = trace.timeline.size();
      tok.modality = m;
      if (m == Modality::kText) {
        tok.text = " " + w;
        text += *tok.text;
      }
      if (is_timed(m)) {
        tok.time = Interval{static_cast<double>(tok.index) * spec.seconds_per_token,
                            static_cast<double>(tok.index + 1) * spec.seconds_per_token};
        any_timed = true;
      }
      trace.timeline.tokens.push_back(std::move(tok));
    }
    s.token_range.end = trace.timeline.size();
    if (m == Modality::kText) s.text = text;
    if (is_timed(m))
      s.time = Interval{static_cast<double>(s.token_range.begin) * spec.seconds_per_token,
                        static_cast<double>(s.token_range.end) * spec.seconds_per_token};
    trace.sources.push_back(std::move(s));
  };

  for (std::size_t j = 0; j < spec.n_sources; ++j) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < spec.tokens_per_source; ++i)
      words.push_back("s" + std::to_string(j) + "w" + std::to_string(i));
    add_source(spec.modalities[j % spec.modalities.size()], words);
  }
  std::optional<char> answer;
  if (spec.option_count > 0) {
    std::map<std::string, SourceId> options;
    for (std::size_t o = 0; o < spec.option_count; ++o) {
      const char label = static_cast<char>('A' + o);
      std::vector<std::string> words = {std::string("(") + label + ")"};
      for (std::size_t i = 1; i < spec.tokens_per_source; ++i)
        words.push_back("o" + std::string(1, static_cast<char>(std::tolower(label))) + std::to_string(i));
      options[std::string(1, label)] = static_cast<SourceId>(trace.sources.size());
      add_source(Modality::kText, words);
    }
    trace.option_map = std::move(options);
    answer = spec.planted_option ? *spec.planted_option
                                 : static_cast<char>('A' + rng.below(spec.option_count));
  }
  const std::size_t n = trace.timeline.size();
  if (any_timed) trace.timeline.duration_s = static_cast<double>(n) * spec.seconds_per_token;

  const std::vector<SourceUnit> context(trace.sources.begin(),
                                        trace.sources.begin() + static_cast<std::ptrdiff_t>(spec.n_sources));
  std::vector<std::vector<SourceId>> planted;
  if (spec.planted) {
    for (auto set : *spec.planted) {
      std::sort(set.begin(), set.end());
      planted.push_back(std::move(set));
    }
  } else {
    const auto weights = detail::placement_weights(spec, context, n);
    for (std::size_t k = 0; k < spec.chunks; ++k)
      planted.push_back(detail::draw_weighted(rng, weights, spec.sources_per_chunk));
  }

  const auto distractors =
      static_cast<std::size_t>(std::floor(spec.distractor_rate * static_cast<double>(spec.steps_per_chunk) + 0.5));

  auto push_step = [&](std::string text, std::string tag, SourceId target) {
    StepRecord step;
    step.step = trace.steps.size() + 1;
    if (step.step == 1 && !text.empty() && text[0] == ' ') text.erase(0, 1);
    step.token_text = std::move(text);
    step.pos_tag = std::move(tag);
    step.channels[spec.channel] =
        detail::planted_channel(spec, trace.sources[static_cast<std::size_t>(target)].token_range,
                                trace.context_length(step.step));
    trace.steps.push_back(std::move(step));
  };

  for (std::size_t k = 0; k < spec.chunks; ++k) {
    const auto& set = planted[k];
    // Distractor steps never take the final, sentence-ending position.
    std::vector<bool> is_distractor(spec.steps_per_chunk, false);
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i + 1 < spec.steps_per_chunk; ++i) slots.push_back(i);
    for (std::size_t d = 0; d < distractors; ++d) {
      const auto j = d + static_cast<std::size_t>(rng.below(slots.size() - d));
      std::swap(slots[d], slots[j]);
      is_distractor[slots[d]] = true;
    }
    std::vector<SourceId> outside;
    for (const auto& s : context)
      if (!std::binary_search(set.begin(), set.end(), s.id)) outside.push_back(s.id);

    const std::size_t content = spec.steps_per_chunk - distractors;
    std::size_t c = 0;
    for (std::size_t i = 0; i < spec.steps_per_chunk; ++i) {
      std::string word;
      std::string tag;
      SourceId target;
      if (is_distractor[i]) {
        const auto& fw = detail::kSynthFunctionWords[rng.below(std::size(detail::kSynthFunctionWords))];
        word = fw.first;
        tag = fw.second;
        target = outside.empty() ? set.front() : outside[rng.below(outside.size())];
      } else {
        word = detail::kSynthNouns[rng.below(std::size(detail::kSynthNouns))];
        tag = "NOUN";
        target = set[c * set.size() / content];
        ++c;
      }
      if (i == 0) word = detail::capitalized(word);
      if (i + 1 == spec.steps_per_chunk) word += ".";
      push_step(" " + word, tag, target);
    }
  }
  if (answer) {
    const SourceId target = trace.option_map->at(std::string(1, *answer));
    push_step(" The", "DET", target);
    push_step(" answer", "NOUN", target);
    push_step(" is", "AUX", target);
    push_step(std::string(" ") + *answer + ".", "PROPN", target);
  }
  trace.generated_text = detokenize(trace.steps, trace.space_joined);

  SynthExample out;
  out.gold.example_id = trace.example_id;
  for (const auto& set : planted) {
    GoldChunk g;
    if (spec.gold_kind == GoldKind::kSpans) {
      g.timed = true;
      std::vector<Interval> spans;
      for (SourceId id : set) spans.push_back(*trace.sources[static_cast<std::size_t>(id)].time);
      g.spans = merge_intervals(std::move(spans));
    } else {
      g.source_ids = set;
    }
    out.gold.chunks.push_back(std::move(g));
  }
  if (answer) out.gold.chunks.push_back({{trace.option_map->at(std::string(1, *answer))}, {}, false});
  validate_trace(trace);
  out.trace = std::move(trace);
  return out;
}

}  // namespace omnitrace
