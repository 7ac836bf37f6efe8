#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omnitrace/chunking.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

/// How raw channels are reduced to one per-step signal a_t(i).
struct ChannelMethod {
  enum class Kind { kAttMean, kRawAtt, kPassthrough };

  Kind kind = Kind::kAttMean;
  std::string channel = "attn";

  static ChannelMethod attmean(std::string channel = "attn") { return {Kind::kAttMean, std::move(channel)}; }
  static ChannelMethod rawatt(std::string channel = "attn") { return {Kind::kRawAtt, std::move(channel)}; }
  static ChannelMethod passthrough(std::string channel) { return {Kind::kPassthrough, std::move(channel)}; }

  /// Accepts `attmean`, `rawatt`, `attmean:<channel>`, `rawatt:<channel>` and
  /// `raw:<channel>`.
  static ChannelMethod parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    const std::string tail = colon == std::string_view::npos ? std::string() : std::string(text.substr(colon + 1));
    if (colon != std::string_view::npos && tail.empty())
      throw invalid_argument("channel method '" + std::string(text) + "' names an empty channel");
    if (head == "attmean") return attmean(tail.empty() ? "attn" : tail);
    if (head == "rawatt") return rawatt(tail.empty() ? "attn" : tail);
    if (head == "raw" && !tail.empty()) return passthrough(tail);
    throw invalid_argument("unknown channel method '" + std::string(text) +
                           "' (expected attmean|rawatt|raw:<name>)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::kAttMean: return channel == "attn" ? "attmean" : "attmean:" + channel;
      case Kind::kRawAtt: return channel == "attn" ? "rawatt" : "rawatt:" + channel;
      case Kind::kPassthrough: return "raw:" + channel;
    }
    return "attmean";
  }

  bool operator==(const ChannelMethod&) const = default;
};

/// Non-negative scores over all context positions summing to 1, or all zero.
struct ReducedStepSignal {
  std::size_t step = 0;
  std::vector<double> scores;
};

struct TokenTraceResult {
  std::size_t step = 0;
  SourceId source_id = kNoSource;
  double confidence = 0.0;
  std::string pos_tag;
  double vote = 0.0;  // filled by curation

  bool has_source() const noexcept { return source_id != kNoSource; }
  bool operator==(const TokenTraceResult&) const = default;
};

namespace detail {

inline void accumulate_rows(const ScoreVector& channel, std::size_t first, std::size_t last,
                            std::vector<double>& acc) {
  for (std::size_t r = first; r < last; ++r) {
    channel.rows[r].for_each([&](std::size_t i, double v) {
      if (i < acc.size()) acc[i] += v;
    });
  }
  const double inv = 1.0 / static_cast<double>(last - first);
  for (auto& v : acc) v *= inv;
}

inline void normalize_in_place(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (auto& x : v) x /= sum;
}

}  // namespace detail

/// Reduces one step's raw channel to a_t(i).
///
/// attmean averages every (layer, head) row; rawatt averages the heads of the
/// last layer; passthrough averages the channel's rows as stored. Negative
/// values are clamped to 0 and the result is normalized to unit sum over the
/// full context.
inline ReducedStepSignal reduce_channel(const StepRecord& step, std::size_t context_length,
                                        const ChannelMethod& method) {
  const std::string where = "step " + std::to_string(step.step) + ": ";
  auto it = step.channels.find(method.channel);
  if (it == step.channels.end())
    throw validation_error(where + "missing channel '" + method.channel + "'");
  const ScoreVector& ch = it->second;

  ReducedStepSignal out;
  out.step = step.step;
  out.scores.assign(context_length, 0.0);
  if (ch.rows.empty()) return out;

  switch (method.kind) {
    case ChannelMethod::Kind::kAttMean:
    case ChannelMethod::Kind::kRawAtt: {
      if (!ch.layer_head_shape)
        throw validation_error(where + "missing layer_head_shape for " + method.to_string() +
                               " on channel '" + method.channel + "'");
      const auto shape = *ch.layer_head_shape;
      if (method.kind == ChannelMethod::Kind::kAttMean) {
        detail::accumulate_rows(ch, 0, ch.rows.size(), out.scores);
      } else {
        detail::accumulate_rows(ch, (shape.layers - 1) * shape.heads, shape.layers * shape.heads, out.scores);
      }
      break;
    }
    case ChannelMethod::Kind::kPassthrough:
      detail::accumulate_rows(ch, 0, ch.rows.size(), out.scores);
      break;
  }
  for (auto& v : out.scores) v = std::max(v, 0.0);
  detail::normalize_in_place(out.scores);
  return out;
}

inline ReducedStepSignal reduce_channel(const Trace& trace, const StepRecord& step,
                                        const ChannelMethod& method) {
  return reduce_channel(step, trace.context_length(step.step), method);
}

/// Per-source mass of a signal, summed over each source's token range.
inline std::vector<double> source_masses(std::span<const double> scores,
                                         std::span<const SourceUnit> sources) {
  std::vector<double> mass(sources.size(), 0.0);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto& r = sources[j].token_range;
    const std::size_t end = std::min(r.end, scores.size());
    double m = 0.0;
    for (std::size_t i = r.begin; i < end; ++i) m += scores[i];
    mass[j] = m;
  }
  return mass;
}

/// Maps one step to the source with the largest attribution mass. Ties go to
/// the lowest source id; an all-zero signal maps to no source.
inline TokenTraceResult trace_token(const ReducedStepSignal& signal,
                                    std::span<const SourceUnit> sources) {
  TokenTraceResult out;
  out.step = signal.step;
  const auto mass = source_masses(signal.scores, sources);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (mass[j] <= 0.0) continue;
    if (mass[j] > out.confidence ||
        (mass[j] == out.confidence && sources[j].id < out.source_id)) {
      out.confidence = mass[j];
      out.source_id = sources[j].id;
    }
  }
  return out;
}

namespace detail {

inline bool ends_sentence(std::string_view token) {
  std::size_t e = token.size();
  while (e > 0 && is_space(token[e - 1])) --e;
  return e > 0 && (is_ascii_terminal(token[e - 1]) || token.substr(0, e).find('\n') != std::string_view::npos);
}

inline std::vector<std::string> step_pos_tags(const Trace& trace) {
  std::vector<std::string> tags;
  tags.reserve(trace.steps.size());
  bool sentence_initial = true;
  for (const auto& step : trace.steps) {
    tags.push_back(step.pos_tag ? *step.pos_tag : tag_pos(step.token_text, sentence_initial));
    const bool blank = step.token_text.find_first_not_of(" \t\r\n") == std::string::npos;
    if (!blank) sentence_initial = ends_sentence(step.token_text);
    if (step.token_text.find('\n') != std::string::npos) sentence_initial = true;
  }
  return tags;
}

}  // namespace detail

/// Traces every generated token against `sources` (generation-time tracing).
/// POS tags come from the trace when present, otherwise from tag_pos.
inline std::vector<TokenTraceResult> trace_all(const Trace& trace, const ChannelMethod& method,
                                               std::span<const SourceUnit> sources) {
  std::vector<TokenTraceResult> out;
  out.reserve(trace.steps.size());
  const auto tags = detail::step_pos_tags(trace);
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto signal = reduce_channel(trace, trace.steps[k], method);
    auto result = trace_token(signal, sources);
    result.pos_tag = tags[k];
    out.push_back(std::move(result));
  }
  return out;
}

inline std::vector<TokenTraceResult> trace_all(const Trace& trace, const ChannelMethod& method) {
  return trace_all(trace, method, trace.sources);
}

}  // namespace omnitrace
