#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omnitrace/chunking.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

/// An externally supplied source boundary, e.g. one timestamped ASR segment.
/// At least one of `token_range` and `time` must be set.
struct SegmentHint {
  std::optional<TokenRange> token_range;
  std::optional<Interval> time;
  std::optional<Modality> modality;
  std::optional<std::string> text;

  bool operator==(const SegmentHint&) const = default;
};

namespace detail {

inline std::optional<Interval> time_envelope(const TokenTimeline& timeline, TokenRange range) {
  std::optional<Interval> env;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const auto& t = timeline.tokens[i].time;
    if (!t) continue;
    if (!env) {
      env = *t;
    } else {
      env->start = std::min(env->start, t->start);
      env->end = std::max(env->end, t->end);
    }
  }
  return env;
}

inline Modality majority_modality(const TokenTimeline& timeline, TokenRange range) {
  std::size_t counts[4] = {0, 0, 0, 0};
  for (std::size_t i = range.begin; i < range.end; ++i)
    ++counts[static_cast<std::size_t>(timeline.tokens[i].modality)];
  std::size_t best = 0;
  for (std::size_t m = 1; m < 4; ++m)
    if (counts[m] > counts[best]) best = m;
  return static_cast<Modality>(best);
}

inline void require_time(const SourceUnit& unit) {
  if (is_timed(unit.modality) && !unit.time) {
    throw validation_error("source " + std::to_string(unit.id) + ": " +
                           std::string(to_string(unit.modality)) +
                           " source without time interval");
  }
}

inline std::vector<SourceUnit> sources_from_runs(const TokenTimeline& timeline,
                                                 const Segmenter& segmenter) {
  std::vector<SourceUnit> out;
  const std::size_t n = timeline.size();
  std::size_t begin = 0;
  while (begin < n) {
    const Modality m = timeline.tokens[begin].modality;
    std::size_t end = begin + 1;
    while (end < n && timeline.tokens[end].modality == m) ++end;

    if (m != Modality::kText) {
      out.push_back({0, m, {begin, end}, time_envelope(timeline, {begin, end}), {}, {}});
      begin = end;
      continue;
    }

    // Split text runs at sentence boundaries of their concatenated surface.
    std::string joined;
    std::vector<CharRange> spans;
    for (std::size_t i = begin; i < end; ++i) {
      const std::string& s = timeline.tokens[i].text ? *timeline.tokens[i].text : std::string();
      spans.push_back({joined.size(), joined.size() + s.size()});
      joined += s;
    }
    const auto sentences = segmenter.split(joined);
    const auto owner = assign_by_majority(spans, sentences);
    std::size_t run_begin = begin;
    for (std::size_t i = begin + 1; i <= end; ++i) {
      if (i == end || owner[i - begin] != owner[i - 1 - begin]) {
        SourceUnit unit{0, m, {run_begin, i}, time_envelope(timeline, {run_begin, i}), {}, {}};
        std::string text;
        for (std::size_t k = run_begin; k < i; ++k)
          if (timeline.tokens[k].text) text += *timeline.tokens[k].text;
        if (!text.empty()) unit.text = std::move(text);
        out.push_back(std::move(unit));
        run_begin = i;
      }
    }
    begin = end;
  }
  return out;
}

inline TokenRange tokens_in_time(const TokenTimeline& timeline, Interval window,
                                 std::optional<Modality> modality) {
  std::optional<std::size_t> lo;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const auto& tok = timeline.tokens[i];
    if (!tok.time) continue;
    if (modality && tok.modality != *modality) continue;
    const double mid = tok.time->midpoint();
    const bool inside = window.end > window.start
                            ? (mid >= window.start && mid < window.end)
                            : (mid == window.start);
    if (!inside) continue;
    if (!lo) lo = i;
    hi = i + 1;
  }
  if (!lo) return {0, 0};
  return {*lo, hi};
}

}  // namespace detail

/// Builds the source units S_j of a timeline.
///
/// Without hints every maximal run of same-modality tokens becomes a unit and
/// text runs are further split at sentence boundaries. With hints exactly the
/// hinted units are emitted, clipped to the timeline. Time-only hints claim the
/// timed tokens whose midpoint falls inside the interval. Ids follow timeline
/// order starting at 0.
inline std::vector<SourceUnit> build_sources(const TokenTimeline& timeline,
                                             std::span<const SegmentHint> hints = {},
                                             const Segmenter& segmenter = default_segmenter()) {
  std::vector<SourceUnit> units;
  if (hints.empty()) {
    units = detail::sources_from_runs(timeline, segmenter);
  } else {
    const std::size_t n = timeline.size();
    for (std::size_t h = 0; h < hints.size(); ++h) {
      const auto& hint = hints[h];
      const std::string where = "hint " + std::to_string(h);
      if (!hint.token_range && !hint.time)
        throw validation_error(where + ": needs a token range or a time interval");

      std::optional<Interval> time = hint.time;
      if (time) {
        if (!std::isfinite(time->start) || !std::isfinite(time->end) || time->start < 0.0 ||
            time->end < time->start) {
          throw validation_error(where + ": invalid time interval");
        }
        if (timeline.duration_s) {
          if (time->start >= *timeline.duration_s)
            throw validation_error(where + ": hint outside timeline bounds");
          time->end = std::min(time->end, *timeline.duration_s);
        }
      }

      TokenRange range;
      if (hint.token_range) {
        range = *hint.token_range;
        if (range.empty() || range.begin >= n)
          throw validation_error(where + ": hint outside timeline bounds");
        range.end = std::min(range.end, n);
      } else {
        range = detail::tokens_in_time(timeline, *time, hint.modality);
        if (range.empty()) throw validation_error(where + ": hint matches no tokens");
      }

      SourceUnit unit;
      unit.modality = hint.modality ? *hint.modality : detail::majority_modality(timeline, range);
      unit.token_range = range;
      unit.time = time ? time : detail::time_envelope(timeline, range);
      unit.text = hint.text;
      units.push_back(std::move(unit));
    }

    std::stable_sort(units.begin(), units.end(), [](const SourceUnit& a, const SourceUnit& b) {
      return a.token_range.begin < b.token_range.begin;
    });
    for (std::size_t k = 1; k < units.size(); ++k) {
      if (units[k].token_range.begin < units[k - 1].token_range.end)
        throw validation_error("overlapping hints");
      const auto& a = units[k - 1].time;
      const auto& b = units[k].time;
      if (a && b && b->start < a->end && a->start < b->end) throw validation_error("overlapping hints");
    }
  }

  for (std::size_t k = 0; k < units.size(); ++k) {
    units[k].id = static_cast<SourceId>(k);
    detail::require_time(units[k]);
  }
  return units;
}

}  // namespace omnitrace
