#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "omnitrace/error.hpp"

namespace omnitrace {

inline constexpr int kSchemaVersion = 1;

using SourceId = std::int32_t;

// Marks a generated token that could not be mapped to any source.
inline constexpr SourceId kNoSource = -1;

enum class Modality : std::uint8_t { kText, kImage, kAudio, kVideo };

inline std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kImage: return "image";
    case Modality::kAudio: return "audio";
    case Modality::kVideo: return "video";
  }
  return "text";
}

inline std::optional<Modality> modality_from_string(std::string_view s) noexcept {
  if (s == "text") return Modality::kText;
  if (s == "image") return Modality::kImage;
  if (s == "audio") return Modality::kAudio;
  if (s == "video") return Modality::kVideo;
  return std::nullopt;
}

/// Audio and video sources are located in time rather than by token text.
inline bool is_timed(Modality m) noexcept {
  return m == Modality::kAudio || m == Modality::kVideo;
}

/// Closed-open interval in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double midpoint() const noexcept { return 0.5 * (start + end); }
  bool operator==(const Interval&) const = default;
};

/// Half-open range of input token positions.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  bool empty() const noexcept { return end <= begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  bool operator==(const TokenRange&) const = default;
};

struct InputToken {
  std::size_t index = 0;
  Modality modality = Modality::kText;
  std::optional<std::string> text;
  std::optional<Interval> time;

  bool operator==(const InputToken&) const = default;
};

/// The interleaved multimodal input sequence seen by the generator.
struct TokenTimeline {
  std::vector<InputToken> tokens;
  std::optional<double> duration_s;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const TokenTimeline&) const = default;
};

/// A contiguous attribution target: a text span, an image token block or a
/// media time interval.
struct SourceUnit {
  SourceId id = 0;
  Modality modality = Modality::kText;
  TokenRange token_range;
  std::optional<Interval> time;
  std::optional<std::string> text;
  std::optional<std::vector<double>> embedding;

  bool operator==(const SourceUnit&) const = default;
};

/// One row of scores over the context, stored dense or as sorted
/// (index, value) pairs.
struct ScoreRow {
  bool sparse = false;
  std::vector<double> dense;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  template <class F>
  void for_each(F&& f) const {
    if (sparse) {
      for (std::size_t k = 0; k < indices.size(); ++k) f(std::size_t{indices[k]}, values[k]);
    } else {
      for (std::size_t i = 0; i < dense.size(); ++i) f(i, dense[i]);
    }
  }

  bool operator==(const ScoreRow&) const = default;
};

struct LayerHeadShape {
  std::size_t layers = 0;
  std::size_t heads = 0;

  std::size_t rows() const noexcept { return layers * heads; }
  bool operator==(const LayerHeadShape&) const = default;
};

/// Raw scores of one channel at one step. With a layer/head shape the rows
/// are stored layer-major: row = layer * heads + head.
struct ScoreVector {
  std::vector<ScoreRow> rows;
  std::optional<LayerHeadShape> layer_head_shape;

  bool operator==(const ScoreVector&) const = default;
};

/// One generated token y_t with its score channels over positions
/// 0 .. n + t - 2.
struct StepRecord {
  std::size_t step = 0;
  std::string token_text;
  std::map<std::string, ScoreVector> channels;
  std::optional<std::string> pos_tag;

  bool operator==(const StepRecord&) const = default;
};

/// Channels whose name contains "grad" carry gradient-derived scores and may
/// hold negative values.
inline bool is_gradient_channel(std::string_view name) noexcept {
  return name.find("grad") != std::string_view::npos;
}

struct Trace {
  int schema_version = kSchemaVersion;
  std::string example_id;
  TokenTimeline timeline;
  std::vector<SourceUnit> sources;
  std::vector<StepRecord> steps;
  bool space_joined = false;
  std::optional<std::map<std::string, SourceId>> option_map;
  std::string generated_text;

  std::size_t context_length(std::size_t step) const noexcept {
    return timeline.size() + step - 1;
  }

  const SourceUnit* find_source(SourceId id) const noexcept {
    for (const auto& s : sources)
      if (s.id == id) return &s;
    return nullptr;
  }

  bool operator==(const Trace&) const = default;
};

/// Half-open byte range into a UTF-8 string.
struct CharRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  bool operator==(const CharRange&) const = default;
};

/// Joins step tokens under the trace's detokenization policy.
inline std::string detokenize(const std::vector<StepRecord>& steps, bool space_joined) {
  std::string out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (space_joined && k > 0) out.push_back(' ');
    out += steps[k].token_text;
  }
  return out;
}

/// Byte span of each step's token inside the detokenized text.
inline std::vector<CharRange> step_char_ranges(const std::vector<StepRecord>& steps,
                                               bool space_joined) {
  std::vector<CharRange> ranges;
  ranges.reserve(steps.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (space_joined && k > 0) ++offset;
    ranges.push_back({offset, offset + steps[k].token_text.size()});
    offset += steps[k].token_text.size();
  }
  return ranges;
}

/// Sorts and merges overlapping or touching intervals.
inline std::vector<Interval> merge_intervals(std::vector<Interval> spans) {
  std::sort(spans.begin(), spans.end(), [](const Interval& a, const Interval& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  std::vector<Interval> merged;
  for (const auto& s : spans) {
    // a point on an interval's end stays separate
    const bool joins = !merged.empty() && (s.start < merged.back().end ||
                                          (s.start == merged.back().end && s.end > s.start));
    if (joins) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

/// Per-chunk gold record: source ids for discrete tasks, time spans for
/// audio/video tasks.
struct GoldChunk {
  std::vector<SourceId> source_ids;
  std::vector<Interval> spans;
  bool timed = false;

  bool operator==(const GoldChunk&) const = default;
};

struct GoldLabels {
  std::string example_id;
  std::vector<GoldChunk> chunks;

  std::size_t chunk_count() const noexcept { return chunks.size(); }
  bool operator==(const GoldLabels&) const = default;
};

}  // namespace omnitrace
