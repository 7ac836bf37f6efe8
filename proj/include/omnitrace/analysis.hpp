#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "omnitrace/curation.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

struct PositionSample {
  double position = 0.0;
  double weight = 1.0;
};

struct PositionStats {
  std::vector<PositionSample> samples;  // sorted by position
  double mean = 0.0;
  std::vector<std::pair<double, double>> cdf;  // (position, cumulative fraction)
};

/// Normalized position in [0, 1] of a source's midpoint: token midpoint over
/// input length for text/image, time midpoint over duration for audio/video.
inline double normalized_position(const SourceUnit& s, std::size_t input_length,
                                  std::optional<double> duration_s) {
  if (is_timed(s.modality)) {
    if (!s.time) throw validation_error("untimed source " + std::to_string(s.id));
    if (!duration_s || *duration_s <= 0.0)
      throw validation_error("source " + std::to_string(s.id) + ": timeline has no duration_s");
    return std::clamp(s.time->midpoint() / *duration_s, 0.0, 1.0);
  }
  if (input_length == 0) throw validation_error("empty timeline");
  const double mid = 0.5 * static_cast<double>(s.token_range.begin + s.token_range.end);
  return std::clamp(mid / static_cast<double>(input_length), 0.0, 1.0);
}

/// Empirical distribution of selected-source positions over a dataset, one
/// sample per (chunk, selected source). With `mass_weighted` each sample is
/// weighted by the source's p_mass in its chunk instead of 1.
inline PositionStats position_cdf(std::span<const ExampleAttribution> dataset, bool mass_weighted = false) {
  PositionStats out;
  for (const auto& ex : dataset) {
    for (const auto& chunk : ex.chunks) {
      for (SourceId id : chunk.selected) {
        const SourceUnit* s = ex.find_source(id);
        if (!s) throw validation_error("unknown source id " + std::to_string(id));
        double w = 1.0;
        if (mass_weighted) {
          const auto* stat = chunk.diagnostics.find(id);
          w = stat ? stat->p_mass : 0.0;
        }
        out.samples.push_back({normalized_position(*s, ex.input_length, ex.duration_s), w});
      }
    }
  }
  // Sorting fixes the summation order, so dataset order cannot change results.
  std::sort(out.samples.begin(), out.samples.end(), [](const PositionSample& a, const PositionSample& b) {
    return a.position < b.position || (a.position == b.position && a.weight < b.weight);
  });
  double total = 0.0;
  double weighted = 0.0;
  for (const auto& s : out.samples) {
    total += s.weight;
    weighted += s.weight * s.position;
  }
  if (total <= 0.0) return out;
  out.mean = weighted / total;
  double acc = 0.0;
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    acc += out.samples[k].weight;
    const bool last_at_position =
        k + 1 == out.samples.size() || out.samples[k + 1].position != out.samples[k].position;
    if (last_at_position) out.cdf.emplace_back(out.samples[k].position, acc / total);
  }
  out.cdf.back().second = 1.0;
  return out;
}

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_predicted = 0.0;
  double mean_gold = 0.0;
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
};

/// Equal-width binning of predicted image-mass fractions; bin i covers
/// (i/B, (i+1)/B] and bin 0 also takes 0.
inline CalibrationCurve calibration_curve(std::span<const double> predicted, std::span<const double> gold,
                                          std::size_t bins = 10) {
  if (bins == 0) throw invalid_argument("calibration needs at least one bin");
  if (predicted.size() != gold.size()) throw invalid_argument("calibration inputs differ in length");
  CalibrationCurve out;
  out.bins.resize(bins);
  const double width = 1.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.bins[b].lower = static_cast<double>(b) * width;
    out.bins[b].upper = b + 1 == bins ? 1.0 : static_cast<double>(b + 1) * width;
  }
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(predicted.size());
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const double p = predicted[k];
    const double g = gold[k];
    if (!(p >= 0.0 && p <= 1.0) || !(g >= 0.0 && g <= 1.0))
      throw invalid_argument("calibration fraction outside [0, 1]");
    pairs.emplace_back(p, g);
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<double> sum_pred(bins, 0.0), sum_gold(bins, 0.0);
  for (const auto& [p, g] : pairs) {
    auto b = static_cast<std::ptrdiff_t>(std::ceil(p * static_cast<double>(bins))) - 1;
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    sum_pred[b] += p;
    sum_gold[b] += g;
    ++out.bins[b].count;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out.bins[b].count == 0) continue;
    const double c = static_cast<double>(out.bins[b].count);
    out.bins[b].mean_predicted = sum_pred[b] / c;
    out.bins[b].mean_gold = sum_gold[b] / c;
  }
  return out;
}

/// Image share of a chunk's selected p_mass; nullopt when nothing is selected.
inline std::optional<double> predicted_image_fraction(const SpanAttribution& chunk,
                                                      std::span<const SourceUnit> sources) {
  double all = 0.0;
  double image = 0.0;
  for (SourceId id : chunk.selected) {
    const auto* stat = chunk.diagnostics.find(id);
    double m = stat ? stat->p_mass : 0.0;
    if (!stat) {
      for (const auto& [name, diag] : chunk.group_diagnostics)
        if (const auto* st = diag.find(id)) m = std::max(m, st->p_mass);
    }
    all += m;
    auto it = std::find_if(sources.begin(), sources.end(), [&](const SourceUnit& s) { return s.id == id; });
    if (it != sources.end() && it->modality == Modality::kImage) image += m;
  }
  if (all <= 0.0) return std::nullopt;
  return image / all;
}

/// Image share of a gold chunk's labels; nullopt for an empty label set.
inline std::optional<double> gold_image_fraction(const GoldChunk& gold, std::span<const SourceUnit> sources) {
  if (gold.source_ids.empty()) return std::nullopt;
  std::size_t image = 0;
  for (SourceId id : gold.source_ids) {
    auto it = std::find_if(sources.begin(), sources.end(), [&](const SourceUnit& s) { return s.id == id; });
    if (it != sources.end() && it->modality == Modality::kImage) ++image;
  }
  return static_cast<double>(image) / static_cast<double>(gold.source_ids.size());
}

namespace detail {

inline std::vector<std::string> lower_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(tok));
  }
  return out;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// ROUGE-L with beta = 1 over lowercased whitespace tokens.
inline RougeScore rouge_l_prf(const std::string& candidate, const std::string& reference) {
  const auto c = detail::lower_tokens(candidate);
  const auto r = detail::lower_tokens(reference);
  if (c.empty() && r.empty()) return {1.0, 1.0, 1.0};
  if (c.empty() || r.empty()) return {0.0, 0.0, 0.0};
  const double lcs = static_cast<double>(detail::lcs_length(c, r));
  RougeScore s;
  s.precision = lcs / static_cast<double>(c.size());
  s.recall = lcs / static_cast<double>(r.size());
  s.f = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

inline double rouge_l(const std::string& candidate, const std::string& reference) {
  return rouge_l_prf(candidate, reference).f;
}

/// Generation quality of one example: a correctness flag or a score in [0, 1].
using QualityValue = std::variant<bool, double>;

struct QualityGroup {
  std::string label;
  std::size_t count = 0;
  std::optional<double> mean_f1;  // nullopt for an empty group
};

/// Mean attribution F1 per quality group. Flags split into "correct" and
/// "incorrect"; scores fall into `bins` equal-width bins over [0, 1] using the
/// same (lower, upper] convention as calibration_curve.
inline std::vector<QualityGroup> group_by_quality(const std::map<std::string, double>& f1_by_example,
                                                  const std::map<std::string, QualityValue>& quality,
                                                  std::size_t bins = 5) {
  for (const auto& [id, f] : f1_by_example)
    if (!quality.count(id)) throw invalid_argument("example '" + id + "' has no quality value");
  for (const auto& [id, q] : quality)
    if (!f1_by_example.count(id)) throw invalid_argument("example '" + id + "' has no attribution F1");
  if (bins == 0) throw invalid_argument("quality grouping needs at least one bin");

  const bool flags = !quality.empty() && std::holds_alternative<bool>(quality.begin()->second);
  for (const auto& [id, q] : quality)
    if (std::holds_alternative<bool>(q) != flags)
      throw invalid_argument("quality values mix flags and scores");

  std::vector<QualityGroup> groups;
  std::vector<double> sums;
  if (flags) {
    groups = {{"correct", 0, std::nullopt}, {"incorrect", 0, std::nullopt}};
  } else {
    for (std::size_t b = 0; b < bins; ++b) {
      std::ostringstream label;
      label << "(" << static_cast<double>(b) / static_cast<double>(bins) << ","
            << static_cast<double>(b + 1) / static_cast<double>(bins) << "]";
      groups.push_back({label.str(), 0, std::nullopt});
    }
  }
  sums.assign(groups.size(), 0.0);
  for (const auto& [id, f] : f1_by_example) {
    const auto& q = quality.at(id);
    std::size_t g = 0;
    if (flags) {
      g = std::get<bool>(q) ? 0 : 1;
    } else {
      const double v = std::get<double>(q);
      if (!(v >= 0.0 && v <= 1.0)) throw invalid_argument("quality score outside [0, 1]");
      auto b = static_cast<std::ptrdiff_t>(std::ceil(v * static_cast<double>(bins))) - 1;
      g = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1));
    }
    ++groups[g].count;
    sums[g] += f;
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].count) groups[g].mean_f1 = sums[g] / static_cast<double>(groups[g].count);
  return groups;
}

}  // namespace omnitrace
