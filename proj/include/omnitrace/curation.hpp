#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omnitrace/chunking.hpp"
#include "omnitrace/tracing.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

/// Component switches used for ablations. All on is the full method.
struct AblationSwitches {
  bool use_pos = true;
  bool use_conf_weight = true;
  bool use_conf = true;
  bool use_run = true;
  bool use_p_min = true;

  bool operator==(const AblationSwitches&) const = default;
};

enum class Ablation { kPos, kConfWeight, kConf, kRun, kPMin };

inline std::optional<Ablation> ablation_from_string(std::string_view s) noexcept {
  if (s == "pos") return Ablation::kPos;
  if (s == "conf_weight") return Ablation::kConfWeight;
  if (s == "conf") return Ablation::kConf;
  if (s == "run") return Ablation::kRun;
  if (s == "pmin") return Ablation::kPMin;
  return std::nullopt;
}

inline std::map<std::string, double> default_pos_weights() {
  return {{"NOUN", 1.0}, {"PROPN", 1.0}, {"NUM", 1.0}, {"VERB", 0.8}, {"ADJ", 0.8}, {"ADV", 0.5}};
}

struct CurationConfig {
  double gamma = 1.0;      // confidence exponent
  double alpha = 0.7;      // mass vs. run-coherence blend
  double p_min = 0.10;     // minimum normalized mass
  double run_min = 0.20;   // run fraction that overrides p_min
  double coverage = 0.80;  // cumulative mass at which selection stops
  std::map<std::string, double> pos_weights = default_pos_weights();
  double default_pos_weight = 0.3;
  AblationSwitches switches;

  double pos_weight(const std::string& tag) const {
    auto it = pos_weights.find(tag);
    return it == pos_weights.end() ? default_pos_weight : it->second;
  }

  void validate() const {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!std::isfinite(gamma) || gamma < 0.0) throw Error(ErrorCode::kConfig, "gamma must be >= 0");
    if (!in_unit(alpha)) throw Error(ErrorCode::kConfig, "alpha must lie in [0, 1]");
    if (!in_unit(p_min)) throw Error(ErrorCode::kConfig, "p_min must lie in [0, 1]");
    if (!in_unit(run_min)) throw Error(ErrorCode::kConfig, "run_min must lie in [0, 1]");
    if (!(coverage > 0.0 && coverage <= 1.0)) throw Error(ErrorCode::kConfig, "coverage must lie in (0, 1]");
    if (!in_unit(default_pos_weight)) throw Error(ErrorCode::kConfig, "default POS weight must lie in [0, 1]");
    for (const auto& [tag, w] : pos_weights)
      if (!in_unit(w)) throw Error(ErrorCode::kConfig, "POS weight for " + tag + " must lie in [0, 1]");
  }

  bool operator==(const CurationConfig&) const = default;
};

inline CurationConfig ablate(CurationConfig cfg, Ablation a) {
  switch (a) {
    case Ablation::kPos: cfg.switches.use_pos = false; break;
    case Ablation::kConfWeight: cfg.switches.use_conf_weight = false; break;
    case Ablation::kConf: cfg.switches.use_conf = false; break;
    case Ablation::kRun: cfg.switches.use_run = false; break;
    case Ablation::kPMin: cfg.switches.use_p_min = false; break;
  }
  return cfg;
}

struct SourceStat {
  SourceId id = 0;
  double p_mass = 0.0;
  double run_frac = 0.0;
  double score = 0.0;

  bool operator==(const SourceStat&) const = default;
};

/// Per-source vote statistics of one chunk, in ascending id order.
struct CurationDiagnostics {
  double total_vote = 0.0;
  std::vector<SourceStat> sources;

  const SourceStat* find(SourceId id) const noexcept {
    for (const auto& s : sources)
      if (s.id == id) return &s;
    return nullptr;
  }

  bool operator==(const CurationDiagnostics&) const = default;
};

struct CurationResult {
  std::vector<SourceId> selected;
  CurationDiagnostics diagnostics;
};

/// Vote weight of one traced token: POS weight times shaped confidence.
inline double token_vote(const TokenTraceResult& r, const CurationConfig& cfg) {
  if (!r.has_source()) return 0.0;
  const double pw = cfg.switches.use_pos ? cfg.pos_weight(r.pos_tag) : 1.0;
  double cw = 1.0;
  if (cfg.switches.use_conf) {
    const double gamma = cfg.switches.use_conf_weight ? cfg.gamma : 1.0;
    cw = std::pow(std::max(r.confidence, 0.0), gamma);
  }
  return pw * cw;
}

inline std::vector<double> compute_votes(std::span<const TokenTraceResult> results,
                                         const CurationConfig& cfg) {
  std::vector<double> votes;
  votes.reserve(results.size());
  for (const auto& r : results) votes.push_back(token_vote(r, cfg));
  return votes;
}

/// Confidence-based source selection over one chunk's token traces.
///
/// Sources are ranked by alpha * p_mass + (1 - alpha) * run_frac, where
/// run_frac is the heaviest contiguous same-source vote run over the total
/// vote. Walking the ranking, a source below p_min is skipped unless its run
/// fraction reaches run_min; selection stops once the selected mass reaches
/// `coverage`. Tokens with kNoSource break runs and are never candidates.
/// Ranking ties go to the lower id.
inline CurationResult curate_sources(std::span<const SourceId> source_ids,
                                     std::span<const double> votes, const CurationConfig& cfg) {
  if (source_ids.size() != votes.size())
    throw invalid_argument("curation: source_ids and votes differ in length");
  CurationResult out;
  const std::size_t n = source_ids.size();
  if (n == 0) return out;

  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) total += source_ids[t] == kNoSource ? 0.0 : votes[t];
  out.diagnostics.total_vote = total;

  // Dense slots for the distinct sources, ascending by id.
  std::vector<SourceId> ids;
  ids.reserve(n);
  for (SourceId s : source_ids)
    if (s != kNoSource) ids.push_back(s);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto slot = [&](SourceId s) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), s) - ids.begin());
  };

  const std::size_t m = ids.size();
  std::vector<double> mass(m, 0.0);
  std::vector<double> run_max(m, 0.0);
  std::vector<std::size_t> token_slot(n, m);
  for (std::size_t t = 0; t < n; ++t) {
    if (source_ids[t] == kNoSource) continue;
    token_slot[t] = slot(source_ids[t]);
    mass[token_slot[t]] += votes[t];
  }
  {
    std::size_t cur = token_slot[0];
    double run = cur == m ? 0.0 : votes[0];
    for (std::size_t t = 1; t < n; ++t) {
      if (token_slot[t] == cur) {
        if (cur != m) run += votes[t];
      } else {
        if (cur != m) run_max[cur] = std::max(run_max[cur], run);
        cur = token_slot[t];
        run = cur == m ? 0.0 : votes[t];
      }
    }
    if (cur != m) run_max[cur] = std::max(run_max[cur], run);
  }

  out.diagnostics.sources.resize(m);
  if (total <= 0.0) {
    for (std::size_t k = 0; k < m; ++k) out.diagnostics.sources[k] = {ids[k], 0.0, 0.0, 0.0};
    return out;
  }

  const bool use_run = cfg.switches.use_run;
  std::vector<double> p_mass(m);
  std::vector<double> run_frac(m);
  std::vector<double> score(m);
  for (std::size_t k = 0; k < m; ++k) {
    p_mass[k] = mass[k] / total;
    run_frac[k] = run_max[k] / total;
    const double run_term = use_run ? run_frac[k] : 0.0;
    score[k] = cfg.alpha * p_mass[k] + (1.0 - cfg.alpha) * run_term;
    out.diagnostics.sources[k] = {ids[k], p_mass[k], run_frac[k], score[k]};
  }

  std::vector<std::size_t> ranked(m);
  for (std::size_t k = 0; k < m; ++k) ranked[k] = k;
  // Slots are already in id order, so a stable sort breaks ties by lower id.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  double cum = 0.0;
  for (std::size_t k : ranked) {
    const bool strong_run = use_run && run_frac[k] >= cfg.run_min;
    if (cfg.switches.use_p_min && p_mass[k] < cfg.p_min && !strong_run) continue;
    out.selected.push_back(ids[k]);
    cum += p_mass[k];
    if (cum >= cfg.coverage) break;
  }
  return out;
}

/// Selected ids only; see curate_sources.
inline std::vector<SourceId> curate_sources_with_conf(std::span<const SourceId> source_ids,
                                                      std::span<const double> votes,
                                                      const CurationConfig& cfg) {
  return curate_sources(source_ids, votes, cfg).selected;
}

/// One chunk with its curated source set.
struct SpanAttribution {
  Chunk chunk;
  std::vector<SourceId> selected;  // score-descending
  CurationDiagnostics diagnostics;
  std::vector<TokenTraceResult> tokens;  // the chunk's steps, votes filled
  // Filled by union_multimodal: diagnostics of each contributing modality group.
  std::vector<std::pair<std::string, CurationDiagnostics>> group_diagnostics;

  bool operator==(const SpanAttribution&) const = default;
};

/// Curates every chunk given the per-step trace results of the whole trace.
inline std::vector<SpanAttribution> attribute_traced(const std::vector<TokenTraceResult>& traced,
                                                     const std::vector<Chunk>& chunks,
                                                     const CurationConfig& cfg) {
  std::vector<SpanAttribution> out;
  out.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    SpanAttribution attr;
    attr.chunk = chunk;
    std::vector<SourceId> ids;
    std::vector<double> votes;
    for (std::size_t step : chunk.token_steps) {
      TokenTraceResult r = traced[step - 1];
      r.vote = token_vote(r, cfg);
      ids.push_back(r.source_id);
      votes.push_back(r.vote);
      attr.tokens.push_back(std::move(r));
    }
    auto result = curate_sources(ids, votes, cfg);
    attr.selected = std::move(result.selected);
    attr.diagnostics = std::move(result.diagnostics);
    out.push_back(std::move(attr));
  }
  return out;
}

/// The full pipeline: trace every step, segment the output, curate each chunk.
inline std::vector<SpanAttribution> attribute(const Trace& trace, const CurationConfig& cfg,
                                              const ChannelMethod& method,
                                              const Segmenter& segmenter = default_segmenter()) {
  cfg.validate();
  const auto traced = trace_all(trace, method);
  return attribute_traced(traced, segment_output(trace, segmenter), cfg);
}

/// Per chunk set-union of several attributions of the same generation,
/// ordered by each id's best score across groups (ties to the lower id).
inline std::vector<SpanAttribution> union_multimodal(
    const std::map<std::string, std::vector<SpanAttribution>>& per_group) {
  std::vector<SpanAttribution> out;
  if (per_group.empty()) return out;
  const auto& first = per_group.begin()->second;
  for (const auto& [name, attrs] : per_group) {
    if (attrs.size() != first.size())
      throw invalid_argument("union: group '" + name + "' has a different chunk count");
    for (std::size_t k = 0; k < attrs.size(); ++k)
      if (attrs[k].chunk.char_range != first[k].chunk.char_range)
        throw invalid_argument("union: group '" + name + "' segments chunk " + std::to_string(k) +
                               " differently");
  }
  for (std::size_t k = 0; k < first.size(); ++k) {
    SpanAttribution merged;
    merged.chunk = first[k].chunk;
    std::map<SourceId, double> best;
    for (const auto& [name, attrs] : per_group) {
      const auto& a = attrs[k];
      for (SourceId id : a.selected) {
        const auto* stat = a.diagnostics.find(id);
        const double s = stat ? stat->score : 0.0;
        auto [it, inserted] = best.emplace(id, s);
        if (!inserted) it->second = std::max(it->second, s);
      }
      merged.group_diagnostics.emplace_back(name, a.diagnostics);
    }
    for (const auto& [id, s] : best) merged.selected.push_back(id);
    std::stable_sort(merged.selected.begin(), merged.selected.end(),
                     [&](SourceId a, SourceId b) { return best[a] > best[b]; });
    out.push_back(std::move(merged));
  }
  return out;
}

/// Name of the modality group a source belongs to when attributing visual and
/// audio evidence separately.
inline std::string modality_group(Modality m) {
  switch (m) {
    case Modality::kImage:
    case Modality::kVideo: return "visual";
    case Modality::kAudio: return "audio";
    case Modality::kText: return "text";
  }
  return "text";
}

/// Curates each modality group against its own sources, then unions the
/// groups chunk by chunk.
inline std::vector<SpanAttribution> attribute_multimodal(const Trace& trace, const CurationConfig& cfg,
                                                         const ChannelMethod& method,
                                                         const Segmenter& segmenter = default_segmenter()) {
  cfg.validate();
  std::map<std::string, std::vector<SourceUnit>> groups;
  for (const auto& s : trace.sources) groups[modality_group(s.modality)].push_back(s);
  const auto chunks = segment_output(trace, segmenter);
  std::map<std::string, std::vector<SpanAttribution>> per_group;
  for (const auto& [name, sources] : groups) {
    per_group[name] = attribute_traced(trace_all(trace, method, sources), chunks, cfg);
  }
  if (per_group.empty()) return attribute_traced(trace_all(trace, method), chunks, cfg);
  return union_multimodal(per_group);
}

/// An attribution run over one example together with what downstream metrics
/// need to interpret source ids.
struct ExampleAttribution {
  std::string example_id;
  std::string method;
  std::string config_hash;
  std::size_t input_length = 0;
  std::optional<double> duration_s;
  std::vector<SourceUnit> sources;
  std::optional<std::map<std::string, SourceId>> option_map;
  std::string generated_text;
  std::vector<SpanAttribution> chunks;

  const SourceUnit* find_source(SourceId id) const noexcept {
    for (const auto& s : sources)
      if (s.id == id) return &s;
    return nullptr;
  }

  bool operator==(const ExampleAttribution&) const = default;
};

inline ExampleAttribution make_example(const Trace& trace, std::vector<SpanAttribution> chunks,
                                       std::string method = {}, std::string config_hash = {}) {
  ExampleAttribution ex;
  ex.example_id = trace.example_id;
  ex.method = std::move(method);
  ex.config_hash = std::move(config_hash);
  ex.input_length = trace.timeline.size();
  ex.duration_s = trace.timeline.duration_s;
  ex.sources = trace.sources;
  for (auto& s : ex.sources) s.embedding.reset();
  ex.option_map = trace.option_map;
  ex.generated_text = trace.generated_text;
  ex.chunks = std::move(chunks);
  return ex;
}

}  // namespace omnitrace
