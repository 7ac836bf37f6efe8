#pragma once

// Direct transcription of the reference curate_sources_with_conf procedure.
// Python dicts become std::map, so key iteration (and therefore the stable
// ranking sort's tie order) is ascending id.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

struct CurateConfig {
  double gamma = 1.0;
  double alpha = 0.7;
  double p_min = 0.10;
  double run_min = 0.20;
  double coverage = 0.80;
};

inline const std::map<std::string, double>& pos_w() {
  static const std::map<std::string, double> table = {
      {"NOUN", 1.0}, {"PROPN", 1.0}, {"NUM", 1.0}, {"VERB", 0.8}, {"ADJ", 0.8}, {"ADV", 0.5}};
  return table;
}

inline double pos_w_get(const std::string& p, double fallback) {
  auto it = pos_w().find(p);
  return it == pos_w().end() ? fallback : it->second;
}

inline std::vector<int> curate_sources_with_conf(const std::vector<int>& source_ids, const std::vector<std::string>& pos,
                                                 const std::vector<double>& conf, const CurateConfig& cfg) {
  const std::size_t T = source_ids.size();
  if (T == 0) return {};
  if (!(T == pos.size() && pos.size() == conf.size()))
    throw std::invalid_argument("source_ids, pos, conf must have the same length.");

  std::vector<double> vote;
  for (std::size_t i = 0; i < T; ++i) {
    const double pw = pos_w_get(pos[i], 0.3);
    const double cw = std::pow(std::max(conf[i], 0.0), cfg.gamma);
    vote.push_back(pw * cw);
  }

  double total = 0.0;
  for (double v : vote) total += v;
  if (total <= 0) return {};

  std::map<int, double> mass;
  for (std::size_t i = 0; i < T; ++i) mass[source_ids[i]] += vote[i];
  std::map<int, double> p_mass;
  for (const auto& [s, m] : mass) p_mass[s] = m / total;

  std::map<int, double> run_max;
  int cur_s = source_ids[0];
  double cur_run = vote[0];
  for (std::size_t i = 1; i < T; ++i) {
    if (source_ids[i] == cur_s) {
      cur_run += vote[i];
    } else {
      run_max[cur_s] = std::max(run_max[cur_s], cur_run);
      cur_s = source_ids[i];
      cur_run = vote[i];
    }
  }
  run_max[cur_s] = std::max(run_max[cur_s], cur_run);
  std::map<int, double> run_frac;
  for (const auto& [s, m] : mass) run_frac[s] = run_max[s] / total;

  auto score = [&](int s) { return cfg.alpha * p_mass[s] + (1.0 - cfg.alpha) * run_frac[s]; };

  std::vector<int> ranked;
  for (const auto& [s, p] : p_mass) ranked.push_back(s);
  std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) { return score(a) > score(b); });

  std::vector<int> selected;
  double cum = 0.0;
  for (int s : ranked) {
    const bool strong_run = run_frac[s] >= cfg.run_min;
    if (p_mass[s] < cfg.p_min && !strong_run) continue;
    selected.push_back(s);
    cum += p_mass[s];
    if (cum >= cfg.coverage) break;
  }
  return selected;
}

}  // namespace oracle
