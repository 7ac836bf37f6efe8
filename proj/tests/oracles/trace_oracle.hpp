#pragma once

// Naive token tracing: enumerate sources, sum their scores position by
// position, keep the first strict maximum.

#include <utility>
#include <vector>

namespace oracle {

struct NaiveSource {
  int id;
  std::size_t begin;
  std::size_t end;
};

/// Returns (source id or -1, confidence).
inline std::pair<int, double> trace_token(const std::vector<double>& scores, const std::vector<NaiveSource>& sources) {
  int best = -1;
  double best_mass = 0.0;
  std::vector<NaiveSource> by_id = sources;
  for (std::size_t a = 0; a < by_id.size(); ++a)
    for (std::size_t b = a + 1; b < by_id.size(); ++b)
      if (by_id[b].id < by_id[a].id) std::swap(by_id[a], by_id[b]);
  for (const auto& s : by_id) {
    double mass = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (i >= s.begin && i < s.end) mass += scores[i];
    if (mass > best_mass) {
      best = s.id;
      best_mass = mass;
    }
  }
  return {best, best_mass};
}

/// Clamp-then-normalize over the whole context.
inline std::vector<double> normalize(std::vector<double> v) {
  double sum = 0.0;
  for (auto& x : v) {
    if (x < 0) x = 0;
    sum += x;
  }
  if (sum > 0)
    for (auto& x : v) x /= sum;
  return v;
}

}  // namespace oracle
