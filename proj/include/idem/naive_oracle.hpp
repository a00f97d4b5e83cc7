#pragma once

// Single-threaded reference implementations of the curve metrics: a direct
// double loop that gathers every qualifying score, sorts, and counts by
// binary search. Shares only `score()` and the pair definitions with the
// blocked engine, not its tiling, histogramming or merging.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "idem/metrics.hpp"

namespace idem {

namespace naive_detail {

inline bool qualifies(const ComparisonSpec& spec, std::size_t i, std::size_t j) {
  if (spec.mode == ComparisonMode::between_sets) return true;
  if (i == j) return false;
  if (!spec.probe->has_labels()) return spec.mode == ComparisonMode::within_set_nonmated;
  const bool same = spec.probe->label_ids()[i] == spec.probe->label_ids()[j];
  return spec.mode == ComparisonMode::within_set_mated ? same : !same;
}

inline const EmbeddingSet& partners_of(const ComparisonSpec& spec) {
  return spec.mode == ComparisonMode::between_sets ? *spec.gallery : *spec.probe;
}

/// Every qualifying score; within-set pairs once (i < j).
inline std::vector<double> all_scores(const ComparisonSpec& spec) {
  spec.validate();
  const auto& other = partners_of(spec);
  std::vector<double> scores;
  for (std::size_t i = 0; i < spec.probe->size(); ++i) {
    const std::size_t j0 = spec.mode == ComparisonMode::between_sets ? 0 : i + 1;
    for (std::size_t j = j0; j < other.size(); ++j)
      if (qualifies(spec, i, j)) scores.push_back(score(spec.probe->row(i), other.row(j), spec.scale));
  }
  std::sort(scores.begin(), scores.end());
  return scores;
}

inline std::vector<std::uint64_t> count_at_least(const std::vector<double>& sorted, const ThresholdGrid& grid) {
  std::vector<std::uint64_t> counts(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t)
    counts[t] = static_cast<std::uint64_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), grid[t]));
  return counts;
}

}  // namespace naive_detail

inline FarCurve far_curve_naive(const ComparisonSpec& spec, const ThresholdGrid& grid) {
  metrics_detail::require_nonmated(spec, "far_curve_naive");
  const auto scores = naive_detail::all_scores(spec);
  metrics_detail::require_pairs(scores.size(), spec);
  auto counts = naive_detail::count_at_least(scores, grid);
  auto rates = metrics_detail::rates(counts, scores.size());
  return FarCurve{grid, std::move(counts), scores.size(), std::move(rates)};
}

/// Per-probe maximum over qualifying partners, by direct double loop.
inline std::vector<double> nearest_neighbour_scores_naive(const ComparisonSpec& spec) {
  metrics_detail::require_nonmated(spec, "nearest_neighbour_scores_naive");
  spec.validate();
  const auto& other = naive_detail::partners_of(spec);
  std::vector<double> nearest(spec.probe->size());
  for (std::size_t i = 0; i < spec.probe->size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t j = 0; j < other.size(); ++j) {
      if (!naive_detail::qualifies(spec, i, j)) continue;
      best = std::max(best, score(spec.probe->row(i), other.row(j), spec.scale));
      found = true;
    }
    if (!found)
      fail(ErrorKind::empty_comparison,
           "probe " + spec.probe->describe_row(i) + " has no qualifying non-mated partner");
    nearest[i] = best;
  }
  return nearest;
}

inline FarCurve nn_far_curve_naive(const ComparisonSpec& spec, const ThresholdGrid& grid) {
  auto nearest = nearest_neighbour_scores_naive(spec);
  std::sort(nearest.begin(), nearest.end());
  auto counts = naive_detail::count_at_least(nearest, grid);
  auto rates = metrics_detail::rates(counts, nearest.size());
  return FarCurve{grid, std::move(counts), nearest.size(), std::move(rates)};
}

inline FrrCurve frr_curve_naive(const ComparisonSpec& spec, const ThresholdGrid& grid) {
  metrics_detail::require_mated(spec, "frr_curve_naive");
  const auto scores = naive_detail::all_scores(spec);
  if (scores.empty()) fail(ErrorKind::empty_comparison, "no mated pairs in '" + spec.probe->name() + "'");
  std::vector<std::uint64_t> counts(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t)
    counts[t] = static_cast<std::uint64_t>(std::lower_bound(scores.begin(), scores.end(), grid[t]) - scores.begin());
  auto rates = metrics_detail::rates(counts, scores.size());
  return FrrCurve{grid, std::move(counts), scores.size(), std::move(rates)};
}

}  // namespace idem
