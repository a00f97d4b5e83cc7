#pragma once

// Identity statistics over embedding sets: FAR / nearest-neighbour FAR / FRR
// curves, thresholds at a target FAR, ROC, and mode-collapse arithmetic.
//
// Conventions: a non-mated pair is accepted at threshold t when score >= t;
// a mated pair is rejected when score < t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idem/embeddings.hpp"
#include "idem/error.hpp"
#include "idem/pair_engine.hpp"

namespace idem {

/// Strictly increasing, finite list of at least two thresholds.
class ThresholdGrid {
 public:
  explicit ThresholdGrid(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) fail(ErrorKind::invalid_argument, "threshold grid needs at least 2 entries");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) fail(ErrorKind::invalid_argument, "threshold grid entries must be finite");
      if (i > 0 && !(values_[i] > values_[i - 1]))
        fail(ErrorKind::invalid_argument, "threshold grid must be strictly increasing at index " + std::to_string(i));
    }
  }

  /// `points` evenly spaced values from lo to hi inclusive.
  static ThresholdGrid uniform(double lo, double hi, std::size_t points) {
    if (points < 2) fail(ErrorKind::invalid_argument, "threshold grid needs at least 2 points");
    if (!(hi > lo)) fail(ErrorKind::invalid_argument, "threshold grid requires max > min");
    std::vector<double> v(points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) v[i] = lo + step * static_cast<double>(i);
    v.back() = hi;
    // rounding can only produce duplicates when the range is a few ulps wide
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return ThresholdGrid(std::move(v));
  }

  /// Affine image a*t+b of every threshold (a > 0).
  ThresholdGrid rescaled(const ScoreScale& scale) const {
    std::vector<double> v(values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale.apply(values_[i]);
    return ThresholdGrid(std::move(v));
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

inline constexpr std::size_t kDefaultGridPoints = 512;

struct FarCurve {
  ThresholdGrid grid;
  std::vector<std::uint64_t> counts;  // comparisons (or probes) with score >= threshold
  std::uint64_t total = 0;
  std::vector<double> far;
};

struct FrrCurve {
  ThresholdGrid grid;
  std::vector<std::uint64_t> counts;  // mated comparisons with score < threshold
  std::uint64_t total = 0;
  std::vector<double> frr;
};

struct RocPoint {
  double far = 0.0;
  double frr = 0.0;
};

struct RocCurve {
  ThresholdGrid grid;
  std::vector<RocPoint> points;
};

namespace metrics_detail {

inline std::vector<double> rates(const std::vector<std::uint64_t>& counts, std::uint64_t total) {
  std::vector<double> r(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    r[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return r;
}

inline void require_nonmated(const ComparisonSpec& spec, const char* op) {
  if (!spec.is_nonmated())
    fail(ErrorKind::invalid_argument, std::string(op) + " requires a non-mated comparison (within-set or between-sets)");
}

inline void require_mated(const ComparisonSpec& spec, const char* op) {
  if (spec.is_nonmated()) fail(ErrorKind::invalid_argument, std::string(op) + " requires a within-set mated comparison");
}

inline void require_pairs(std::uint64_t total, const ComparisonSpec& spec) {
  if (total == 0)
    fail(ErrorKind::empty_comparison,
         std::string("empty comparison set: no qualifying ") + to_string(spec.mode) + " pairs in '" +
             spec.probe->name() + "'");
}

/// Index of the first probe without partners, if any.
inline std::optional<std::size_t> orphan_probe(const std::vector<std::uint64_t>& partners) {
  for (std::size_t i = 0; i < partners.size(); ++i)
    if (partners[i] == 0) return i;
  return std::nullopt;
}

inline FarCurve nn_curve_from_maxima(const ThresholdGrid& grid, const std::vector<double>& nearest) {
  std::vector<double> sorted = nearest;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint64_t> counts(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), grid[t]) - sorted.begin();
    counts[t] = sorted.size() - static_cast<std::uint64_t>(below);
  }
  const std::uint64_t total = sorted.size();
  return FarCurve{grid, counts, total, rates(counts, total)};
}

}  // namespace metrics_detail

/// All-pairs false acceptance rate across the grid.
inline FarCurve far_curve(const ComparisonSpec& spec, const ThresholdGrid& grid, const EngineOptions& options = {}) {
  metrics_detail::require_nonmated(spec, "far_curve");
  const auto result = sweep(spec, {.thresholds = grid.values()}, options);
  metrics_detail::require_pairs(result.total, spec);
  return FarCurve{grid, result.at_least, result.total, metrics_detail::rates(result.at_least, result.total)};
}

/// Per-probe nearest-neighbour score against every qualifying partner.
/// Errors name the first probe that has no qualifying partner.
inline std::vector<double> nearest_neighbour_scores(const ComparisonSpec& spec, const EngineOptions& options = {}) {
  metrics_detail::require_nonmated(spec, "nearest_neighbour_scores");
  const auto result = sweep(spec, {.nearest_neighbour = true}, options);
  if (auto orphan = metrics_detail::orphan_probe(result.partners))
    fail(ErrorKind::empty_comparison,
         "probe " + spec.probe->describe_row(*orphan) + " has no qualifying non-mated partner");
  return result.nearest;
}

/// Fraction of probes whose nearest qualifying partner scores >= threshold.
inline FarCurve nn_far_curve(const ComparisonSpec& spec, const ThresholdGrid& grid, const EngineOptions& options = {}) {
  return metrics_detail::nn_curve_from_maxima(grid, nearest_neighbour_scores(spec, options));
}

inline FrrCurve frr_curve(const ComparisonSpec& spec, const ThresholdGrid& grid, const EngineOptions& options = {}) {
  metrics_detail::require_mated(spec, "frr_curve");
  const auto result = sweep(spec, {.thresholds = grid.values()}, options);
  if (result.total == 0)
    fail(ErrorKind::empty_comparison, "no mated pairs in '" + spec.probe->name() + "' (every identity has one row)");
  std::vector<std::uint64_t> counts(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) counts[t] = result.total - result.at_least[t];
  return FrrCurve{grid, counts, result.total, metrics_detail::rates(counts, result.total)};
}

/// Minimum and maximum score over the qualifying pairs of `spec`.
inline std::pair<double, double> observed_score_range(const ComparisonSpec& spec, const EngineOptions& options = {}) {
  const auto result = sweep(spec, {}, options);
  metrics_detail::require_pairs(result.total, spec);
  return {result.min_score, result.max_score};
}

/// Uniform grid over [lo, hi]; widened to two points when every score is equal.
inline ThresholdGrid grid_over_range(double lo, double hi, std::size_t points = kDefaultGridPoints) {
  if (!(hi > lo)) return ThresholdGrid({lo, std::nextafter(lo, std::numeric_limits<double>::infinity())});
  return ThresholdGrid::uniform(lo, hi, points);
}

/// Default grid: `points` thresholds spanning the observed scores of every spec.
inline ThresholdGrid default_grid(std::span<const ComparisonSpec> specs, std::size_t points = kDefaultGridPoints,
                                  const EngineOptions& options = {}) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& spec : specs) {
    const auto [a, b] = observed_score_range(spec, options);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return grid_over_range(lo, hi, points);
}

/// The `count` highest-scoring pairs of `spec`, extended by every pair tied with
/// the last one, in descending score order. Requires 1 <= count <= total.
///
/// Two passes locate a score bracket with a 4096-point histogram before the
/// qualifying pairs are collected, so memory scales with `count` rather than
/// with the number of pairs.
inline std::vector<ScoredPair> top_pairs(const ComparisonSpec& spec, std::uint64_t count,
                                         const EngineOptions& options = {}) {
  const auto range = sweep(spec, {}, options);
  metrics_detail::require_pairs(range.total, spec);
  if (count == 0 || count > range.total)
    fail(ErrorKind::invalid_argument, "top_pairs: count must be in [1, " + std::to_string(range.total) + "]");

  double floor = range.min_score;
  if (range.max_score > range.min_score) {
    const auto grid = grid_over_range(range.min_score, range.max_score, 4096);
    const auto hist = sweep(spec, {.thresholds = grid.values()}, options);
    // largest threshold still admitting at least `count` pairs
    for (std::size_t t = grid.size(); t-- > 0;) {
      if (hist.at_least[t] >= count) {
        floor = grid[t];
        break;
      }
    }
  }
  auto collected = sweep(spec, {.collect_at_least = floor}, options).collected;
  const double cutoff = collected[count - 1].score;
  auto end = std::find_if(collected.begin() + static_cast<std::ptrdiff_t>(count), collected.end(),
                          [cutoff](const ScoredPair& p) { return p.score < cutoff; });
  collected.erase(end, collected.end());
  return collected;
}

/// Number of non-mated pairs allowed above threshold for FAR <= target.
inline std::uint64_t allowed_false_accepts(double target, std::uint64_t total) {
  auto allowed = static_cast<std::uint64_t>(std::floor(target * static_cast<double>(total)));
  allowed = std::min(allowed, total);
  while (allowed < total && static_cast<double>(allowed + 1) / static_cast<double>(total) <= target) ++allowed;
  while (allowed > 0 && static_cast<double>(allowed) / static_cast<double>(total) > target) --allowed;
  return allowed;
}

/// Smallest observed non-mated score t (or max score + 1 ulp) with FAR(t) <= target.
///
/// Errors with ErrorKind::resolution when target * total < 1: no threshold can
/// then be told apart from "accept nothing".
inline double threshold_for_far(const ComparisonSpec& spec, double target, const EngineOptions& options = {}) {
  metrics_detail::require_nonmated(spec, "threshold_for_far");
  if (!(target > 0.0) || !(target <= 1.0))
    fail(ErrorKind::invalid_argument, "target FAR must be in (0, 1], got " + std::to_string(target));
  const auto range = sweep(spec, {}, options);
  metrics_detail::require_pairs(range.total, spec);
  if (target * static_cast<double>(range.total) < 1.0)
    fail(ErrorKind::resolution, "target below resolution: FAR " + std::to_string(target) + " needs at least " +
                                    std::to_string(static_cast<std::uint64_t>(std::ceil(1.0 / target))) +
                                    " non-mated pairs, have " + std::to_string(range.total));
  const std::uint64_t allowed = allowed_false_accepts(target, range.total);
  if (allowed >= range.total) return range.min_score;

  // The (allowed+1)-th highest score must be rejected; t is the smallest observed score above it.
  const auto top = top_pairs(spec, allowed + 1, options);
  const double rejected = top[allowed].score;
  double t = std::nextafter(range.max_score, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < allowed && top[k].score > rejected; ++k) t = top[k].score;
  return t;
}

/// Fraction of qualifying non-mated pairs with score >= t.
inline double far_at_threshold(const ComparisonSpec& spec, double t, const EngineOptions& options = {}) {
  metrics_detail::require_nonmated(spec, "far_at_threshold");
  const double th[] = {t};
  const auto result = sweep(spec, {.thresholds = th}, options);
  metrics_detail::require_pairs(result.total, spec);
  return static_cast<double>(result.at_least[0]) / static_cast<double>(result.total);
}

/// Fraction of mated pairs with score < t.
inline double frr_at_threshold(const ComparisonSpec& spec, double t, const EngineOptions& options = {}) {
  metrics_detail::require_mated(spec, "frr_at_threshold");
  const double th[] = {t};
  const auto result = sweep(spec, {.thresholds = th}, options);
  if (result.total == 0)
    fail(ErrorKind::empty_comparison, "no mated pairs in '" + spec.probe->name() + "' (every identity has one row)");
  return static_cast<double>(result.total - result.at_least[0]) / static_cast<double>(result.total);
}

struct FrrAtFar {
  double threshold = 0.0;
  double frr = 0.0;
};

inline FrrAtFar frr_at_far(const ComparisonSpec& mated, const ComparisonSpec& nonmated, double target_far,
                           const EngineOptions& options = {}) {
  metrics_detail::require_mated(mated, "frr_at_far");
  const double t = threshold_for_far(nonmated, target_far, options);
  return {t, frr_at_threshold(mated, t, options)};
}

inline RocCurve roc_curve(const ComparisonSpec& mated, const ComparisonSpec& nonmated, const ThresholdGrid& grid,
                          const EngineOptions& options = {}) {
  const auto far = far_curve(nonmated, grid, options);
  const auto frr = frr_curve(mated, grid, options);
  RocCurve roc{grid, {}};
  roc.points.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) roc.points.push_back({far.far[i], frr.frr[i]});
  return roc;
}

/// Number of identities a matcher can tell apart at a given FAR: 1 / far.
inline double distinguishable_identities(double far) {
  if (!(far > 0.0)) fail(ErrorKind::invalid_argument, "distinguishable_identities requires far > 0");
  return 1.0 / far;
}

/// Share of the real identity space covered by the synthetic one: far_real / far_fake.
inline double mode_collapse_fraction(double far_real, double far_fake) {
  if (!(far_real > 0.0) || !(far_fake > 0.0))
    fail(ErrorKind::invalid_argument, "mode_collapse_fraction requires positive FAR values");
  return far_real / far_fake;
}

/// Standard deviation of the difference of two independent binomial rates.
inline double binomial_sigma(std::uint64_t count_a, std::uint64_t total_a, std::uint64_t count_b,
                             std::uint64_t total_b) {
  const double pa = static_cast<double>(count_a) / static_cast<double>(total_a);
  const double pb = static_cast<double>(count_b) / static_cast<double>(total_b);
  return std::sqrt(pa * (1.0 - pa) / static_cast<double>(total_a) + pb * (1.0 - pb) / static_cast<double>(total_b));
}

inline constexpr double kBandSigmas = 3.0;

/// |rate_a - rate_b| within `sigmas` binomial standard deviations.
inline bool within_binomial_band(std::uint64_t count_a, std::uint64_t total_a, std::uint64_t count_b,
                                 std::uint64_t total_b, double sigmas = kBandSigmas) {
  const double diff = static_cast<double>(count_a) / static_cast<double>(total_a) -
                      static_cast<double>(count_b) / static_cast<double>(total_b);
  return std::abs(diff) <= sigmas * binomial_sigma(count_a, total_a, count_b, total_b);
}

/// rate_a exceeds rate_b by more than `sigmas` binomial standard deviations.
inline bool significant_excess(std::uint64_t count_a, std::uint64_t total_a, std::uint64_t count_b,
                               std::uint64_t total_b, double sigmas = kBandSigmas) {
  const double diff = static_cast<double>(count_a) / static_cast<double>(total_a) -
                      static_cast<double>(count_b) / static_cast<double>(total_b);
  return diff > sigmas * binomial_sigma(count_a, total_a, count_b, total_b);
}

/// Per-threshold flags where `candidate` significantly exceeds `reference`.
inline std::vector<bool> excess_flags(const FarCurve& candidate, const FarCurve& reference,
                                      double sigmas = kBandSigmas) {
  std::vector<bool> flags(candidate.grid.size());
  for (std::size_t i = 0; i < flags.size(); ++i)
    flags[i] = significant_excess(candidate.counts[i], candidate.total, reference.counts[i], reference.total, sigmas);
  return flags;
}

/// Shortest run of consecutive flagged thresholds that counts as a finding,
/// as a fraction of the grid. Isolated flags are expected by chance: the
/// curves are tested at hundreds of correlated points.
inline constexpr double kMinFlagRunFraction = 0.01;

inline std::size_t min_flag_run(std::size_t grid_points) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kMinFlagRunFraction * static_cast<double>(grid_points))));
}

inline std::size_t longest_flag_run(const std::vector<bool>& flags) {
  std::size_t best = 0, run = 0;
  for (bool f : flags) {
    run = f ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

inline bool sustained_excess(const std::vector<bool>& flags) {
  return !flags.empty() && longest_flag_run(flags) >= min_flag_run(flags.size());
}

/// Real-vs-Real, Fake-vs-Real and Fake-vs-Fake FAR curves (all pairs and
/// nearest neighbour) with per-threshold overfitting and collapse flags.
struct OverfitReport {
  FarCurve real_vs_real;
  FarCurve fake_vs_real;
  FarCurve fake_vs_fake;
  FarCurve nn_real_vs_real;
  FarCurve nn_fake_vs_real;
  FarCurve nn_fake_vs_fake;
  /// Fake-vs-Real exceeds Real-vs-Real.
  std::vector<bool> overfit_flags;
  std::vector<bool> nn_overfit_flags;
  /// Fake-vs-Fake exceeds Real-vs-Real.
  std::vector<bool> collapse_flags;
  std::vector<bool> nn_collapse_flags;
  /// false when the fake set was unlabeled and Fake-vs-Fake used all pairs.
  bool fake_vs_fake_nonmated_only = false;

  const ThresholdGrid& grid() const noexcept { return real_vs_real.grid; }
  /// Report-level verdicts need a sustained excess (see sustained_excess).
  bool overfitting() const { return sustained_excess(overfit_flags) || sustained_excess(nn_overfit_flags); }
  bool collapse() const { return sustained_excess(collapse_flags) || sustained_excess(nn_collapse_flags); }
};

/// Builds the overfitting report. Without `grid`, 512 points span the scores
/// observed across the three comparisons.
inline OverfitReport overfit_report(const EmbeddingSet& real, const EmbeddingSet& fake,
                                    std::optional<ThresholdGrid> grid = std::nullopt, ScoreScale scale = {},
                                    const EngineOptions& options = {}) {
  if (!real.has_labels())
    fail(ErrorKind::invalid_argument, "labels required: the real set '" + real.name() + "' must be labeled");
  const auto rr = ComparisonSpec::within_nonmated(real, scale);
  const auto fr = ComparisonSpec::between(fake, real, scale);
  const auto ff = ComparisonSpec::within_any(fake, scale);
  const ComparisonSpec all[] = {rr, fr, ff};
  for (const auto& spec : all) spec.validate();

  if (!grid) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& spec : all) {
      const auto [a, b] = observed_score_range(spec, options);
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
    grid = grid_over_range(lo, hi, kDefaultGridPoints);
  }
  // one sweep per comparison yields both the grid histogram and the NN maxima
  auto curves = [&](const ComparisonSpec& spec) {
    const auto result = sweep(spec, {.thresholds = grid->values(), .nearest_neighbour = true}, options);
    metrics_detail::require_pairs(result.total, spec);
    if (auto orphan = metrics_detail::orphan_probe(result.partners))
      fail(ErrorKind::empty_comparison,
           "probe " + spec.probe->describe_row(*orphan) + " has no qualifying non-mated partner");
    FarCurve all_pairs{*grid, result.at_least, result.total, metrics_detail::rates(result.at_least, result.total)};
    return std::pair{all_pairs, metrics_detail::nn_curve_from_maxima(*grid, result.nearest)};
  };
  auto [rr_all, rr_nn] = curves(rr);
  auto [fr_all, fr_nn] = curves(fr);
  auto [ff_all, ff_nn] = curves(ff);

  OverfitReport report{rr_all, fr_all, ff_all, rr_nn, fr_nn, ff_nn, {}, {}, {}, {}, fake.has_labels()};
  report.overfit_flags = excess_flags(report.fake_vs_real, report.real_vs_real);
  report.nn_overfit_flags = excess_flags(report.nn_fake_vs_real, report.nn_real_vs_real);
  report.collapse_flags = excess_flags(report.fake_vs_fake, report.real_vs_real);
  report.nn_collapse_flags = excess_flags(report.nn_fake_vs_fake, report.nn_real_vs_real);
  return report;
}

}  // namespace idem
