#pragma once

// Blocked, multi-threaded sweep over the pair space of a comparison.
//
// The pair space is cut into rectangular tiles of `block_size` rows by
// `block_size` columns. Workers pull tiles from a shared counter and keep a
// private state (threshold histogram, per-probe maxima, collected pairs).
// States are merged by integer addition / max / sorted concatenation, so the
// result does not depend on worker count, block size or scheduling.

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "idem/embeddings.hpp"
#include "idem/error.hpp"

namespace idem {

enum class ComparisonMode { within_set_nonmated, between_sets, within_set_mated };

inline const char* to_string(ComparisonMode mode) {
  switch (mode) {
    case ComparisonMode::within_set_nonmated: return "within_set_nonmated";
    case ComparisonMode::between_sets: return "between_sets";
    case ComparisonMode::within_set_mated: return "within_set_mated";
  }
  return "unknown";
}

/// What to compare. Holds non-owning pointers; the sets must outlive the spec.
struct ComparisonSpec {
  ComparisonMode mode = ComparisonMode::within_set_nonmated;
  const EmbeddingSet* probe = nullptr;
  const EmbeddingSet* gallery = nullptr;
  ScoreScale scale{};
  /// within_set_nonmated only: an unlabeled probe set counts every pair as non-mated.
  bool unlabeled_all_nonmated = false;

  static ComparisonSpec within_nonmated(const EmbeddingSet& set, ScoreScale scale = {}) {
    return {ComparisonMode::within_set_nonmated, &set, nullptr, scale, false};
  }
  /// Non-mated pairs when `set` is labeled, all pairs otherwise.
  static ComparisonSpec within_any(const EmbeddingSet& set, ScoreScale scale = {}) {
    return {ComparisonMode::within_set_nonmated, &set, nullptr, scale, true};
  }
  static ComparisonSpec between(const EmbeddingSet& probe, const EmbeddingSet& gallery, ScoreScale scale = {}) {
    return {ComparisonMode::between_sets, &probe, &gallery, scale, false};
  }
  static ComparisonSpec within_mated(const EmbeddingSet& set, ScoreScale scale = {}) {
    return {ComparisonMode::within_set_mated, &set, nullptr, scale, false};
  }

  bool is_nonmated() const noexcept { return mode != ComparisonMode::within_set_mated; }

  /// Checks preconditions shared by every metric.
  void validate() const {
    if (probe == nullptr) fail(ErrorKind::invalid_argument, "comparison has no probe set");
    scale.validate();
    if (!probe->normalized())
      fail(ErrorKind::invalid_argument, "probe set '" + probe->name() + "' is not normalized");
    switch (mode) {
      case ComparisonMode::between_sets:
        if (gallery == nullptr) fail(ErrorKind::invalid_argument, "between_sets comparison requires a gallery set");
        if (!gallery->normalized())
          fail(ErrorKind::invalid_argument, "gallery set '" + gallery->name() + "' is not normalized");
        if (gallery->dim() != probe->dim())
          fail(ErrorKind::invalid_argument, "probe and gallery dimensions differ: " + std::to_string(probe->dim()) +
                                                " vs " + std::to_string(gallery->dim()));
        break;
      case ComparisonMode::within_set_nonmated:
        if (!probe->has_labels() && !unlabeled_all_nonmated)
          fail(ErrorKind::invalid_argument, "labels required for within-set comparison of '" + probe->name() + "'");
        break;
      case ComparisonMode::within_set_mated:
        if (!probe->has_labels())
          fail(ErrorKind::invalid_argument, "labels required for mated comparison of '" + probe->name() + "'");
        break;
    }
  }

  bool labeled_within() const noexcept { return probe->has_labels(); }

  /// Closed-form count of qualifying pairs.
  std::uint64_t expected_total() const {
    const std::uint64_t n = probe->size();
    if (mode == ComparisonMode::between_sets) return n * gallery->size();
    std::uint64_t mated = 0;
    if (probe->has_labels()) {
      std::vector<std::uint64_t> per_label(probe->identity_count(), 0);
      for (auto id : probe->label_ids()) ++per_label[id];
      for (auto c : per_label) mated += c * (c - 1) / 2;
    }
    if (mode == ComparisonMode::within_set_mated) return mated;
    return n * (n - 1) / 2 - mated;
  }
};

struct EngineOptions {
  /// 0 selects std::thread::hardware_concurrency().
  std::size_t workers = 0;
  std::size_t block_size = 256;

  std::size_t resolved_workers() const {
    if (workers != 0) return workers;
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
};

/// A pair and its score. `probe` indexes the probe set; `partner` indexes the
/// gallery (between_sets) or the probe set itself (within-set, probe < partner).
struct ScoredPair {
  double score = 0.0;
  std::uint32_t probe = 0;
  std::uint32_t partner = 0;

  /// Descending score, then ascending indices.
  friend bool operator<(const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.probe != b.probe) return a.probe < b.probe;
    return a.partner < b.partner;
  }
  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

struct SweepRequest {
  /// Sorted ascending; for each entry the sweep counts pairs with score >= entry.
  std::span<const double> thresholds{};
  /// Track the per-probe maximum score over qualifying partners.
  bool nearest_neighbour = false;
  /// Collect every pair with score >= this value.
  std::optional<double> collect_at_least{};
};

struct SweepResult {
  std::vector<std::uint64_t> at_least;  // one per threshold
  std::uint64_t total = 0;
  double min_score = std::numeric_limits<double>::infinity();
  double max_score = -std::numeric_limits<double>::infinity();
  std::vector<double> nearest;            // per probe; -inf without partners
  std::vector<std::uint64_t> partners;    // per probe qualifying partner count
  std::vector<ScoredPair> collected;      // sorted
};

namespace engine_detail {

struct WorkerState {
  std::vector<std::uint64_t> histogram;  // bin k = number of thresholds <= score
  std::uint64_t total = 0;
  double min_score = std::numeric_limits<double>::infinity();
  double max_score = -std::numeric_limits<double>::infinity();
  std::vector<double> nearest;
  std::vector<std::uint64_t> partners;
  std::vector<ScoredPair> collected;
};

struct Tile {
  std::size_t row_begin, row_end, col_begin, col_end;
  bool diagonal;
};

class Sweeper {
 public:
  Sweeper(const ComparisonSpec& spec, const SweepRequest& request)
      : spec_(spec),
        request_(request),
        probe_(*spec.probe),
        gallery_(spec.mode == ComparisonMode::between_sets ? *spec.gallery : *spec.probe),
        labels_(probe_.label_ids()),
        use_labels_(spec.mode != ComparisonMode::between_sets && probe_.has_labels()),
        mated_(spec.mode == ComparisonMode::within_set_mated),
        symmetric_(spec.mode != ComparisonMode::between_sets) {
    // Near-uniform grids get an arithmetic first guess for the bin, corrected
    // exactly against the neighbouring thresholds in bin_of().
    const auto th = request_.thresholds;
    if (th.size() >= 2 && th.back() > th.front()) {
      const double step = (th.back() - th.front()) / static_cast<double>(th.size() - 1);
      bool near_uniform = true;
      for (std::size_t k = 0; k < th.size() && near_uniform; ++k)
        near_uniform = std::abs(th[k] - (th.front() + static_cast<double>(k) * step)) <= step;
      if (near_uniform) inv_step_ = 1.0 / step;
    }
  }

  /// Number of thresholds <= s.
  std::size_t bin_of(double s) const {
    const auto th = request_.thresholds;
    if (inv_step_ == 0.0) return static_cast<std::size_t>(std::upper_bound(th.begin(), th.end(), s) - th.begin());
    const double n = static_cast<double>(th.size());
    double g = std::floor((s - th.front()) * inv_step_) + 1.0;
    if (!(g >= 0.0)) g = 0.0;
    if (g > n) g = n;
    auto bin = static_cast<std::size_t>(g);
    while (bin > 0 && th[bin - 1] > s) --bin;
    while (bin < th.size() && th[bin] <= s) ++bin;
    return bin;
  }

  WorkerState make_state() const {
    WorkerState st;
    st.histogram.assign(request_.thresholds.size() + 1, 0);
    if (request_.nearest_neighbour) {
      st.nearest.assign(probe_.size(), -std::numeric_limits<double>::infinity());
      st.partners.assign(probe_.size(), 0);
    }
    return st;
  }

  void visit(WorkerState& st, std::size_t i, std::size_t j) const {
    const double s = spec_.scale.apply(dot(probe_.row(i), gallery_.row(j)));
    ++st.histogram[bin_of(s)];
    ++st.total;
    st.min_score = std::min(st.min_score, s);
    st.max_score = std::max(st.max_score, s);
    if (request_.nearest_neighbour) {
      st.nearest[i] = std::max(st.nearest[i], s);
      ++st.partners[i];
      if (symmetric_) {
        st.nearest[j] = std::max(st.nearest[j], s);
        ++st.partners[j];
      }
    }
    if (request_.collect_at_least && s >= *request_.collect_at_least)
      st.collected.push_back({s, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  }

  void run_tile(WorkerState& st, const Tile& t) const {
    for (std::size_t i = t.row_begin; i < t.row_end; ++i) {
      const std::size_t j0 = t.diagonal ? i + 1 : t.col_begin;
      for (std::size_t j = j0; j < t.col_end; ++j) {
        if (use_labels_ && ((labels_[i] == labels_[j]) != mated_)) continue;
        visit(st, i, j);
      }
    }
  }

  void run_group(WorkerState& st, std::span<const std::uint32_t> rows) const {
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) visit(st, rows[a], rows[b]);
  }

 private:
  const ComparisonSpec& spec_;
  const SweepRequest& request_;
  const EmbeddingSet& probe_;
  const EmbeddingSet& gallery_;
  std::span<const std::uint32_t> labels_;
  bool use_labels_;
  bool mated_;
  bool symmetric_;
  double inv_step_ = 0.0;
};

inline std::vector<Tile> make_tiles(const ComparisonSpec& spec, std::size_t block) {
  std::vector<Tile> tiles;
  const std::size_t rows = spec.probe->size();
  if (spec.mode == ComparisonMode::between_sets) {
    const std::size_t cols = spec.gallery->size();
    for (std::size_t r = 0; r < rows; r += block)
      for (std::size_t c = 0; c < cols; c += block)
        tiles.push_back({r, std::min(r + block, rows), c, std::min(c + block, cols), false});
  } else {
    for (std::size_t r = 0; r < rows; r += block)
      for (std::size_t c = r; c < rows; c += block)
        tiles.push_back({r, std::min(r + block, rows), c, std::min(c + block, rows), c == r});
  }
  return tiles;
}

/// Rows of each label with at least two members.
inline std::vector<std::vector<std::uint32_t>> mated_groups(const EmbeddingSet& set) {
  std::vector<std::vector<std::uint32_t>> groups(set.identity_count());
  const auto ids = set.label_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(static_cast<std::uint32_t>(i));
  std::erase_if(groups, [](const auto& g) { return g.size() < 2; });
  return groups;
}

inline void merge_into(WorkerState& into, WorkerState&& from) {
  for (std::size_t k = 0; k < into.histogram.size(); ++k) into.histogram[k] += from.histogram[k];
  into.total += from.total;
  into.min_score = std::min(into.min_score, from.min_score);
  into.max_score = std::max(into.max_score, from.max_score);
  for (std::size_t i = 0; i < into.nearest.size(); ++i) {
    into.nearest[i] = std::max(into.nearest[i], from.nearest[i]);
    into.partners[i] += from.partners[i];
  }
  into.collected.insert(into.collected.end(), from.collected.begin(), from.collected.end());
}

}  // namespace engine_detail

/// Runs one pass over the qualifying pairs of `spec`.
inline SweepResult sweep(const ComparisonSpec& spec, const SweepRequest& request, const EngineOptions& options = {}) {
  using namespace engine_detail;
  spec.validate();
  if (!std::is_sorted(request.thresholds.begin(), request.thresholds.end()))
    fail(ErrorKind::invalid_argument, "sweep thresholds must be sorted ascending");
  if (options.block_size == 0) fail(ErrorKind::invalid_argument, "block size must be positive");

  const Sweeper sweeper(spec, request);
  const bool grouped = spec.mode == ComparisonMode::within_set_mated;
  const auto groups = grouped ? mated_groups(*spec.probe) : std::vector<std::vector<std::uint32_t>>{};
  const auto tiles = grouped ? std::vector<Tile>{} : make_tiles(spec, options.block_size);
  const std::size_t items = grouped ? groups.size() : tiles.size();

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.resolved_workers(), items));
  std::vector<WorkerState> states;
  states.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) states.push_back(sweeper.make_state());

  std::atomic<std::size_t> next{0};
  auto work = [&](WorkerState& st) {
    for (std::size_t k = next.fetch_add(1, std::memory_order_relaxed); k < items;
         k = next.fetch_add(1, std::memory_order_relaxed)) {
      if (grouped)
        sweeper.run_group(st, groups[k]);
      else
        sweeper.run_tile(st, tiles[k]);
    }
  };
  if (workers == 1) {
    work(states[0]);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back([&, w] { work(states[w]); });
  }

  WorkerState merged = std::move(states[0]);
  for (std::size_t w = 1; w < workers; ++w) merge_into(merged, std::move(states[w]));

  SweepResult result;
  result.total = merged.total;
  result.min_score = merged.min_score;
  result.max_score = merged.max_score;
  result.at_least.assign(request.thresholds.size(), 0);
  // at_least[t] = sum of bins k > t
  std::uint64_t running = 0;
  for (std::size_t t = request.thresholds.size(); t-- > 0;) {
    running += merged.histogram[t + 1];
    result.at_least[t] = running;
  }
  result.nearest = std::move(merged.nearest);
  result.partners = std::move(merged.partners);
  result.collected = std::move(merged.collected);
  std::sort(result.collected.begin(), result.collected.end());
  return result;
}

}  // namespace idem
