#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "idem/error.hpp"
#include "idem/metrics.hpp"
#include "idem/pair_engine.hpp"

namespace idem::gan {

/// Cross-identity pairs of a real set whose scores lie in the top quantile.
struct HardNegativePool {
  std::vector<ScoredPair> pairs;  // descending score
  double cutoff = 0.0;            // every stored score is >= cutoff
  std::uint64_t candidates = 0;   // cross-label pairs considered

  bool empty() const noexcept { return pairs.empty(); }
  std::size_t size() const noexcept { return pairs.size(); }
};

/// Keeps the ceil(quantile * total) highest-scoring cross-label pairs, plus ties
/// at the cutoff.
inline HardNegativePool build_negative_pool(const EmbeddingSet& real, double quantile,
                                            const EngineOptions& options = {}) {
  if (!(quantile > 0.0 && quantile < 1.0)) fail(ErrorKind::invalid_argument, "pool quantile must be in (0, 1)");
  if (!real.has_labels()) fail(ErrorKind::invalid_argument, "labels required to build a negative pool");
  if (real.identity_count() < 2) fail(ErrorKind::invalid_argument, "negative pool needs at least 2 identities");
  const auto spec = ComparisonSpec::within_nonmated(real);
  const std::uint64_t total = spec.expected_total();
  if (total == 0) fail(ErrorKind::empty_comparison, "no cross-label pairs");
  const auto keep = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::ceil(quantile * static_cast<double>(total))));
  HardNegativePool pool;
  pool.pairs = top_pairs(spec, std::min(keep, total), options);
  pool.cutoff = pool.pairs.back().score;
  pool.candidates = total;
  if (pool.pairs.empty()) fail(ErrorKind::empty_comparison, "negative pool retained no pairs");
  return pool;
}

}  // namespace idem::gan
