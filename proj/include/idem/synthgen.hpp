#pragma once

// Ground-truth synthetic embedding worlds: identity clouds on the unit sphere
// and fake sets with injected memorization or mode collapse.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "idem/embeddings.hpp"
#include "idem/error.hpp"

namespace idem {

struct MixtureSpec {
  std::size_t identities = 1000;
  std::size_t per_identity = 10;
  std::size_t dim = 64;
  double within_sigma = 0.1;
  std::uint64_t seed = 0;
};

struct PathologySpec {
  /// Fraction of fake rows copied from random real rows.
  double memorize_fraction = 0.0;
  /// Per-coordinate Gaussian noise added to copied rows before renormalizing.
  double perturb_eps = 0.0;
  /// Non-memorized rows collapse onto this many fresh centers.
  std::optional<std::size_t> collapse_k{};
  /// Per-coordinate spread around collapse centers.
  double collapse_sigma = 0.02;

  void validate() const {
    if (!(memorize_fraction >= 0.0 && memorize_fraction <= 1.0))
      fail(ErrorKind::invalid_argument, "memorize_fraction must be in [0, 1]");
    if (!(perturb_eps >= 0.0) || !std::isfinite(perturb_eps))
      fail(ErrorKind::invalid_argument, "perturb_eps must be finite and >= 0");
    if (collapse_k && *collapse_k == 0) fail(ErrorKind::invalid_argument, "collapse_k must be positive");
    if (!(collapse_sigma >= 0.0) || !std::isfinite(collapse_sigma))
      fail(ErrorKind::invalid_argument, "collapse_sigma must be finite and >= 0");
  }
};

namespace synth_detail {

inline void normalize_in_place(std::span<double> v) {
  const double norm = std::sqrt(dot(v, v));
  if (norm == 0.0) fail(ErrorKind::invalid_argument, "generated a zero vector");
  for (double& x : v) x /= norm;
}

/// Uniform direction on the unit sphere.
inline void random_direction(std::span<double> out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  do {
    for (double& x : out) x = normal(rng);
  } while (dot(out, out) == 0.0);
  normalize_in_place(out);
}

/// center + N(0, sigma^2 I), renormalized. sigma = 0 copies the (unit) center exactly.
inline void around(std::span<const double> center, double sigma, std::span<double> out, std::mt19937_64& rng) {
  if (sigma == 0.0) {
    std::copy(center.begin(), center.end(), out.begin());
    return;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = center[k] + sigma * normal(rng);
  normalize_in_place(out);
}

}  // namespace synth_detail

/// K identity centers uniform on the sphere, m noisy unit rows around each,
/// labeled "id<k>". Rows are grouped by identity.
inline EmbeddingSet gen_identity_clouds(const MixtureSpec& spec, std::string name = "clouds") {
  if (spec.identities < 2) fail(ErrorKind::invalid_argument, "mixture needs at least 2 identities");
  if (spec.per_identity < 1) fail(ErrorKind::invalid_argument, "mixture needs at least 1 row per identity");
  if (spec.dim < 2) fail(ErrorKind::invalid_argument, "mixture dim must be >= 2");
  if (!(spec.within_sigma >= 0.0) || !std::isfinite(spec.within_sigma))
    fail(ErrorKind::invalid_argument, "within_sigma must be finite and >= 0");

  std::mt19937_64 rng(spec.seed);
  const std::size_t rows = spec.identities * spec.per_identity;
  std::vector<double> values(rows * spec.dim);
  std::vector<std::string> labels;
  labels.reserve(rows);
  std::vector<double> center(spec.dim);
  for (std::size_t k = 0; k < spec.identities; ++k) {
    synth_detail::random_direction(center, rng);
    for (std::size_t r = 0; r < spec.per_identity; ++r) {
      const std::size_t row = k * spec.per_identity + r;
      synth_detail::around(center, spec.within_sigma, {values.data() + row * spec.dim, spec.dim}, rng);
      labels.push_back("id" + std::to_string(k));
    }
  }
  return EmbeddingSet(std::move(name), spec.dim, std::move(values), std::move(labels), Precision::f64, true);
}

/// Unlabeled fake set of `n_fake` unit rows. The first round(memorize_fraction * n)
/// rows are perturbed copies of random real rows; the rest are drawn around
/// `collapse_k` fresh centers when collapse is active, else are fresh
/// independent identities (uniform directions).
inline EmbeddingSet make_fake_set(const EmbeddingSet& real, const PathologySpec& pathology, std::size_t n_fake,
                                  std::uint64_t seed, std::string name = "fake") {
  pathology.validate();
  if (n_fake == 0) fail(ErrorKind::invalid_argument, "fake set size must be positive");
  if (!real.normalized()) fail(ErrorKind::invalid_argument, "real set must be normalized");
  const std::size_t dim = real.dim();
  std::mt19937_64 rng(seed);
  std::vector<double> values(n_fake * dim);
  const auto memorized =
      std::min(n_fake, static_cast<std::size_t>(std::llround(pathology.memorize_fraction * static_cast<double>(n_fake))));

  std::uniform_int_distribution<std::size_t> pick(0, real.size() - 1);
  for (std::size_t i = 0; i < memorized; ++i) {
    const auto source = real.row(pick(rng));
    synth_detail::around(source, pathology.perturb_eps, {values.data() + i * dim, dim}, rng);
  }

  std::vector<double> centers;
  if (pathology.collapse_k) {
    centers.resize(*pathology.collapse_k * dim);
    for (std::size_t c = 0; c < *pathology.collapse_k; ++c)
      synth_detail::random_direction({centers.data() + c * dim, dim}, rng);
  }
  std::uniform_int_distribution<std::size_t> pick_center(0, pathology.collapse_k ? *pathology.collapse_k - 1 : 0);
  for (std::size_t i = memorized; i < n_fake; ++i) {
    std::span<double> out{values.data() + i * dim, dim};
    if (pathology.collapse_k)
      synth_detail::around({centers.data() + pick_center(rng) * dim, dim}, pathology.collapse_sigma, out, rng);
    else
      synth_detail::random_direction(out, rng);
  }
  return EmbeddingSet(std::move(name), dim, std::move(values), std::nullopt, Precision::f64, true);
}

}  // namespace idem
