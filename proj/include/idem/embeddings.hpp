#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "idem/error.hpp"

namespace idem {

/// Precision of the values as stored on disk. Arithmetic is always 64-bit.
enum class Precision : std::uint8_t { f64, f32 };

/// Tolerance on the Euclidean norm of rows of a normalized set.
inline constexpr double kUnitNormTolerance = 1e-9;

/// Fixed-order inner product.
///
/// Four interleaved partial sums (lanes i mod 4) combined as (s0 + s1) + (s2 + s3),
/// then the tail. Every score in the library goes through this function, so the
/// blocked engine and the reference loops see bit-identical values.
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

/// Identity feature vectors with optional per-row identity labels.
///
/// Immutable after construction. Labels are interned to dense integer ids in
/// order of first appearance so that metric loops compare integers.
class EmbeddingSet {
 public:
  EmbeddingSet(std::string name, std::size_t dim, std::vector<double> values,
               std::optional<std::vector<std::string>> labels = std::nullopt,
               Precision precision = Precision::f64, bool normalized = false)
      : name_(std::move(name)),
        dim_(dim),
        values_(std::move(values)),
        labels_(std::move(labels)),
        precision_(precision),
        normalized_(normalized) {
    if (dim_ < 2) fail(ErrorKind::invalid_argument, "embedding dim must be >= 2, got " + std::to_string(dim_));
    if (values_.empty() || values_.size() % dim_ != 0)
      fail(ErrorKind::invalid_argument, "value count " + std::to_string(values_.size()) +
                                            " is not a positive multiple of dim " + std::to_string(dim_));
    rows_ = values_.size() / dim_;
    for (std::size_t i = 0; i < rows_; ++i) {
      for (double v : row(i)) {
        if (!std::isfinite(v)) fail(ErrorKind::format, "row " + std::to_string(i) + ": non-finite value");
      }
    }
    if (labels_) {
      if (labels_->size() != rows_)
        fail(ErrorKind::format, "labels: expected " + std::to_string(rows_) + " entries, found " +
                                    std::to_string(labels_->size()));
      std::unordered_map<std::string, std::uint32_t> ids;
      label_ids_.reserve(rows_);
      for (const auto& label : *labels_) {
        auto [it, inserted] = ids.emplace(label, static_cast<std::uint32_t>(ids.size()));
        label_ids_.push_back(it->second);
      }
      identity_count_ = ids.size();
    }
    if (normalized_) {
      for (std::size_t i = 0; i < rows_; ++i) {
        const double norm = std::sqrt(dot(row(i), row(i)));
        if (std::abs(norm - 1.0) > kUnitNormTolerance)
          fail(ErrorKind::invalid_argument, "row " + std::to_string(i) + ": norm " + std::to_string(norm) +
                                                " is not unit although the set is marked normalized");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return rows_; }
  bool normalized() const noexcept { return normalized_; }
  Precision precision() const noexcept { return precision_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::optional<std::vector<std::string>>& labels() const noexcept { return labels_; }
  /// Dense label ids; empty when the set is unlabeled.
  std::span<const std::uint32_t> label_ids() const noexcept { return label_ids_; }
  std::size_t identity_count() const noexcept { return identity_count_; }

  /// Row description used in error messages: "row 7" or "row 7 (label 'bob')".
  std::string describe_row(std::size_t i) const {
    std::string out = "row " + std::to_string(i);
    if (labels_) out += " (label '" + (*labels_)[i] + "')";
    return out;
  }

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::size_t rows_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<std::string>> labels_;
  std::vector<std::uint32_t> label_ids_;
  std::size_t identity_count_ = 0;
  Precision precision_ = Precision::f64;
  bool normalized_ = false;
};

/// Affine map from cosine similarity to matcher score: alpha * cos + beta.
struct ScoreScale {
  double alpha = 1.0;
  double beta = 0.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
      fail(ErrorKind::invalid_argument, "score scale requires finite alpha > 0 and finite beta");
  }

  double apply(double cosine) const noexcept { return alpha * cosine + beta; }

  friend bool operator==(const ScoreScale&, const ScoreScale&) = default;
};

inline double score(std::span<const double> a, std::span<const double> b, const ScoreScale& scale) {
  if (a.size() != b.size())
    fail(ErrorKind::invalid_argument,
         "score: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  return scale.apply(dot(a, b));
}

/// Scales every row to unit Euclidean norm. Zero-norm rows are an error.
inline EmbeddingSet normalize(const EmbeddingSet& set) {
  std::vector<double> out(set.values().begin(), set.values().end());
  const std::size_t dim = set.dim();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double norm = std::sqrt(dot(set.row(i), set.row(i)));
    if (norm == 0.0) fail(ErrorKind::invalid_argument, set.describe_row(i) + ": zero-norm row cannot be normalized");
    for (std::size_t k = 0; k < dim; ++k) out[i * dim + k] /= norm;
  }
  return EmbeddingSet(set.name(), dim, std::move(out), set.labels(), set.precision(), true);
}

}  // namespace idem
