#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "idem/embeddings.hpp"
#include "idem/error.hpp"
#include "idem/gan/mlp.hpp"

namespace idem::gan {

/// Latent split: the first `id_dim` coordinates carry identity and are shared
/// within a generated pair; the remaining `variation_dim` are drawn per image.
struct LatentSpec {
  std::size_t id_dim = 8;
  std::size_t variation_dim = 4;

  std::size_t total() const noexcept { return id_dim + variation_dim; }

  void validate() const {
    if (id_dim < 1 || variation_dim < 1)
      fail(ErrorKind::invalid_argument, "latent spec needs id_dim >= 1 and variation_dim >= 1");
  }

  friend bool operator==(const LatentSpec&, const LatentSpec&) = default;
};

struct ArchitectureConfig {
  LatentSpec latent{};
  std::size_t data_dim = 8;
  std::vector<std::size_t> generator_hidden{64, 64};
  /// Weight-clipping bound for the critic.
  double clip = 0.05;
};

/// Generator (latent -> data) and pair critic (concatenated pair -> score).
/// Critic hidden widths are twice the generator's.
struct SdGanModel {
  Mlp generator;
  Mlp critic;
  LatentSpec latent;
  double clip = 0.05;

  std::size_t data_dim() const noexcept { return generator.output_width(); }

  void validate() const {
    latent.validate();
    if (!(clip >= 0.0)) fail(ErrorKind::invalid_argument, "clip bound must be >= 0");
    if (generator.input_width() != latent.total())
      fail(ErrorKind::invalid_argument, "generator input width must equal the latent dimension");
    if (critic.input_width() != 2 * data_dim())
      fail(ErrorKind::invalid_argument, "critic input width must be twice the data dimension");
    if (critic.output_width() != 1) fail(ErrorKind::invalid_argument, "critic must output one score");
    const auto& gw = generator.widths();
    const auto& cw = critic.widths();
    if (gw.size() != cw.size())
      fail(ErrorKind::invalid_argument, "critic and generator must have the same number of hidden layers");
    for (std::size_t l = 1; l + 1 < gw.size(); ++l)
      if (cw[l] != 2 * gw[l])
        fail(ErrorKind::invalid_argument, "critic hidden width " + std::to_string(cw[l]) +
                                              " is not twice the generator width " + std::to_string(gw[l]));
  }

  friend bool operator==(const SdGanModel& a, const SdGanModel& b) {
    return a.generator == b.generator && a.critic == b.critic && a.latent == b.latent && a.clip == b.clip;
  }
};

inline std::vector<std::size_t> generator_widths(const ArchitectureConfig& arch) {
  std::vector<std::size_t> w{arch.latent.total()};
  w.insert(w.end(), arch.generator_hidden.begin(), arch.generator_hidden.end());
  w.push_back(arch.data_dim);
  return w;
}

inline std::vector<std::size_t> critic_widths(const ArchitectureConfig& arch) {
  std::vector<std::size_t> w{2 * arch.data_dim};
  for (auto h : arch.generator_hidden) w.push_back(2 * h);
  w.push_back(1);
  return w;
}

/// Randomly initialized model; critic parameters start inside the clip box.
inline SdGanModel make_sdgan(const ArchitectureConfig& arch, std::uint64_t seed) {
  arch.latent.validate();
  if (arch.data_dim < 2) fail(ErrorKind::invalid_argument, "data_dim must be >= 2");
  std::mt19937_64 rng(seed);
  SdGanModel model{Mlp::random(generator_widths(arch), rng), Mlp::random(critic_widths(arch), rng), arch.latent,
                   arch.clip};
  model.critic.clip(arch.clip);
  model.validate();
  return model;
}

/// Two latent batches (one sample per column) sharing their identity rows.
struct LatentPairBatch {
  Eigen::MatrixXd z1;
  Eigen::MatrixXd z2;

  std::size_t size() const noexcept { return static_cast<std::size_t>(z1.cols()); }
};

/// z1 = [z_id, z_iv1], z2 = [z_id, z_iv2], every coordinate standard normal.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_latent_pair(const LatentSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto total = static_cast<Eigen::Index>(spec.total());
  const auto id = static_cast<Eigen::Index>(spec.id_dim);
  Eigen::VectorXd z1(total), z2(total);
  for (Eigen::Index k = 0; k < id; ++k) z1(k) = z2(k) = normal(rng);
  for (Eigen::Index k = id; k < total; ++k) z1(k) = normal(rng);
  for (Eigen::Index k = id; k < total; ++k) z2(k) = normal(rng);
  return {std::move(z1), std::move(z2)};
}

inline LatentPairBatch sample_latent_pairs(const LatentSpec& spec, std::size_t batch, std::mt19937_64& rng) {
  const auto total = static_cast<Eigen::Index>(spec.total());
  LatentPairBatch out{Eigen::MatrixXd(total, static_cast<Eigen::Index>(batch)),
                      Eigen::MatrixXd(total, static_cast<Eigen::Index>(batch))};
  for (std::size_t b = 0; b < batch; ++b) {
    auto [z1, z2] = sample_latent_pair(spec, rng);
    out.z1.col(static_cast<Eigen::Index>(b)) = z1;
    out.z2.col(static_cast<Eigen::Index>(b)) = z2;
  }
  return out;
}

using IndexPair = std::pair<std::size_t, std::size_t>;

namespace model_detail {

inline Eigen::MatrixXd stack_pairs(const EmbeddingSet& set, std::span<const IndexPair> pairs) {
  const auto d = static_cast<Eigen::Index>(set.dim());
  Eigen::MatrixXd out(2 * d, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const auto [i, j] = pairs[b];
    if (i >= set.size() || j >= set.size()) fail(ErrorKind::invalid_argument, "pair index out of range");
    const auto col = static_cast<Eigen::Index>(b);
    for (Eigen::Index k = 0; k < d; ++k) {
      out(k, col) = set.row(i)[static_cast<std::size_t>(k)];
      out(d + k, col) = set.row(j)[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

}  // namespace model_detail

/// Concatenated same-identity pairs (2*dim x batch). Construction checks labels.
class MatedPairBatch {
 public:
  MatedPairBatch(const EmbeddingSet& set, std::span<const IndexPair> pairs) {
    if (!set.has_labels()) fail(ErrorKind::invalid_argument, "labels required to build mated pairs");
    for (const auto& [i, j] : pairs)
      if (i >= set.size() || j >= set.size() || set.label_ids()[i] != set.label_ids()[j])
        fail(ErrorKind::invalid_argument,
             "mated pair (" + std::to_string(i) + ", " + std::to_string(j) + ") has mismatched labels");
    data_ = model_detail::stack_pairs(set, pairs);
  }

  const Eigen::MatrixXd& data() const noexcept { return data_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(data_.cols()); }

  /// Same pairs with the two images swapped.
  MatedPairBatch swapped() const {
    MatedPairBatch out = *this;
    const auto d = data_.rows() / 2;
    out.data_.topRows(d) = data_.bottomRows(d);
    out.data_.bottomRows(d) = data_.topRows(d);
    return out;
  }

 private:
  Eigen::MatrixXd data_;
};

/// Concatenated pairs of different identities (the imposter term's input).
class NonMatedPairBatch {
 public:
  NonMatedPairBatch(const EmbeddingSet& set, std::span<const IndexPair> pairs) {
    if (!set.has_labels()) fail(ErrorKind::invalid_argument, "labels required to build non-mated pairs");
    for (const auto& [i, j] : pairs)
      if (i >= set.size() || j >= set.size() || set.label_ids()[i] == set.label_ids()[j])
        fail(ErrorKind::invalid_argument,
             "non-mated pair (" + std::to_string(i) + ", " + std::to_string(j) + ") shares a label");
    data_ = model_detail::stack_pairs(set, pairs);
  }

  /// Wraps arbitrary concatenated pairs; used where a batch is fed through the
  /// imposter slot without label provenance (e.g. generated pairs).
  static NonMatedPairBatch from_matrix(Eigen::MatrixXd data) {
    NonMatedPairBatch out;
    out.data_ = std::move(data);
    return out;
  }

  const Eigen::MatrixXd& data() const noexcept { return data_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(data_.cols()); }

 private:
  NonMatedPairBatch() = default;
  Eigen::MatrixXd data_;
};

/// Generator outputs for both halves of each latent pair, stacked as critic input.
inline Eigen::MatrixXd generate_pairs(const Mlp& generator, const LatentPairBatch& latent) {
  const Eigen::MatrixXd g1 = generator.forward(latent.z1);
  const Eigen::MatrixXd g2 = generator.forward(latent.z2);
  Eigen::MatrixXd out(g1.rows() + g2.rows(), g1.cols());
  out << g1, g2;
  return out;
}

}  // namespace idem::gan
