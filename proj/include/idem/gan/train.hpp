#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "idem/embedding_io.hpp"
#include "idem/embeddings.hpp"
#include "idem/error.hpp"
#include "idem/gan/losses.hpp"
#include "idem/gan/model.hpp"
#include "idem/gan/negative_pool.hpp"
#include "idem/gan/optimizer.hpp"

namespace idem::gan {

struct TripletConfig {
  /// Weight of the quadratic term balancing generated and imposter critic means.
  double lambda = 0.001;
  double negative_pool_quantile = 0.05;
  std::size_t n_critic = 5;
  std::size_t batch = 64;
  /// false trains the plain SD-GAN objective (no imposter term).
  bool use_triplet = true;
  OptimizerConfig optimizer{};

  Objective objective() const noexcept { return use_triplet ? Objective::triplet : Objective::sdgan; }

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorKind::invalid_argument, "lambda must be >= 0");
    if (!(negative_pool_quantile > 0.0 && negative_pool_quantile < 1.0))
      fail(ErrorKind::invalid_argument, "negative_pool_quantile must be in (0, 1)");
    if (n_critic == 0) fail(ErrorKind::invalid_argument, "n_critic must be positive");
    if (batch == 0) fail(ErrorKind::invalid_argument, "batch must be positive");
    optimizer.validate();
  }
};

/// Scalars logged per training step. `loss_d` and the three critic means come
/// from the last critic update of the step; `loss_g` from the generator update.
/// `d_imposter` is NaN for the plain SD-GAN objective.
struct StepLog {
  std::size_t step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
  double d_imposter = std::numeric_limits<double>::quiet_NaN();
};

/// Labeled real data with the index structures training samples from.
class TrainingData {
 public:
  TrainingData(const EmbeddingSet& set, std::optional<HardNegativePool> pool = std::nullopt)
      : set_(set), pool_(std::move(pool)) {
    if (!set.has_labels()) fail(ErrorKind::invalid_argument, "labels required for training data");
    std::vector<std::vector<std::size_t>> groups(set.identity_count());
    for (std::size_t i = 0; i < set.size(); ++i) groups[set.label_ids()[i]].push_back(i);
    for (auto& g : groups)
      if (g.size() >= 2) groups_.push_back(std::move(g));
    if (groups_.empty()) fail(ErrorKind::empty_comparison, "training data has no identity with two or more rows");
  }

  const EmbeddingSet& set() const noexcept { return set_; }
  const std::optional<HardNegativePool>& pool() const noexcept { return pool_; }

  /// Uniform identity, then two distinct rows of it in random order.
  std::vector<IndexPair> sample_mated(std::size_t batch, std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick_group(0, groups_.size() - 1);
    std::vector<IndexPair> out(batch);
    for (auto& p : out) {
      const auto& g = groups_[pick_group(rng)];
      std::uniform_int_distribution<std::size_t> pick_a(0, g.size() - 1), pick_b(0, g.size() - 2);
      const std::size_t a = pick_a(rng);
      std::size_t b = pick_b(rng);
      if (b >= a) ++b;
      p = {g[a], g[b]};
    }
    return out;
  }

  /// Uniform draws from the pool, each pair in random order.
  std::vector<IndexPair> sample_imposters(std::size_t batch, std::mt19937_64& rng) const {
    if (!pool_ || pool_->empty()) fail(ErrorKind::empty_comparison, "empty negative pool");
    std::uniform_int_distribution<std::size_t> pick(0, pool_->size() - 1);
    std::bernoulli_distribution flip(0.5);
    std::vector<IndexPair> out(batch);
    for (auto& p : out) {
      const auto& s = pool_->pairs[pick(rng)];
      p = flip(rng) ? IndexPair{s.partner, s.probe} : IndexPair{s.probe, s.partner};
    }
    return out;
  }

 private:
  const EmbeddingSet& set_;
  std::optional<HardNegativePool> pool_;
  std::vector<std::vector<std::size_t>> groups_;
};

/// Optimizer moments, step counter and random stream of a training run.
struct TrainerState {
  Optimizer critic_optimizer;
  Optimizer generator_optimizer;
  std::mt19937_64 rng;
  std::size_t step = 0;

  TrainerState(const SdGanModel& model, const TripletConfig& config, std::uint64_t seed)
      : critic_optimizer(model.critic, config.optimizer),
        generator_optimizer(model.generator, config.optimizer),
        rng(seed) {}
};

/// n_critic critic updates (each followed by weight clipping) and one generator update.
inline StepLog train_step(SdGanModel& model, TrainerState& state, const TrainingData& data,
                          const TripletConfig& config) {
  const Objective objective = config.objective();
  StepLog log;
  log.step = state.step;
  auto guard = [&](const Mlp& net, const char* which) {
    if (!net.all_finite())
      fail(ErrorKind::divergence,
           "step " + std::to_string(state.step) + ": non-finite " + which + " parameter");
  };
  try {
    for (std::size_t k = 0; k < config.n_critic; ++k) {
      const auto mated_idx = data.sample_mated(config.batch, state.rng);
      const MatedPairBatch real(data.set(), mated_idx);
      std::optional<NonMatedPairBatch> imposter;
      if (objective == Objective::triplet)
        imposter.emplace(data.set(), data.sample_imposters(config.batch, state.rng));
      const auto latent = sample_latent_pairs(model.latent, config.batch, state.rng);
      const auto g = critic_gradients(model, objective, real, imposter ? &*imposter : nullptr, latent, config.lambda);
      state.critic_optimizer.step(model.critic, g.grads);
      model.critic.clip(model.clip);
      guard(model.critic, "critic");
      log.loss_d = g.losses.critic;
      log.d_real = g.losses.means.real;
      log.d_fake = g.losses.means.fake;
      if (objective == Objective::triplet) log.d_imposter = g.losses.means.imposter;
    }
    const auto latent = sample_latent_pairs(model.latent, config.batch, state.rng);
    const auto g = generator_gradients(model, latent);
    state.generator_optimizer.step(model.generator, g.grads);
    guard(model.generator, "generator");
    log.loss_g = g.losses.generator;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::divergence) throw;
    const std::string what = e.what();
    if (what.rfind("step ", 0) == 0) throw;
    fail(ErrorKind::divergence, "step " + std::to_string(state.step) + ": " + what);
  }
  ++state.step;
  return log;
}

struct TrainResult {
  SdGanModel model;
  std::vector<StepLog> trace;
};

/// Runs `steps` training steps. Deterministic for a given seed; the negative
/// pool is built from `data` when the triplet objective is selected.
inline TrainResult train(SdGanModel model, const EmbeddingSet& data, const TripletConfig& config, std::size_t steps,
                         std::uint64_t seed, const EngineOptions& pool_options = {.workers = 1}) {
  config.validate();
  model.validate();
  if (!data.normalized()) fail(ErrorKind::invalid_argument, "training data must be normalized");
  if (data.dim() != model.data_dim())
    fail(ErrorKind::invalid_argument, "training data dim " + std::to_string(data.dim()) +
                                          " does not match generator output " + std::to_string(model.data_dim()));
  std::optional<HardNegativePool> pool;
  if (config.use_triplet && steps > 0) pool = build_negative_pool(data, config.negative_pool_quantile, pool_options);
  const TrainingData training(data, std::move(pool));
  TrainerState state(model, config, seed);
  TrainResult result{std::move(model), {}};
  result.trace.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) result.trace.push_back(train_step(result.model, state, training, config));
  return result;
}

/// "step,loss_d,loss_g,d_real,d_fake,d_imposter"
inline std::string trace_csv(const std::vector<StepLog>& trace) {
  std::string out = "step,loss_d,loss_g,d_real,d_fake,d_imposter\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : io_detail::format_double(v); };
  for (const auto& s : trace)
    out += std::to_string(s.step) + ',' + num(s.loss_d) + ',' + num(s.loss_g) + ',' + num(s.d_real) + ',' +
           num(s.d_fake) + ',' + num(s.d_imposter) + '\n';
  return out;
}

/// K identities (one z_ID each) with m images (fresh z_IV each), rows
/// unit-normalized and labeled "id<k>".
inline EmbeddingSet generate_identity_sets(const SdGanModel& model, std::size_t identities, std::size_t per_identity,
                                           std::uint64_t seed, std::string name = "generated") {
  model.validate();
  if (identities == 0 || per_identity == 0)
    fail(ErrorKind::invalid_argument, "identity count and images per identity must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto id_dim = static_cast<Eigen::Index>(model.latent.id_dim);
  const auto total = static_cast<Eigen::Index>(model.latent.total());
  const std::size_t rows = identities * per_identity;
  Eigen::MatrixXd z(total, static_cast<Eigen::Index>(rows));
  std::vector<std::string> labels;
  labels.reserve(rows);
  for (std::size_t k = 0; k < identities; ++k) {
    Eigen::VectorXd z_id(id_dim);
    for (Eigen::Index c = 0; c < id_dim; ++c) z_id(c) = normal(rng);
    for (std::size_t r = 0; r < per_identity; ++r) {
      const auto col = static_cast<Eigen::Index>(k * per_identity + r);
      z.col(col).head(id_dim) = z_id;
      for (Eigen::Index c = id_dim; c < total; ++c) z(c, col) = normal(rng);
      labels.push_back("id" + std::to_string(k));
    }
  }
  const Eigen::MatrixXd x = model.generator.forward(z);
  const auto dim = static_cast<std::size_t>(x.rows());
  std::vector<double> values(x.data(), x.data() + x.size());  // column-major: one row per sample
  EmbeddingSet raw(std::move(name), dim, std::move(values), std::move(labels));
  return normalize(raw);
}

}  // namespace idem::gan
