#pragma once

// Wasserstein, SD-GAN and triplet losses with their reverse-mode gradients.
//
// Every loss is minimized as written:
//   wasserstein  L_D = mean D(x) - mean D(G(z))                     L_G = mean D(G(z))
//   sdgan        L_D = mean D(x) - mean D(G(z1),G(z2))              L_G = mean D(G(z1),G(z2))
//   triplet      L_D = mean D(x) - 1/2 [mean D(fake) + mean D(xbar)]
//                      + lambda [mean D(fake) - mean D(xbar)]^2      L_G = mean D(fake)
// where x is a mated real pair and xbar a non-mated (imposter) real pair.

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "idem/error.hpp"
#include "idem/gan/mlp.hpp"
#include "idem/gan/model.hpp"

namespace idem::gan {

enum class Objective { wasserstein, sdgan, triplet };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::wasserstein: return "wasserstein";
    case Objective::sdgan: return "sdgan";
    case Objective::triplet: return "triplet";
  }
  return "unknown";
}

/// Batch means of the critic over real, generated and imposter inputs.
struct CriticMeans {
  double real = 0.0;
  double fake = 0.0;
  double imposter = 0.0;
};

struct Losses {
  double critic = 0.0;
  double generator = 0.0;
  CriticMeans means{};
};

/// Critic loss with the imposter term; lambda = 0 and imposter = fake gives the SD-GAN loss.
inline double triplet_critic_loss(const CriticMeans& m, double lambda) {
  const double gap = m.fake - m.imposter;
  return m.real - 0.5 * (m.fake + m.imposter) + lambda * gap * gap;
}

namespace loss_detail {

inline double checked_mean(const Eigen::MatrixXd& scores, const char* what) {
  if (scores.cols() == 0) fail(ErrorKind::invalid_argument, std::string("empty batch for ") + what);
  const double m = scores.mean();
  if (!std::isfinite(m)) fail(ErrorKind::divergence, std::string("non-finite critic output on ") + what);
  return m;
}

inline Eigen::MatrixXd constant_row(Eigen::Index n, double v) { return Eigen::MatrixXd::Constant(1, n, v); }

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorKind::invalid_argument, "lambda must be finite and >= 0");
}

}  // namespace loss_detail

// ---- forward values -------------------------------------------------------

/// Unpaired Wasserstein losses: `critic` maps data_dim -> 1.
inline Losses wgan_losses(const Mlp& critic, const Mlp& generator, const Eigen::MatrixXd& real,
                          const Eigen::MatrixXd& z) {
  using loss_detail::checked_mean;
  Losses out;
  out.means.real = checked_mean(critic.forward(real), "real batch");
  out.means.fake = checked_mean(critic.forward(generator.forward(z)), "generated batch");
  out.critic = out.means.real - out.means.fake;
  out.generator = out.means.fake;
  return out;
}

inline Losses sdgan_losses(const SdGanModel& model, const MatedPairBatch& real, const LatentPairBatch& latent) {
  using loss_detail::checked_mean;
  Losses out;
  out.means.real = checked_mean(model.critic.forward(real.data()), "real pairs");
  out.means.fake = checked_mean(model.critic.forward(generate_pairs(model.generator, latent)), "generated pairs");
  out.critic = out.means.real - out.means.fake;
  out.generator = out.means.fake;
  return out;
}

inline Losses triplet_losses(const SdGanModel& model, const MatedPairBatch& real, const NonMatedPairBatch& imposter,
                             const LatentPairBatch& latent, double lambda) {
  using loss_detail::checked_mean;
  loss_detail::check_lambda(lambda);
  if (imposter.size() == 0) fail(ErrorKind::invalid_argument, "empty imposter batch");
  Losses out;
  out.means.real = checked_mean(model.critic.forward(real.data()), "real pairs");
  out.means.fake = checked_mean(model.critic.forward(generate_pairs(model.generator, latent)), "generated pairs");
  out.means.imposter = checked_mean(model.critic.forward(imposter.data()), "imposter pairs");
  out.critic = triplet_critic_loss(out.means, lambda);
  out.generator = out.means.fake;
  return out;
}

// ---- gradients ------------------------------------------------------------

struct Gradients {
  Losses losses;
  MlpGradients grads;
};

/// dL_D / d theta_D for the unpaired Wasserstein critic (generator frozen).
inline Gradients wgan_critic_gradients(const Mlp& critic, const Mlp& generator, const Eigen::MatrixXd& real,
                                       const Eigen::MatrixXd& z) {
  using loss_detail::checked_mean;
  using loss_detail::constant_row;
  Gradients out{{}, critic.zero_gradients()};
  const Eigen::MatrixXd fake = generator.forward(z);
  Mlp::Tape real_tape, fake_tape;
  out.losses.means.real = checked_mean(critic.forward(real, real_tape), "real batch");
  out.losses.means.fake = checked_mean(critic.forward(fake, fake_tape), "generated batch");
  out.losses.critic = out.losses.means.real - out.losses.means.fake;
  out.losses.generator = out.losses.means.fake;
  critic.backward(real_tape, constant_row(real.cols(), 1.0 / static_cast<double>(real.cols())), &out.grads);
  critic.backward(fake_tape, constant_row(fake.cols(), -1.0 / static_cast<double>(fake.cols())), &out.grads);
  return out;
}

/// dL_G / d theta_G for the unpaired Wasserstein generator (critic frozen).
inline Gradients wgan_generator_gradients(const Mlp& critic, const Mlp& generator, const Eigen::MatrixXd& z) {
  Gradients out{{}, generator.zero_gradients()};
  Mlp::Tape gen_tape, critic_tape;
  const Eigen::MatrixXd fake = generator.forward(z, gen_tape);
  out.losses.means.fake = loss_detail::checked_mean(critic.forward(fake, critic_tape), "generated batch");
  out.losses.generator = out.losses.means.fake;
  const Eigen::MatrixXd grad_fake = critic.backward(
      critic_tape, loss_detail::constant_row(z.cols(), 1.0 / static_cast<double>(z.cols())), nullptr);
  generator.backward(gen_tape, grad_fake, &out.grads);
  return out;
}

/// dL_D / d theta_D for the SD-GAN (no imposter) or triplet critic loss.
/// `imposter` is required for Objective::triplet and ignored otherwise.
inline Gradients critic_gradients(const SdGanModel& model, Objective objective, const MatedPairBatch& real,
                                  const NonMatedPairBatch* imposter, const LatentPairBatch& latent,
                                  double lambda = 0.0) {
  using loss_detail::checked_mean;
  using loss_detail::constant_row;
  if (objective == Objective::wasserstein)
    fail(ErrorKind::invalid_argument, "use wgan_critic_gradients for the unpaired objective");
  const bool triplet = objective == Objective::triplet;
  if (triplet) {
    loss_detail::check_lambda(lambda);
    if (imposter == nullptr || imposter->size() == 0)
      fail(ErrorKind::invalid_argument, "triplet objective needs a non-empty imposter batch");
  }
  Gradients out{{}, model.critic.zero_gradients()};
  const Eigen::MatrixXd fake = generate_pairs(model.generator, latent);
  Mlp::Tape real_tape, fake_tape, imposter_tape;
  auto& m = out.losses.means;
  m.real = checked_mean(model.critic.forward(real.data(), real_tape), "real pairs");
  m.fake = checked_mean(model.critic.forward(fake, fake_tape), "generated pairs");
  if (triplet) m.imposter = checked_mean(model.critic.forward(imposter->data(), imposter_tape), "imposter pairs");

  const double nr = static_cast<double>(real.size());
  const double nf = static_cast<double>(fake.cols());
  double d_fake = -1.0, d_imposter = 0.0;  // dL/d(mean) per critic mean
  if (triplet) {
    const double gap = m.fake - m.imposter;
    d_fake = -0.5 + 2.0 * lambda * gap;
    d_imposter = -0.5 - 2.0 * lambda * gap;
    out.losses.critic = triplet_critic_loss(m, lambda);
  } else {
    out.losses.critic = m.real - m.fake;
  }
  out.losses.generator = m.fake;
  model.critic.backward(real_tape, constant_row(real.data().cols(), 1.0 / nr), &out.grads);
  model.critic.backward(fake_tape, constant_row(fake.cols(), d_fake / nf), &out.grads);
  if (triplet) {
    const double ni = static_cast<double>(imposter->size());
    model.critic.backward(imposter_tape, constant_row(imposter->data().cols(), d_imposter / ni), &out.grads);
  }
  if (!all_finite(out.grads)) fail(ErrorKind::divergence, "non-finite critic gradient");
  return out;
}

/// dL_G / d theta_G; identical for the SD-GAN and triplet objectives.
inline Gradients generator_gradients(const SdGanModel& model, const LatentPairBatch& latent) {
  Gradients out{{}, model.generator.zero_gradients()};
  Mlp::Tape tape1, tape2, critic_tape;
  const Eigen::MatrixXd g1 = model.generator.forward(latent.z1, tape1);
  const Eigen::MatrixXd g2 = model.generator.forward(latent.z2, tape2);
  Eigen::MatrixXd fake(g1.rows() + g2.rows(), g1.cols());
  fake << g1, g2;
  out.losses.means.fake = loss_detail::checked_mean(model.critic.forward(fake, critic_tape), "generated pairs");
  out.losses.generator = out.losses.means.fake;
  const Eigen::MatrixXd grad_pair = model.critic.backward(
      critic_tape, loss_detail::constant_row(fake.cols(), 1.0 / static_cast<double>(fake.cols())), nullptr);
  model.generator.backward(tape1, grad_pair.topRows(g1.rows()), &out.grads);
  model.generator.backward(tape2, grad_pair.bottomRows(g2.rows()), &out.grads);
  if (!all_finite(out.grads)) fail(ErrorKind::divergence, "non-finite generator gradient");
  return out;
}

enum class Network { critic, generator };

/// Gradients of the selected network's loss for the paired objectives:
/// the critic loss w.r.t. theta_D, or the generator loss w.r.t. theta_G.
inline Gradients backward(const SdGanModel& model, Objective objective, Network network, const MatedPairBatch& real,
                          const NonMatedPairBatch* imposter, const LatentPairBatch& latent, double lambda = 0.0) {
  if (network == Network::generator) return generator_gradients(model, latent);
  return critic_gradients(model, objective, real, imposter, latent, lambda);
}

}  // namespace idem::gan
