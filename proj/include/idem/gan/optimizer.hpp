#pragma once

#include <cmath>
#include <string>

#include "idem/error.hpp"
#include "idem/gan/mlp.hpp"

namespace idem::gan {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) fail(ErrorKind::invalid_argument, "learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      fail(ErrorKind::invalid_argument, "Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) fail(ErrorKind::invalid_argument, "Adam epsilon must be positive");
  }
};

inline const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  fail(ErrorKind::invalid_argument, "unknown optimizer '" + s + "' (expected adam or sgd)");
}

/// Moment estimates for one network.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const Mlp& net, OptimizerConfig config)
      : config_(config), first_(net.zero_gradients()), second_(net.zero_gradients()) {
    config_.validate();
  }

  /// Descends `grads` in place on `net`.
  void step(Mlp& net, const MlpGradients& grads) {
    ++steps_;
    auto& layers = net.layers();
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight -= config_.learning_rate * grads[l].weight;
        layers[l].bias -= config_.learning_rate * grads[l].bias;
      }
      return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = config_.learning_rate, eps = config_.epsilon;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, first_[l].weight, second_[l].weight, grads[l].weight);
      update(layers[l].bias, first_[l].bias, second_[l].bias, grads[l].bias);
    }
  }

  long steps() const noexcept { return steps_; }
  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_{};
  MlpGradients first_;
  MlpGradients second_;
  long steps_ = 0;
};

}  // namespace idem::gan
