#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "idem/error.hpp"

namespace idem::gan {

/// Weight matrix (out x in) and bias of one fully connected layer.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Per-layer gradients, shaped like the network's parameters.
using MlpGradients = std::vector<DenseLayer>;

/// Fully connected network: leaky-rectifier (slope 0.2) hidden layers, identity output.
/// Batches are matrices with one sample per column.
class Mlp {
 public:
  static constexpr double kLeakySlope = 0.2;

  /// Activations saved by a forward pass for the matching backward pass.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input of each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  Mlp() = default;

  /// Zero-initialized network. `widths` lists input, hidden and output widths.
  explicit Mlp(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) fail(ErrorKind::invalid_argument, "an MLP needs at least input and output widths");
    for (auto w : widths_)
      if (w == 0) fail(ErrorKind::invalid_argument, "MLP layer widths must be positive");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
      layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(widths_[l + 1]),
                                               static_cast<Eigen::Index>(widths_[l])),
                         Eigen::VectorXd::Zero(static_cast<Eigen::Index>(widths_[l + 1]))});
  }

  /// Weights ~ N(0, gain^2 / fan_in), zero biases.
  static Mlp random(std::vector<std::size_t> widths, std::mt19937_64& rng, double gain = std::sqrt(2.0)) {
    Mlp net(std::move(widths));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& layer : net.layers_) {
      const double scale = gain / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = scale * normal(rng);
    }
    return net;
  }

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_width() const noexcept { return widths_.front(); }
  std::size_t output_width() const noexcept { return widths_.back(); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const {
    check_input(input);
    Eigen::MatrixXd a = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      a = std::move(z);
    }
    return a;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape& tape) const {
    check_input(input);
    tape.inputs.clear();
    tape.pre.clear();
    Eigen::MatrixXd a = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      tape.inputs.push_back(a);
      Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      tape.pre.push_back(z);
      if (l + 1 < layers_.size()) z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      a = std::move(z);
    }
    return a;
  }

  /// Reverse pass. Adds parameter gradients into `grads` (if non-null) and
  /// returns the gradient with respect to the input batch.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output, MlpGradients* grads) const {
    Eigen::MatrixXd g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l + 1 < layers_.size())
        g = g.cwiseProduct(tape.pre[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
      if (grads != nullptr) {
        (*grads)[l].weight.noalias() += g * tape.inputs[l].transpose();
        (*grads)[l].bias += g.rowwise().sum();
      }
      g = layers_[l].weight.transpose() * g;
    }
    return g;
  }

  MlpGradients zero_gradients() const {
    MlpGradients grads;
    for (const auto& layer : layers_)
      grads.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                       Eigen::VectorXd::Zero(layer.bias.size())});
    return grads;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return n;
  }

  /// Flat parameter indexing over a layer list (parameters or gradients):
  /// per layer, weights in column-major order, then biases.
  template <typename Layers>
  static auto parameter_in(Layers& layers, std::size_t k)
      -> std::conditional_t<std::is_const_v<Layers>, const double&, double&> {
    for (auto& layer : layers) {
      const auto nw = static_cast<std::size_t>(layer.weight.size());
      if (k < nw) return layer.weight.data()[k];
      k -= nw;
      const auto nb = static_cast<std::size_t>(layer.bias.size());
      if (k < nb) return layer.bias.data()[k];
      k -= nb;
    }
    fail(ErrorKind::invalid_argument, "parameter index out of range");
  }

  double& parameter(std::size_t k) { return parameter_in(layers_, k); }
  double parameter(std::size_t k) const { return parameter_in(layers_, k); }

  /// Clamps every weight and bias to [-c, c].
  void clip(double c) {
    for (auto& layer : layers_) {
      layer.weight = layer.weight.cwiseMax(-c).cwiseMin(c);
      layer.bias = layer.bias.cwiseMax(-c).cwiseMin(c);
    }
  }

  double max_abs_parameter() const {
    double m = 0.0;
    for (const auto& layer : layers_) {
      if (layer.weight.size() > 0) m = std::max(m, layer.weight.cwiseAbs().maxCoeff());
      if (layer.bias.size() > 0) m = std::max(m, layer.bias.cwiseAbs().maxCoeff());
    }
    return m;
  }

  bool all_finite() const {
    for (const auto& layer : layers_)
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.widths_ != b.widths_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l)
      if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
    return true;
  }

 private:
  void check_input(const Eigen::MatrixXd& input) const {
    if (static_cast<std::size_t>(input.rows()) != input_width())
      fail(ErrorKind::invalid_argument, "MLP input has " + std::to_string(input.rows()) + " rows, expected " +
                                            std::to_string(input_width()));
  }

  std::vector<std::size_t> widths_;
  std::vector<DenseLayer> layers_;
};

inline bool all_finite(const MlpGradients& grads) {
  for (const auto& layer : grads)
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

}  // namespace idem::gan
