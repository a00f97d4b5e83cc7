#pragma once

// Central finite-difference check of analytic MLP gradients. The oracle only
// calls the scalar loss (forward passes), never the backward code.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "idem/gan/mlp.hpp"

namespace idem::gan {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t parameters = 0;
};

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic` with (L(p + h) - L(p - h)) / 2h for every parameter p
/// of `net`. `loss` must read `net` by reference; parameters are restored.
template <typename Loss>
GradCheckResult check_gradients(Mlp& net, const MlpGradients& analytic, Loss&& loss, double h = 1e-5) {
  GradCheckResult out;
  out.parameters = net.parameter_count();
  for (std::size_t k = 0; k < out.parameters; ++k) {
    double& p = net.parameter(k);
    const double saved = p;
    p = saved + h;
    const double up = loss();
    p = saved - h;
    const double down = loss();
    p = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(Mlp::parameter_in(analytic, k), numeric);
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_parameter = k;
    }
  }
  return out;
}

}  // namespace idem::gan
