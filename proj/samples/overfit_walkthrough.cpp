// Builds a real identity set and two fakes (honest, 5% memorized), then
// prints the overfitting verdict and near-copy share of each.

#include <algorithm>
#include <cstdio>

#include "idem/idem.hpp"

int main() {
  using namespace idem;
  const auto real = gen_identity_clouds({2000, 5, 32, 0.2, 1}, "real");
  const auto honest = make_fake_set(real, {}, 2000, 2, "honest");
  const auto copied = make_fake_set(real, {.memorize_fraction = 0.05, .perturb_eps = 0.05}, 2000, 3, "copied");

  const auto rr = ComparisonSpec::within_nonmated(real);
  const double t = threshold_for_far(rr, 1e-3);
  std::printf("real threshold at FAR 1e-3: %.4f\n", t);

  for (const auto* fake : {&honest, &copied}) {
    const auto report = overfit_report(real, *fake);
    const double far_fr = far_at_threshold(ComparisonSpec::between(*fake, real), t);
    // fake rows whose closest real row is a near copy
    const auto nn = nearest_neighbour_scores(ComparisonSpec::between(*fake, real));
    const auto hits = std::count_if(nn.begin(), nn.end(), [](double s) { return s >= 0.95; });
    std::printf("%-7s overfitting=%s  fake-vs-real FAR=%.2e  near copies=%.3f\n", fake->name().c_str(),
                report.overfitting() ? "yes" : "no", far_fr, static_cast<double>(hits) / static_cast<double>(nn.size()));
  }
}
