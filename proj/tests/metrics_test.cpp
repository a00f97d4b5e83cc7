#include <algorithm>
#include <cmath>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "idem/curve_io.hpp"
#include "idem/metrics.hpp"
#include "idem/naive_oracle.hpp"
#include "idem/synthgen.hpp"
#include "test_util.hpp"

namespace idem {
namespace {

using testing::HasSubstr;

EmbeddingSet unit_rows(std::size_t dim, std::vector<double> values, std::optional<std::vector<std::string>> labels = {}) {
  return normalize(EmbeddingSet("t", dim, std::move(values), std::move(labels)));
}

EmbeddingSet mixture(std::size_t k, std::size_t m, std::size_t dim, double sigma, std::uint64_t seed) {
  return gen_identity_clouds({k, m, dim, sigma, seed});
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::io;
}

TEST(ThresholdGrid, Validation) {
  EXPECT_THROW(ThresholdGrid({0.5}), Error);
  EXPECT_THROW(ThresholdGrid({0.5, 0.5}), Error);
  EXPECT_THROW(ThresholdGrid({0.5, INFINITY}), Error);
  const auto g = ThresholdGrid::uniform(-1.0, 1.0, 5);
  EXPECT_THAT(std::vector<double>(g.values().begin(), g.values().end()),
              testing::ElementsAre(-1.0, -0.5, 0.0, 0.5, 1.0));
}

TEST(FarCurve, OrthogonalTriple) {
  const auto set = unit_rows(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto far = far_curve(ComparisonSpec::within_any(set), ThresholdGrid({0.5, 0.9}));
  EXPECT_EQ(far.total, 3u);
  EXPECT_EQ(far.far[0], 0.0);
}

TEST(FarCurve, ThresholdAtMinimumIsOne) {
  const auto set = mixture(20, 3, 8, 0.3, 1);
  const auto spec = ComparisonSpec::within_nonmated(set);
  const auto [lo, hi] = observed_score_range(spec);
  const auto far = far_curve(spec, ThresholdGrid({lo, hi}));
  EXPECT_EQ(far.far[0], 1.0);
  EXPECT_GE(far.counts[1], 1u);
}

TEST(FarCurve, EmptyAndMissingLabels) {
  const auto one = unit_rows(2, {1, 0}, std::vector<std::string>{"a"});
  EXPECT_EQ(kind_of([&] { far_curve(ComparisonSpec::within_nonmated(one), ThresholdGrid({0, 1})); }),
            ErrorKind::empty_comparison);
  EXPECT_EQ(kind_of([&] { far_curve_naive(ComparisonSpec::within_nonmated(one), ThresholdGrid({0, 1})); }),
            ErrorKind::empty_comparison);

  const auto unlabeled = unit_rows(2, {1, 0, 0, 1});
  try {
    far_curve(ComparisonSpec::within_nonmated(unlabeled), ThresholdGrid({0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_THAT(e.what(), HasSubstr("labels required"));
  }
  const auto raw = EmbeddingSet("raw", 2, {3, 4, 1, 0}, std::vector<std::string>{"a", "b"});
  EXPECT_EQ(kind_of([&] { far_curve(ComparisonSpec::within_nonmated(raw), ThresholdGrid({0, 1})); }),
            ErrorKind::invalid_argument);
}

TEST(FarCurve, BetweenSameTwoPoints) {
  const auto set = unit_rows(2, {1, 0, 0, 1});
  const auto far = far_curve(ComparisonSpec::between(set, set), ThresholdGrid({0.5, 1.0}));
  EXPECT_EQ(far.total, 4u);
  EXPECT_EQ(far.counts[0], 2u);
  EXPECT_EQ(far.counts[1], 2u);
}

TEST(ClosedForm, Totals) {
  const auto set = test::random_set(37, 4, 5, 6);  // labels p0..p5 round-robin
  const auto n = normalize(set);
  std::uint64_t mated = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    const std::uint64_t c = 37 / 6 + (k < 37 % 6 ? 1 : 0);
    mated += c * (c - 1) / 2;
  }
  const auto grid = ThresholdGrid({-2.0, 2.0});
  EXPECT_EQ(far_curve(ComparisonSpec::within_nonmated(n), grid).total, 37u * 36u / 2u - mated);
  EXPECT_EQ(frr_curve(ComparisonSpec::within_mated(n), grid).total, mated);
  EXPECT_EQ(far_curve(ComparisonSpec::within_any(normalize(test::random_set(37, 4, 5))), grid).total, 666u);
  EXPECT_EQ(far_curve(ComparisonSpec::between(n, normalize(test::random_set(11, 4, 6))), grid).total, 37u * 11u);
  EXPECT_EQ(frr_curve(ComparisonSpec::within_mated(mixture(1000, 10, 4, 0.1, 3)), grid).total, 45000u);
}

struct OracleCase {
  std::size_t n;
  std::size_t identities;
  std::uint64_t seed;
};

class OracleEquality : public testing::TestWithParam<OracleCase> {};

TEST_P(OracleEquality, AllModesMatchNaiveCounts) {
  const auto c = GetParam();
  const auto set = normalize(test::random_set(c.n, 6, c.seed, c.identities));
  const auto other = normalize(test::random_set(c.n / 2 + 1, 6, c.seed + 100));
  const auto grid = ThresholdGrid::uniform(-1.0, 1.0, 512);
  const EngineOptions opts{.workers = 3, .block_size = 7};

  for (const auto& spec : {ComparisonSpec::within_nonmated(set), ComparisonSpec::between(other, set)}) {
    EXPECT_EQ(far_curve(spec, grid, opts).counts, far_curve_naive(spec, grid).counts);
    EXPECT_EQ(nn_far_curve(spec, grid, opts).counts, nn_far_curve_naive(spec, grid).counts);
    EXPECT_EQ(nearest_neighbour_scores(spec, opts), nearest_neighbour_scores_naive(spec));
  }
  const auto mated = ComparisonSpec::within_mated(set);
  EXPECT_EQ(frr_curve(mated, grid, opts).counts, frr_curve_naive(mated, grid).counts);
}

INSTANTIATE_TEST_SUITE_P(Seeded, OracleEquality,
                         testing::Values(OracleCase{10, 3, 1}, OracleCase{64, 5, 2}, OracleCase{257, 40, 3},
                                         OracleCase{600, 120, 4}));

TEST(Determinism, WorkersAndBlockSizes) {
  const auto set = mixture(150, 4, 16, 0.2, 9);
  const auto grid = ThresholdGrid::uniform(-0.5, 1.0, 64);
  const auto spec = ComparisonSpec::within_nonmated(set);
  const auto ref = far_curve(spec, grid, {.workers = 1, .block_size = 256});
  const auto ref_nn = nearest_neighbour_scores(spec, {.workers = 1});
  for (std::size_t w : {2, 5, 8})
    for (std::size_t b : {1, 13, 64, 1024}) {
      EXPECT_EQ(far_curve(spec, grid, {.workers = w, .block_size = b}).counts, ref.counts);
      EXPECT_EQ(nearest_neighbour_scores(spec, {.workers = w, .block_size = b}), ref_nn);
    }
}

TEST(ScaleInvariance, CountsFollowAffineMap) {
  const auto set = mixture(60, 4, 8, 0.2, 4);
  const ScoreScale scale{5000.0, -20.0};
  const auto grid = ThresholdGrid::uniform(-0.9, 0.95, 97);
  const auto scaled_grid = grid.rescaled(scale);
  EXPECT_EQ(far_curve(ComparisonSpec::within_nonmated(set), grid).counts,
            far_curve(ComparisonSpec::within_nonmated(set, scale), scaled_grid).counts);
  EXPECT_EQ(frr_curve(ComparisonSpec::within_mated(set), grid).counts,
            frr_curve(ComparisonSpec::within_mated(set, scale), scaled_grid).counts);
  EXPECT_EQ(nn_far_curve(ComparisonSpec::within_nonmated(set), grid).counts,
            nn_far_curve(ComparisonSpec::within_nonmated(set, scale), scaled_grid).counts);
}

TEST(NearestNeighbour, ExactCopiesScoreOne) {
  const auto set = mixture(30, 2, 8, 0.1, 2);
  const auto far = nn_far_curve(ComparisonSpec::between(set, set), ThresholdGrid({0.0, 0.5, 1.0 - 1e-12}));
  EXPECT_THAT(far.far, testing::Each(1.0));
  EXPECT_EQ(far.total, set.size());
}

TEST(NearestNeighbour, NonPositiveScores) {
  const auto set = unit_rows(2, {1, 0, -1, 0}, std::vector<std::string>{"a", "b"});
  EXPECT_EQ(nn_far_curve(ComparisonSpec::within_nonmated(set), ThresholdGrid({0.5, 0.9})).far[0], 0.0);
}

TEST(NearestNeighbour, OrphanProbeIsNamed) {
  const auto set = unit_rows(2, {1, 0, 0, 1, 1, 1}, std::vector<std::string>{"a", "a", "a"});
  try {
    nearest_neighbour_scores(ComparisonSpec::within_nonmated(set));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_comparison);
    EXPECT_THAT(e.what(), HasSubstr("row 0"));
  }
}

TEST(FrrCurve, Examples) {
  const auto dup = unit_rows(2, {1, 0, 1, 0}, std::vector<std::string>{"a", "a"});
  const auto mated = ComparisonSpec::within_mated(dup);
  EXPECT_EQ(frr_curve(mated, ThresholdGrid({0.99, 1.5})).frr, (std::vector<double>{0.0, 1.0}));

  const auto singles = unit_rows(2, {1, 0, 0, 1}, std::vector<std::string>{"a", "b"});
  EXPECT_EQ(kind_of([&] { frr_curve(ComparisonSpec::within_mated(singles), ThresholdGrid({0, 1})); }),
            ErrorKind::empty_comparison);
  EXPECT_EQ(kind_of([&] { frr_curve(ComparisonSpec::within_nonmated(singles), ThresholdGrid({0, 1})); }),
            ErrorKind::invalid_argument);
}

TEST(FrrAtThreshold, Extremes) {
  const auto set = mixture(40, 3, 8, 0.2, 5);
  const auto mated = ComparisonSpec::within_mated(set);
  EXPECT_EQ(frr_at_threshold(mated, -2.0), 0.0);
  EXPECT_EQ(frr_at_threshold(mated, 2.0), 1.0);
  const auto grid = ThresholdGrid::uniform(-0.2, 0.9, 12);
  const auto curve = frr_curve(mated, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(frr_at_threshold(mated, grid[i]), curve.frr[i]);
}

// Scores {0.1, 0.2, 0.3} from three unit vectors against a probe.
TEST(ThresholdForFar, RankArithmetic) {
  auto row = [](double c) { return std::vector<double>{c, std::sqrt(1 - c * c)}; };
  std::vector<double> gallery;
  for (double c : {0.1, 0.2, 0.3}) {
    const auto r = row(c);
    gallery.insert(gallery.end(), r.begin(), r.end());
  }
  const EmbeddingSet probe("p", 2, {1.0, 0.0}, std::nullopt, Precision::f64, true);
  const EmbeddingSet g("g", 2, gallery, std::nullopt, Precision::f64, true);
  const auto spec = ComparisonSpec::between(probe, g);
  const double s3 = score(probe.row(0), g.row(2), {});
  EXPECT_EQ(threshold_for_far(spec, 1.0 / 3.0), s3);
  EXPECT_EQ(threshold_for_far(spec, 1.0), score(probe.row(0), g.row(0), {}));
  EXPECT_EQ(threshold_for_far(spec, 0.34), s3);
  EXPECT_EQ(kind_of([&] { threshold_for_far(spec, 0.2); }), ErrorKind::resolution);
  EXPECT_EQ(kind_of([&] { threshold_for_far(spec, 0.0); }), ErrorKind::invalid_argument);
}

TEST(ThresholdForFar, SortOracle) {
  const auto set = mixture(150, 3, 8, 0.2, 6);  // 100,575 non-mated pairs
  const auto spec = ComparisonSpec::within_nonmated(set);
  auto scores = naive_detail::all_scores(spec);
  ASSERT_GE(scores.size(), 100000u);
  const double target = 1e-3;
  const double t = threshold_for_far(spec, target, {.workers = 2, .block_size = 64});
  auto far_at = [&](double th) {
    return static_cast<double>(scores.end() - std::lower_bound(scores.begin(), scores.end(), th)) /
           static_cast<double>(scores.size());
  };
  EXPECT_LE(far_at(t), target);
  EXPECT_TRUE(std::binary_search(scores.begin(), scores.end(), t));
  const auto below = std::lower_bound(scores.begin(), scores.end(), t);
  ASSERT_NE(below, scores.begin());
  EXPECT_GT(far_at(*std::prev(below)), target);
  EXPECT_EQ(far_at_threshold(spec, t), far_at(t));
}

TEST(ThresholdForFar, TiesAtTheTop) {
  // three identical rows in distinct identities: every non-mated score is 1
  const auto set = unit_rows(2, {1, 0, 1, 0, 1, 0, 0, 1}, std::vector<std::string>{"a", "b", "c", "d"});
  const auto spec = ComparisonSpec::within_nonmated(set);
  const double t = threshold_for_far(spec, 0.4);
  EXPECT_GT(t, 1.0);
  EXPECT_EQ(far_at_threshold(spec, t), 0.0);
}

TEST(ThresholdForFar, BelowResolution) {
  const auto set = mixture(20, 5, 8, 0.2, 1);
  try {
    threshold_for_far(ComparisonSpec::within_nonmated(set), 1e-4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution);
    EXPECT_THAT(e.what(), HasSubstr("target below resolution"));
  }
}

TEST(TopPairs, MatchesFullSort) {
  const auto set = mixture(80, 3, 8, 0.2, 8);
  const auto spec = ComparisonSpec::within_nonmated(set);
  auto scores = naive_detail::all_scores(spec);
  std::sort(scores.rbegin(), scores.rend());
  for (std::uint64_t k : {1ull, 17ull, 500ull, static_cast<unsigned long long>(scores.size())}) {
    const auto top = top_pairs(spec, k, {.workers = 2, .block_size = 16});
    ASSERT_GE(top.size(), k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(top[i].score, scores[i]);
    for (std::size_t i = k; i < top.size(); ++i) EXPECT_EQ(top[i].score, scores[k - 1]);
    for (const auto& p : top) EXPECT_NE(set.label_ids()[p.probe], set.label_ids()[p.partner]);
  }
}

TEST(FrrAtFar, DuplicatesNeverRejected) {
  std::vector<double> v;
  std::vector<std::string> labels;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> r(6);
    for (auto& x : r) x = normal(rng);
    for (int copy = 0; copy < 2; ++copy) {
      v.insert(v.end(), r.begin(), r.end());
      labels.push_back("id" + std::to_string(k));
    }
  }
  const auto set = unit_rows(6, v, labels);
  const auto op = frr_at_far(ComparisonSpec::within_mated(set), ComparisonSpec::within_nonmated(set), 0.01);
  EXPECT_EQ(op.frr, 0.0);
}

TEST(FrrAtFar, ComposesOracles) {
  const auto set = mixture(100, 4, 8, 0.25, 12);
  const auto mated = ComparisonSpec::within_mated(set);
  const auto nonmated = ComparisonSpec::within_nonmated(set);
  const auto op = frr_at_far(mated, nonmated, 1e-3);
  EXPECT_EQ(op.threshold, threshold_for_far(nonmated, 1e-3));
  const auto ms = naive_detail::all_scores(mated);
  const double frr = static_cast<double>(std::lower_bound(ms.begin(), ms.end(), op.threshold) - ms.begin()) /
                     static_cast<double>(ms.size());
  EXPECT_EQ(op.frr, frr);
}

TEST(Roc, SeparatedClassesReachOrigin) {
  const auto set = mixture(30, 3, 16, 0.01, 1);
  const auto mated = ComparisonSpec::within_mated(set);
  const auto nonmated = ComparisonSpec::within_nonmated(set);
  const auto roc = roc_curve(mated, nonmated, ThresholdGrid::uniform(-1.0, 1.0, 400));
  EXPECT_TRUE(std::ranges::any_of(roc.points, [](const RocPoint& p) { return p.far == 0.0 && p.frr == 0.0; }));
  const auto low = roc_curve(mated, nonmated, ThresholdGrid({-1.5, -1.25}));
  EXPECT_EQ(low.points[0].far, 1.0);
  EXPECT_EQ(low.points[0].frr, 0.0);
}

TEST(Roc, PointsMatchCurves) {
  const auto set = mixture(50, 4, 8, 0.3, 3);
  const auto grid = ThresholdGrid::uniform(-0.5, 1.0, 33);
  const auto mated = ComparisonSpec::within_mated(set);
  const auto nonmated = ComparisonSpec::within_nonmated(set);
  const auto roc = roc_curve(mated, nonmated, grid);
  const auto far = far_curve_naive(nonmated, grid);
  const auto frr = frr_curve_naive(mated, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(roc.points[i].far, far.far[i]);
    EXPECT_EQ(roc.points[i].frr, frr.frr[i]);
  }
}

TEST(Arithmetic, DistinguishableIdentities) {
  EXPECT_EQ(distinguishable_identities(1e-4), 10000.0);
  EXPECT_NEAR(distinguishable_identities(0.82e-3), 1219.5, 0.05);
  EXPECT_EQ(distinguishable_identities(1.0), 1.0);
  EXPECT_THROW(distinguishable_identities(0.0), Error);
}

TEST(Arithmetic, ModeCollapseFraction) {
  EXPECT_NEAR(mode_collapse_fraction(1.00e-4, 0.82e-3), 0.122, 0.0005);
  EXPECT_NEAR(mode_collapse_fraction(1.29e-3, 5.80e-3), 0.222, 0.0005);
  EXPECT_EQ(mode_collapse_fraction(0.3, 0.3), 1.0);
  EXPECT_THROW(mode_collapse_fraction(-1.0, 0.5), Error);
}

TEST(BinomialBand, HandValues) {
  // p1 = 0.1 over 100, p2 = 0.2 over 400: sigma^2 = 0.0009 + 0.0004
  EXPECT_NEAR(binomial_sigma(10, 100, 80, 400), std::sqrt(0.0013), 1e-15);
  EXPECT_TRUE(within_binomial_band(10, 100, 80, 400));
  EXPECT_FALSE(significant_excess(80, 400, 10, 100));
  // k of 100 against a zero reference: flagged iff k > 9 (1 - k / 100)
  EXPECT_TRUE(significant_excess(9, 100, 0, 100));
  EXPECT_FALSE(significant_excess(8, 100, 0, 100));
}

TEST(OverfitReport, ExactCopyIsMaximalOverfit) {
  const auto real = mixture(40, 3, 8, 0.2, 1);
  const auto fake = EmbeddingSet("copy", real.dim(), test::vec(real.values()), std::nullopt, Precision::f64, true);
  const auto report = overfit_report(real, fake);
  const auto& g = report.grid();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] <= 1.0 - 1e-12) EXPECT_EQ(report.nn_fake_vs_real.far[i], 1.0);
  EXPECT_TRUE(report.overfitting());
  EXPECT_FALSE(report.fake_vs_fake_nonmated_only);
}

TEST(OverfitReport, HonestFakeWithinBand) {
  const auto real = mixture(400, 5, 64, 0.25, 21);
  const auto fake = mixture(400, 5, 64, 0.25, 22);
  const auto report = overfit_report(real, fake);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < report.grid().size(); ++i)
    inside += within_binomial_band(report.fake_vs_real.counts[i], report.fake_vs_real.total,
                                   report.real_vs_real.counts[i], report.real_vs_real.total);
  EXPECT_GE(inside, report.grid().size() * 95 / 100);
  EXPECT_TRUE(report.fake_vs_fake_nonmated_only);
  EXPECT_FALSE(report.overfitting());
  EXPECT_FALSE(report.collapse());
}

TEST(OverfitReport, VerdictNeedsSustainedRun) {
  EXPECT_EQ(min_flag_run(512), 6u);
  EXPECT_EQ(min_flag_run(11), 1u);
  std::vector<bool> flags(512, false);
  flags[10] = flags[11] = flags[300] = true;
  EXPECT_EQ(longest_flag_run(flags), 2u);
  EXPECT_FALSE(sustained_excess(flags));
  for (std::size_t i = 100; i < 106; ++i) flags[i] = true;
  EXPECT_TRUE(sustained_excess(flags));
  EXPECT_FALSE(sustained_excess({}));
}

TEST(OverfitReport, CollapseRaisesFlag) {
  const auto real = mixture(1000, 2, 16, 0.2, 2);
  const auto fake = make_fake_set(real, {.collapse_k = 20}, 800, 3);
  EXPECT_TRUE(overfit_report(real, fake).collapse());
}

TEST(OverfitReport, UnlabeledRealRejected) {
  const auto real = normalize(test::random_set(10, 4, 1));
  try {
    overfit_report(real, real);
    FAIL();
  } catch (const Error& e) {
    EXPECT_THAT(e.what(), HasSubstr("labels required"));
  }
}

TEST(CurveIo, CsvLayout) {
  const auto set = unit_rows(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto far = far_curve(ComparisonSpec::within_any(set), ThresholdGrid({-0.5, 0.5}));
  EXPECT_EQ(to_csv(far), "threshold,count,total,rate\n-0.5,3,3,1\n0.5,0,3,0\n");
  const auto j = to_json(far);
  EXPECT_EQ(j["total"], 3);
  EXPECT_EQ(j["counts"][0], 3);
}

}  // namespace
}  // namespace idem
