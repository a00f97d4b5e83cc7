#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "idem/metrics.hpp"
#include "idem/synthgen.hpp"
#include "test_util.hpp"

namespace idem {
namespace {

TEST(IdentityClouds, ShapeLabelsAndNorms) {
  const auto set = gen_identity_clouds({7, 3, 5, 0.1, 1});
  EXPECT_EQ(set.size(), 21u);
  EXPECT_EQ(set.identity_count(), 7u);
  EXPECT_TRUE(set.normalized());
  EXPECT_EQ((*set.labels())[4], "id1");
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_NEAR(dot(set.row(i), set.row(i)), 1.0, 1e-12);
}

TEST(IdentityClouds, ZeroSigmaRowsAreCenters) {
  const auto two = gen_identity_clouds({2, 1, 4, 0.0, 3});
  EXPECT_EQ(two.size(), 2u);
  EXPECT_NE(two.values()[0], two.values()[4]);
  const auto dup = gen_identity_clouds({3, 4, 4, 0.0, 3});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t r = 1; r < 4; ++r)
      for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(dup.row(k * 4 + r)[d], dup.row(k * 4)[d]);
}

TEST(IdentityClouds, SeedDeterminism) {
  const MixtureSpec spec{50, 4, 8, 0.2, 77};
  EXPECT_EQ(test::vec(gen_identity_clouds(spec).values()), test::vec(gen_identity_clouds(spec).values()));
  auto other = spec;
  other.seed = 78;
  EXPECT_NE(test::vec(gen_identity_clouds(spec).values()), test::vec(gen_identity_clouds(other).values()));
}

TEST(IdentityClouds, RejectsBadSpecs) {
  EXPECT_THROW(gen_identity_clouds({1, 3, 4, 0.1, 0}), Error);
  EXPECT_THROW(gen_identity_clouds({3, 0, 4, 0.1, 0}), Error);
  EXPECT_THROW(gen_identity_clouds({3, 3, 4, -0.1, 0}), Error);
}

TEST(IdentityClouds, MatedCloserThanNonMated) {
  const auto set = gen_identity_clouds({1000, 10, 64, 0.1, 5});
  double mated = 0.0;
  std::size_t n_mated = 0;
  for (std::size_t k = 0; k < 1000; ++k)
    for (std::size_t a = 0; a < 10; ++a)
      for (std::size_t b = a + 1; b < 10; ++b, ++n_mated) mated += dot(set.row(k * 10 + a), set.row(k * 10 + b));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  double nonmated = 0.0;
  std::size_t n_non = 0;
  while (n_non < 200000) {
    const auto i = pick(rng), j = pick(rng);
    if (i / 10 == j / 10) continue;
    nonmated += dot(set.row(i), set.row(j));
    ++n_non;
  }
  EXPECT_GE(mated / n_mated - nonmated / n_non, 0.2);
}

TEST(FakeSet, FullMemorizationCopiesRows) {
  const auto real = gen_identity_clouds({20, 3, 6, 0.1, 1});
  const auto fake = make_fake_set(real, {.memorize_fraction = 1.0}, 40, 9);
  EXPECT_FALSE(fake.has_labels());
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < real.size(); ++i) rows.emplace(real.row(i).begin(), real.row(i).end());
  for (std::size_t i = 0; i < fake.size(); ++i)
    EXPECT_TRUE(rows.contains(std::vector<double>(fake.row(i).begin(), fake.row(i).end())));
}

TEST(FakeSet, SingleCollapseCenter) {
  const auto real = gen_identity_clouds({20, 3, 16, 0.1, 1});
  const auto fake = make_fake_set(real, {.collapse_k = 1}, 50, 2);
  const auto nn = nearest_neighbour_scores(ComparisonSpec::within_any(fake));
  for (double s : nn) EXPECT_GT(s, 0.98);
}

TEST(FakeSet, Errors) {
  const auto real = gen_identity_clouds({5, 2, 4, 0.1, 1});
  EXPECT_THROW(make_fake_set(real, {}, 0, 1), Error);
  EXPECT_THROW(make_fake_set(real, {.memorize_fraction = 1.5}, 10, 1), Error);
  EXPECT_THROW(make_fake_set(real, {.perturb_eps = -1.0}, 10, 1), Error);
  EXPECT_THROW(make_fake_set(real, {.collapse_k = 0}, 10, 1), Error);
}

TEST(FakeSet, SeedDeterminism) {
  const auto real = gen_identity_clouds({30, 2, 8, 0.1, 1});
  const PathologySpec p{.memorize_fraction = 0.3, .perturb_eps = 0.05, .collapse_k = 4};
  EXPECT_EQ(test::vec(make_fake_set(real, p, 100, 5).values()), test::vec(make_fake_set(real, p, 100, 5).values()));
}

// 5% copies should land above the real 1e-3 operating point.
TEST(FakeSet, MemorizedCopiesMatchTheirSources) {
  const auto real = gen_identity_clouds({2000, 5, 32, 0.2, 11});
  const auto fake = make_fake_set(real, {.memorize_fraction = 0.05, .perturb_eps = 0.05}, 2000, 12);
  const double t = threshold_for_far(ComparisonSpec::within_nonmated(real), 1e-3);
  const auto nn = nearest_neighbour_scores(ComparisonSpec::between(fake, real));
  std::size_t hits = 0;
  for (double s : nn) hits += s >= t;
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(nn.size()), 0.04);
}

}  // namespace
}  // namespace idem
