#include <fstream>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "idem/config.hpp"
#include "test_util.hpp"

namespace idem::config {
namespace {

using testing::HasSubstr;

void expect_invalid(const Json& j, auto&& reader, const std::string& fragment) {
  try {
    reader(j);
    FAIL() << j.dump();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_THAT(e.what(), HasSubstr(fragment));
  }
}

TEST(Config, ParseErrorsNameTheSource) {
  try {
    parse("{\"a\": ", "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_THAT(e.what(), HasSubstr("bad.json"));
  }
}

TEST(Config, MixtureDefaultsAndOverrides) {
  const auto s = mixture_from_json(parse(R"({"identities": 30, "within_sigma": 0.2})", "t"));
  EXPECT_EQ(s.identities, 30u);
  EXPECT_EQ(s.within_sigma, 0.2);
  EXPECT_EQ(s.per_identity, MixtureSpec{}.per_identity);
  expect_invalid(parse(R"({"identitis": 3})", "t"), mixture_from_json, "identitis");
  expect_invalid(parse(R"({"dim": "eight"})", "t"), mixture_from_json, "dim");
}

TEST(Config, FakeSpec) {
  const auto f = fake_from_json(parse(R"({"rows": 10, "collapse_k": null, "memorize_fraction": 0.5})", "t"));
  EXPECT_EQ(f.rows, 10u);
  EXPECT_FALSE(f.pathology.collapse_k);
  EXPECT_EQ(f.pathology.memorize_fraction, 0.5);
  EXPECT_EQ(*fake_from_json(parse(R"({"rows": 1, "collapse_k": 3})", "t")).pathology.collapse_k, 3u);
  expect_invalid(parse(R"({"seed": 1})", "t"), fake_from_json, "rows");
  EXPECT_THROW(fake_from_json(parse(R"({"rows": 4, "memorize_fraction": 2})", "t")), Error);
}

TEST(Config, SynthRoundTrip) {
  SynthConfig c;
  c.mixture = {12, 3, 5, 0.25, 9};
  c.fake = FakeSpec{40, 2, {.memorize_fraction = 0.1, .perturb_eps = 0.01, .collapse_k = 4}};
  const auto back = synth_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_FALSE(synth_from_json(parse("{}", "t")).fake);
}

TEST(Config, TrainDefaults) {
  const auto c = train_from_json(parse("{}", "t"));
  EXPECT_EQ(c.steps, 1000u);
  EXPECT_FALSE(c.data_path);
  EXPECT_EQ(c.mixture.identities, 500u);
  EXPECT_EQ(c.architecture.latent.id_dim, 8u);
  EXPECT_EQ(c.architecture.latent.variation_dim, 4u);
  EXPECT_EQ(c.architecture.clip, 0.05);
  EXPECT_EQ(c.training.lambda, 0.001);
  EXPECT_EQ(c.training.n_critic, 5u);
  EXPECT_EQ(c.training.batch, 64u);
  EXPECT_EQ(c.training.optimizer.learning_rate, 1e-3);
  EXPECT_EQ(c.training.optimizer.beta1, 0.0);
  EXPECT_EQ(c.training.optimizer.beta2, 0.99);
}

TEST(Config, TrainRoundTrip) {
  const auto c = train_from_json(parse(R"({
    "data": {"mixture": {"identities": 50, "per_identity": 4}},
    "architecture": {"id_dim": 3, "variation_dim": 2, "generator_hidden": [16], "clip": 0.0},
    "training": {"lambda": 0.5, "use_triplet": false, "optimizer": {"kind": "sgd", "lr": 0.1}},
    "steps": 7, "seed": 3})",
                                       "t"));
  EXPECT_EQ(c.architecture.clip, 0.0);
  EXPECT_EQ(c.training.optimizer.kind, gan::OptimizerKind::sgd);
  EXPECT_EQ(c.mixture.per_identity, 4u);
  EXPECT_EQ(to_json(train_from_json(to_json(c))), to_json(c));
}

TEST(Config, TrainRejects) {
  expect_invalid(parse(R"({"stepz": 1})", "t"), train_from_json, "stepz");
  expect_invalid(parse(R"({"data": {"path": "a", "mixture": {}}})", "t"), train_from_json, "not both");
  expect_invalid(parse(R"({"architecture": {"clip": -1}})", "t"), train_from_json, "clip");
  expect_invalid(parse(R"({"architecture": {"generator_hidden": []}})", "t"), train_from_json, "generator_hidden");
  expect_invalid(parse(R"({"training": {"optimizer": {"kind": "rmsprop"}}})", "t"), train_from_json, "rmsprop");
  expect_invalid(parse(R"({"training": {"batch": 0}})", "t"), train_from_json, "batch");
}

TEST(Config, LoadFromFile) {
  test::TempDir dir;
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << R"({"steps": 12})";
  EXPECT_EQ(train_from_json(load(path)).steps, 12u);
  EXPECT_THROW(load(dir.path() / "missing.json"), Error);
}

}  // namespace
}  // namespace idem::config
