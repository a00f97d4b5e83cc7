#pragma once

// JSON configs for synthesis and training runs, and their manifest echoes.
// Readers are strict: unknown keys and wrong types are ErrorKind::invalid_argument.

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>

#include "idem/embedding_io.hpp"
#include "idem/error.hpp"
#include "idem/gan/model.hpp"
#include "idem/gan/train.hpp"
#include "idem/synthgen.hpp"

namespace idem::config {

using Json = nlohmann::ordered_json;

namespace detail {

inline void only_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(ErrorKind::invalid_argument, std::string(where) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::invalid_argument, std::string(where) + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
void read(const Json& j, std::string_view where, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::invalid_argument, std::string(where) + "." + key + ": wrong type");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (j.at(key).is_number_integer() && j.at(key).get<long long>() < 0)
      fail(ErrorKind::invalid_argument, std::string(where) + "." + key + ": must be non-negative");
  }
}

}  // namespace detail

inline Json parse(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::invalid_argument, source + ": invalid JSON: " + e.what());
  }
}

inline Json load(const std::filesystem::path& path) { return parse(io_detail::read_file(path), path.string()); }

// ---- synthgen ---------------------------------------------------------------

inline MixtureSpec mixture_from_json(const Json& j) {
  detail::only_keys(j, "mixture", {"identities", "per_identity", "dim", "within_sigma", "seed"});
  MixtureSpec s;
  detail::read(j, "mixture", "identities", s.identities);
  detail::read(j, "mixture", "per_identity", s.per_identity);
  detail::read(j, "mixture", "dim", s.dim);
  detail::read(j, "mixture", "within_sigma", s.within_sigma);
  detail::read(j, "mixture", "seed", s.seed);
  return s;
}

inline Json to_json(const MixtureSpec& s) {
  return {{"identities", s.identities},
          {"per_identity", s.per_identity},
          {"dim", s.dim},
          {"within_sigma", s.within_sigma},
          {"seed", s.seed}};
}

/// Fake-set request: size, seed and pathology.
struct FakeSpec {
  std::size_t rows = 0;
  std::uint64_t seed = 1;
  PathologySpec pathology{};
};

inline FakeSpec fake_from_json(const Json& j) {
  detail::only_keys(j, "fake", {"rows", "seed", "memorize_fraction", "perturb_eps", "collapse_k", "collapse_sigma"});
  FakeSpec f;
  detail::read(j, "fake", "rows", f.rows);
  detail::read(j, "fake", "seed", f.seed);
  detail::read(j, "fake", "memorize_fraction", f.pathology.memorize_fraction);
  detail::read(j, "fake", "perturb_eps", f.pathology.perturb_eps);
  detail::read(j, "fake", "collapse_sigma", f.pathology.collapse_sigma);
  if (j.contains("collapse_k") && !j.at("collapse_k").is_null()) {
    std::size_t k = 0;
    detail::read(j, "fake", "collapse_k", k);
    f.pathology.collapse_k = k;
  }
  if (f.rows == 0) fail(ErrorKind::invalid_argument, "fake.rows must be positive");
  f.pathology.validate();
  return f;
}

inline Json to_json(const FakeSpec& f) {
  Json j{{"rows", f.rows},
         {"seed", f.seed},
         {"memorize_fraction", f.pathology.memorize_fraction},
         {"perturb_eps", f.pathology.perturb_eps},
         {"collapse_k", nullptr},
         {"collapse_sigma", f.pathology.collapse_sigma}};
  if (f.pathology.collapse_k) j["collapse_k"] = *f.pathology.collapse_k;
  return j;
}

struct SynthConfig {
  MixtureSpec mixture{};
  std::optional<FakeSpec> fake{};
};

inline SynthConfig synth_from_json(const Json& j) {
  detail::only_keys(j, "synth config", {"mixture", "fake"});
  SynthConfig c;
  if (j.contains("mixture")) c.mixture = mixture_from_json(j.at("mixture"));
  if (j.contains("fake") && !j.at("fake").is_null()) c.fake = fake_from_json(j.at("fake"));
  return c;
}

inline Json to_json(const SynthConfig& c) {
  return {{"mixture", to_json(c.mixture)}, {"fake", c.fake ? to_json(*c.fake) : Json(nullptr)}};
}

// ---- training -----------------------------------------------------------------

inline gan::OptimizerConfig optimizer_from_json(const Json& j) {
  detail::only_keys(j, "training.optimizer", {"kind", "lr", "beta1", "beta2", "eps"});
  gan::OptimizerConfig o;
  std::string kind = gan::to_string(o.kind);
  detail::read(j, "training.optimizer", "kind", kind);
  o.kind = gan::optimizer_kind_from_string(kind);
  detail::read(j, "training.optimizer", "lr", o.learning_rate);
  detail::read(j, "training.optimizer", "beta1", o.beta1);
  detail::read(j, "training.optimizer", "beta2", o.beta2);
  detail::read(j, "training.optimizer", "eps", o.epsilon);
  return o;
}

inline gan::TripletConfig training_from_json(const Json& j) {
  detail::only_keys(j, "training",
                    {"lambda", "negative_pool_quantile", "n_critic", "batch", "use_triplet", "optimizer"});
  gan::TripletConfig t;
  detail::read(j, "training", "lambda", t.lambda);
  detail::read(j, "training", "negative_pool_quantile", t.negative_pool_quantile);
  detail::read(j, "training", "n_critic", t.n_critic);
  detail::read(j, "training", "batch", t.batch);
  detail::read(j, "training", "use_triplet", t.use_triplet);
  if (j.contains("optimizer")) t.optimizer = optimizer_from_json(j.at("optimizer"));
  t.validate();
  return t;
}

inline Json to_json(const gan::TripletConfig& t) {
  return {{"lambda", t.lambda},
          {"negative_pool_quantile", t.negative_pool_quantile},
          {"n_critic", t.n_critic},
          {"batch", t.batch},
          {"use_triplet", t.use_triplet},
          {"optimizer",
           {{"kind", gan::to_string(t.optimizer.kind)},
            {"lr", t.optimizer.learning_rate},
            {"beta1", t.optimizer.beta1},
            {"beta2", t.optimizer.beta2},
            {"eps", t.optimizer.epsilon}}}};
}

/// data_dim is not read here; it follows the training data.
inline gan::ArchitectureConfig architecture_from_json(const Json& j) {
  detail::only_keys(j, "architecture", {"id_dim", "variation_dim", "generator_hidden", "clip"});
  gan::ArchitectureConfig a;
  detail::read(j, "architecture", "id_dim", a.latent.id_dim);
  detail::read(j, "architecture", "variation_dim", a.latent.variation_dim);
  detail::read(j, "architecture", "generator_hidden", a.generator_hidden);
  detail::read(j, "architecture", "clip", a.clip);
  a.latent.validate();
  if (a.generator_hidden.empty()) fail(ErrorKind::invalid_argument, "architecture.generator_hidden must be non-empty");
  for (auto w : a.generator_hidden)
    if (w == 0) fail(ErrorKind::invalid_argument, "architecture.generator_hidden widths must be positive");
  if (!(a.clip >= 0.0)) fail(ErrorKind::invalid_argument, "architecture.clip must be >= 0");
  return a;
}

inline Json to_json(const gan::ArchitectureConfig& a) {
  return {{"id_dim", a.latent.id_dim},
          {"variation_dim", a.latent.variation_dim},
          {"generator_hidden", a.generator_hidden},
          {"clip", a.clip}};
}

/// Training data is either an embedding file (labeled) or a synthetic mixture.
struct TrainConfig {
  std::optional<std::string> data_path{};
  std::optional<std::string> labels_path{};
  MixtureSpec mixture{500, 10, 8, 0.1, 1};
  gan::ArchitectureConfig architecture{};
  gan::TripletConfig training{};
  std::size_t steps = 1000;
  std::uint64_t seed = 1;
};

inline TrainConfig train_from_json(const Json& j) {
  detail::only_keys(j, "train config", {"data", "architecture", "training", "steps", "seed"});
  TrainConfig c;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::only_keys(d, "data", {"path", "labels", "mixture"});
    if (d.contains("path") && d.contains("mixture"))
      fail(ErrorKind::invalid_argument, "data: give either \"path\" or \"mixture\", not both");
    if (d.contains("path")) {
      std::string p;
      detail::read(d, "data", "path", p);
      c.data_path = p;
    }
    if (d.contains("labels")) {
      std::string p;
      detail::read(d, "data", "labels", p);
      c.labels_path = p;
    }
    if (d.contains("mixture")) c.mixture = mixture_from_json(d.at("mixture"));
  }
  if (j.contains("architecture")) c.architecture = architecture_from_json(j.at("architecture"));
  if (j.contains("training")) c.training = training_from_json(j.at("training"));
  detail::read(j, "train config", "steps", c.steps);
  detail::read(j, "train config", "seed", c.seed);
  return c;
}

inline Json to_json(const TrainConfig& c) {
  Json data;
  if (c.data_path) {
    data["path"] = *c.data_path;
    if (c.labels_path) data["labels"] = *c.labels_path;
  } else {
    data["mixture"] = to_json(c.mixture);
  }
  return {{"data", data},
          {"architecture", to_json(c.architecture)},
          {"training", to_json(c.training)},
          {"steps", c.steps},
          {"seed", c.seed}};
}

}  // namespace idem::config
