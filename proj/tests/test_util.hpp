#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "idem/embeddings.hpp"

namespace idem::test {

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("idem_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Gaussian rows, optionally labeled with `identities` round-robin labels.
inline EmbeddingSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed, std::size_t identities = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> values(n * dim);
  for (auto& v : values) v = normal(rng);
  std::optional<std::vector<std::string>> labels;
  if (identities > 0) {
    labels.emplace();
    for (std::size_t i = 0; i < n; ++i) labels->push_back("p" + std::to_string(i % identities));
  }
  return EmbeddingSet("random", dim, std::move(values), std::move(labels));
}

}  // namespace idem::test
