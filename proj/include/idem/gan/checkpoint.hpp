#pragma once

// Model checkpoint, little-endian:
//   magic "SDGT" | version u16 = 1 | id_dim u32 | variation_dim u32 | clip f64
//   | generator: layer count u32, widths u32... | critic: layer count u32, widths u32...
//   | generator parameters | critic parameters
// Parameters are f64, per layer the weight matrix row-major then the bias.
// Optimizer state is not stored.

#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "idem/embedding_io.hpp"
#include "idem/error.hpp"
#include "idem/gan/model.hpp"

namespace idem::gan {

namespace checkpoint_detail {

inline constexpr char kMagic[4] = {'S', 'D', 'G', 'T'};
inline constexpr std::uint16_t kVersion = 1;

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) fail(ErrorKind::format, std::string("checkpoint truncated reading ") + what);
    const T v = io_detail::get_le<T>(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_));
    pos_ += sizeof(T);
    return v;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline void put_widths(std::string& out, const Mlp& net) {
  io_detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.widths().size()));
  for (auto w : net.widths()) io_detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
}

inline void put_params(std::string& out, const Mlp& net) {
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) io_detail::put_le<double>(out, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) io_detail::put_le<double>(out, layer.bias(r));
  }
}

inline std::vector<std::size_t> get_widths(Reader& in) {
  const auto n = in.get<std::uint32_t>("layer count");
  if (n < 2 || n > 64) fail(ErrorKind::format, "checkpoint: implausible layer count " + std::to_string(n));
  std::vector<std::size_t> w(n);
  for (auto& x : w) {
    x = in.get<std::uint32_t>("layer width");
    if (x == 0 || x > (1u << 20)) fail(ErrorKind::format, "checkpoint: implausible layer width");
  }
  return w;
}

inline void get_params(Reader& in, Mlp& net) {
  for (auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = in.get<double>("weight");
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = in.get<double>("bias");
  }
}

}  // namespace checkpoint_detail

inline std::string encode_checkpoint(const SdGanModel& model) {
  using namespace checkpoint_detail;
  std::string out(kMagic, 4);
  io_detail::put_le<std::uint16_t>(out, kVersion);
  io_detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.latent.id_dim));
  io_detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.latent.variation_dim));
  io_detail::put_le<double>(out, model.clip);
  put_widths(out, model.generator);
  put_widths(out, model.critic);
  put_params(out, model.generator);
  put_params(out, model.critic);
  return out;
}

inline SdGanModel decode_checkpoint(std::string_view bytes) {
  using namespace checkpoint_detail;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorKind::format, "checkpoint: bad magic (expected \"SDGT\")");
  Reader in(bytes.substr(4));
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) fail(ErrorKind::format, "checkpoint: unsupported version " + std::to_string(version));
  SdGanModel model;
  model.latent.id_dim = in.get<std::uint32_t>("id_dim");
  model.latent.variation_dim = in.get<std::uint32_t>("variation_dim");
  model.clip = in.get<double>("clip");
  model.generator = Mlp(get_widths(in));
  model.critic = Mlp(get_widths(in));
  get_params(in, model.generator);
  get_params(in, model.critic);
  if (!in.done()) fail(ErrorKind::format, "checkpoint: trailing bytes");
  if (!model.generator.all_finite() || !model.critic.all_finite())
    fail(ErrorKind::format, "checkpoint: non-finite parameter");
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorKind::format, std::string("checkpoint: ") + e.what());
  }
  return model;
}

inline void save_checkpoint(const SdGanModel& model, const std::filesystem::path& path) {
  io_detail::write_file(path, encode_checkpoint(model));
}

inline SdGanModel load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(io_detail::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace idem::gan
