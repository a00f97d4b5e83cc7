#pragma once

// Binary ("IDEM") and CSV embedding files plus the label sidecar.
//
// Binary layout, little-endian:
//   magic "IDEM" | version u16 = 1 | dim u32 | N u32 | flags u16 | N*dim values
// flags bit 0 set: values are 32-bit floats, otherwise 64-bit doubles.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "idem/embeddings.hpp"
#include "idem/error.hpp"

namespace idem {

enum class FileFormat { binary, csv };

namespace io_detail {

inline constexpr std::array<char, 4> kMagic = {'I', 'D', 'E', 'M'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint16_t kFlagF32 = 0x1;
inline constexpr std::size_t kHeaderBytes = 16;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
  return std::bit_cast<T>(bits);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, path.string() + ": write failed");
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) lines.push_back(line);
  // a trailing newline produces one empty final entry
  if (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

}  // namespace io_detail

/// Default sidecar path for labels: "<embedding path>.labels".
inline std::filesystem::path label_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".labels");
}

inline std::vector<std::string> load_labels(const std::filesystem::path& path) {
  const std::string text = io_detail::read_file(path);
  std::vector<std::string> labels;
  for (auto line : io_detail::lines_of(text)) labels.emplace_back(io_detail::trim(line));
  return labels;
}

inline void save_labels(const std::vector<std::string>& labels, const std::filesystem::path& path) {
  std::string out;
  for (const auto& label : labels) {
    if (label.find('\n') != std::string::npos)
      fail(ErrorKind::invalid_argument, "label contains a newline: cannot be stored in a sidecar");
    out += label;
    out += '\n';
  }
  io_detail::write_file(path, out);
}

/// Encodes the binary format in memory.
inline std::string encode_binary(const EmbeddingSet& set) {
  using namespace io_detail;
  std::string out;
  const bool f32 = set.precision() == Precision::f32;
  out.reserve(kHeaderBytes + set.values().size() * (f32 ? 4 : 8));
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  put_le<std::uint16_t>(out, f32 ? kFlagF32 : 0);
  for (double v : set.values()) {
    if (f32)
      put_le<float>(out, static_cast<float>(v));
    else
      put_le<double>(out, v);
  }
  return out;
}

/// Decodes the binary format. `labels` are attached after validation of the values.
inline EmbeddingSet decode_binary(std::string_view bytes, std::string name,
                                  std::optional<std::vector<std::string>> labels = std::nullopt) {
  using namespace io_detail;
  if (bytes.size() < kHeaderBytes) fail(ErrorKind::format, "header: file shorter than 16-byte header");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    fail(ErrorKind::format, "header: bad magic (expected \"IDEM\")");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = get_le<std::uint16_t>(p + 4);
  const auto dim = get_le<std::uint32_t>(p + 6);
  const auto rows = get_le<std::uint32_t>(p + 10);
  const auto flags = get_le<std::uint16_t>(p + 14);
  if (version != kVersion) fail(ErrorKind::format, "header: unsupported version " + std::to_string(version));
  if ((flags & ~kFlagF32) != 0) fail(ErrorKind::format, "header: unknown flag bits " + std::to_string(flags));
  if (dim < 2) fail(ErrorKind::format, "header: dim must be >= 2, got " + std::to_string(dim));
  if (rows < 1) fail(ErrorKind::format, "header: N must be >= 1");
  const bool f32 = (flags & kFlagF32) != 0;
  const std::size_t width = f32 ? 4 : 8;
  const std::size_t count = static_cast<std::size_t>(dim) * rows;
  const std::size_t expected = kHeaderBytes + count * width;
  if (bytes.size() != expected) {
    const std::size_t full_rows = bytes.size() < kHeaderBytes ? 0 : (bytes.size() - kHeaderBytes) / (width * dim);
    fail(ErrorKind::format, "row " + std::to_string(full_rows) + ": payload size " + std::to_string(bytes.size()) +
                                " bytes, expected " + std::to_string(expected));
  }
  std::vector<double> values(count);
  const unsigned char* q = p + kHeaderBytes;
  for (std::size_t k = 0; k < count; ++k, q += width) {
    const double v = f32 ? static_cast<double>(get_le<float>(q)) : get_le<double>(q);
    if (!std::isfinite(v)) fail(ErrorKind::format, "row " + std::to_string(k / dim) + ": non-finite value");
    values[k] = v;
  }
  return EmbeddingSet(std::move(name), dim, std::move(values), std::move(labels),
                      f32 ? Precision::f32 : Precision::f64);
}

inline void save_binary(const EmbeddingSet& set, const std::filesystem::path& path) {
  io_detail::write_file(path, encode_binary(set));
}

/// Loads a binary file; labels come from `labels_path` when given, else from the
/// default sidecar if it exists.
inline EmbeddingSet load_binary(const std::filesystem::path& path,
                                std::optional<std::filesystem::path> labels_path = std::nullopt) {
  const std::string bytes = io_detail::read_file(path);
  std::optional<std::vector<std::string>> labels;
  if (!labels_path && std::filesystem::exists(label_sidecar_path(path))) labels_path = label_sidecar_path(path);
  if (labels_path) labels = load_labels(*labels_path);
  try {
    return decode_binary(bytes, path.stem().string(), std::move(labels));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

/// CSV: optional header "id,v0,v1,...", then one row per line: label, dim values.
inline EmbeddingSet parse_csv(std::string_view text, std::string name) {
  using namespace io_detail;
  const auto lines = lines_of(text);
  std::size_t first = 0;
  std::size_t dim = 0;
  if (!lines.empty()) {
    const auto header = split(trim(lines[0]), ',');
    if (!header.empty() && trim(header[0]) == "id") {
      if (header.size() < 3) fail(ErrorKind::format, "header: expected at least 2 value columns");
      dim = header.size() - 1;
      first = 1;
    }
  }
  std::vector<double> values;
  std::vector<std::string> labels;
  for (std::size_t li = first; li < lines.size(); ++li) {
    const std::size_t row = li - first;
    const auto line = trim(lines[li]);
    if (line.empty()) fail(ErrorKind::format, "row " + std::to_string(row) + ": empty line");
    const auto fields = split(line, ',');
    if (dim == 0) {
      if (fields.size() < 3) fail(ErrorKind::format, "row 0: expected a label and at least 2 values");
      dim = fields.size() - 1;
    }
    if (fields.size() - 1 != dim)
      fail(ErrorKind::format,
           "row " + std::to_string(row) + ": expected " + std::to_string(dim) + " values, found " +
               std::to_string(fields.size() - 1));
    labels.emplace_back(trim(fields[0]));
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto field = trim(fields[k]);
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        fail(ErrorKind::format, "row " + std::to_string(row) + ": cannot parse value '" + std::string(field) + "'");
      if (!std::isfinite(v)) fail(ErrorKind::format, "row " + std::to_string(row) + ": non-finite value");
      values.push_back(v);
    }
  }
  if (values.empty()) fail(ErrorKind::format, "no data rows");
  return EmbeddingSet(std::move(name), dim, std::move(values), std::move(labels));
}

inline EmbeddingSet load_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(io_detail::read_file(path), path.stem().string());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

inline std::string encode_csv(const EmbeddingSet& set) {
  std::string out = "id";
  for (std::size_t k = 0; k < set.dim(); ++k) out += ",v" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += set.has_labels() ? (*set.labels())[i] : std::to_string(i);
    for (double v : set.row(i)) {
      out += ',';
      out += io_detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const EmbeddingSet& set, const std::filesystem::path& path) {
  io_detail::write_file(path, encode_csv(set));
}

inline FileFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
}

/// Loads either format. For CSV, labels come from the file itself unless `labels_path` overrides them.
inline EmbeddingSet load_embeddings(const std::filesystem::path& path, FileFormat format,
                                    std::optional<std::filesystem::path> labels_path = std::nullopt) {
  if (format == FileFormat::binary) return load_binary(path, std::move(labels_path));
  EmbeddingSet set = load_csv(path);
  if (!labels_path) return set;
  auto labels = load_labels(*labels_path);
  return EmbeddingSet(set.name(), set.dim(), {set.values().begin(), set.values().end()}, std::move(labels));
}

/// Writes the binary file and, for labeled sets, the label sidecar next to it.
inline void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (format_for_path(path) == FileFormat::csv) {
    save_csv(set, path);
    return;
  }
  save_binary(set, path);
  if (set.has_labels()) save_labels(*set.labels(), label_sidecar_path(path));
}

}  // namespace idem
