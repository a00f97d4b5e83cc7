#pragma once

// CSV and JSON writers for curves and reports. Output is byte-for-byte
// deterministic for identical inputs: thresholds use shortest round-trip
// formatting, rates 10 significant digits.

#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "idem/embedding_io.hpp"
#include "idem/metrics.hpp"

namespace idem {

inline std::string format_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", rate);
  return buf;
}

namespace curve_detail {

inline std::string rate_csv(const ThresholdGrid& grid, const std::vector<std::uint64_t>& counts, std::uint64_t total,
                            const std::vector<double>& rates) {
  std::string out = "threshold,count,total,rate\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += io_detail::format_double(grid[i]);
    out += ',' + std::to_string(counts[i]) + ',' + std::to_string(total) + ',' + format_rate(rates[i]) + '\n';
  }
  return out;
}

}  // namespace curve_detail

/// "threshold,count,total,rate", one line per grid point.
inline std::string to_csv(const FarCurve& curve) {
  return curve_detail::rate_csv(curve.grid, curve.counts, curve.total, curve.far);
}

inline std::string to_csv(const FrrCurve& curve) {
  return curve_detail::rate_csv(curve.grid, curve.counts, curve.total, curve.frr);
}

/// "threshold,far,frr", one line per grid point.
inline std::string to_csv(const RocCurve& roc) {
  std::string out = "threshold,far,frr\n";
  for (std::size_t i = 0; i < roc.grid.size(); ++i)
    out += io_detail::format_double(roc.grid[i]) + ',' + format_rate(roc.points[i].far) + ',' +
           format_rate(roc.points[i].frr) + '\n';
  return out;
}

template <typename Curve>
void write_csv(const Curve& curve, const std::filesystem::path& path) {
  io_detail::write_file(path, to_csv(curve));
}

inline nlohmann::ordered_json to_json(const FarCurve& curve) {
  nlohmann::ordered_json j;
  j["total"] = curve.total;
  j["thresholds"] = std::vector<double>(curve.grid.values().begin(), curve.grid.values().end());
  j["counts"] = curve.counts;
  j["far"] = curve.far;
  return j;
}

inline nlohmann::ordered_json to_json(const FrrCurve& curve) {
  nlohmann::ordered_json j;
  j["total"] = curve.total;
  j["thresholds"] = std::vector<double>(curve.grid.values().begin(), curve.grid.values().end());
  j["counts"] = curve.counts;
  j["frr"] = curve.frr;
  return j;
}

namespace curve_detail {

inline nlohmann::ordered_json flagged_thresholds(const ThresholdGrid& grid, const std::vector<bool>& flags) {
  auto out = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out.push_back(grid[i]);
  return out;
}

}  // namespace curve_detail

inline nlohmann::ordered_json to_json(const OverfitReport& report) {
  using curve_detail::flagged_thresholds;
  nlohmann::ordered_json j;
  j["band_sigmas"] = kBandSigmas;
  j["min_flag_run"] = min_flag_run(report.grid().size());
  j["fake_vs_fake_nonmated_only"] = report.fake_vs_fake_nonmated_only;
  j["overfitting"] = report.overfitting();
  j["collapse"] = report.collapse();
  j["flags"] = {
      {"overfit_thresholds", flagged_thresholds(report.grid(), report.overfit_flags)},
      {"nn_overfit_thresholds", flagged_thresholds(report.grid(), report.nn_overfit_flags)},
      {"collapse_thresholds", flagged_thresholds(report.grid(), report.collapse_flags)},
      {"nn_collapse_thresholds", flagged_thresholds(report.grid(), report.nn_collapse_flags)},
  };
  j["curves"] = {
      {"real_vs_real", to_json(report.real_vs_real)},
      {"fake_vs_real", to_json(report.fake_vs_real)},
      {"fake_vs_fake", to_json(report.fake_vs_fake)},
      {"nn_real_vs_real", to_json(report.nn_real_vs_real)},
      {"nn_fake_vs_real", to_json(report.nn_fake_vs_real)},
      {"nn_fake_vs_fake", to_json(report.nn_fake_vs_fake)},
  };
  return j;
}

inline void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  io_detail::write_file(path, j.dump(2) + '\n');
}

}  // namespace idem
