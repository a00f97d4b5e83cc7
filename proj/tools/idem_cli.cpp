// idem: command-line front end for the identity-statistics toolkit.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idem/idem.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

int exit_code(idem::ErrorKind kind) {
  switch (kind) {
    case idem::ErrorKind::format:
    case idem::ErrorKind::invalid_argument:
    case idem::ErrorKind::io: return 2;
    case idem::ErrorKind::empty_comparison:
    case idem::ErrorKind::resolution: return 3;
    case idem::ErrorKind::divergence: return 4;
  }
  return 1;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- option values shared by the evaluation commands ----

struct Common {
  std::string real, labels, fake, fake_labels, out, config, grid, scale = "1:0", mode;
  std::optional<double> target_far, threshold;
  std::size_t workers = 0;
};

idem::ThresholdGrid parse_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    const auto parts = idem::io_detail::split(text, ':');
    if (parts.size() != 3) idem::fail(idem::ErrorKind::invalid_argument, "--grid expects min:max:points");
    try {
      return idem::ThresholdGrid::uniform(std::stod(std::string(parts[0])), std::stod(std::string(parts[1])),
                                          std::stoul(std::string(parts[2])));
    } catch (const std::logic_error&) {
      idem::fail(idem::ErrorKind::invalid_argument, "--grid: cannot parse '" + text + "'");
    }
  }
  std::vector<double> values;
  for (auto part : idem::io_detail::split(text, ',')) {
    try {
      values.push_back(std::stod(std::string(part)));
    } catch (const std::logic_error&) {
      idem::fail(idem::ErrorKind::invalid_argument, "--grid: cannot parse '" + std::string(part) + "'");
    }
  }
  return idem::ThresholdGrid(std::move(values));
}

idem::ScoreScale parse_scale(const std::string& text) {
  const auto parts = idem::io_detail::split(text, ':');
  if (parts.size() != 2) idem::fail(idem::ErrorKind::invalid_argument, "--scale expects alpha:beta");
  idem::ScoreScale s;
  try {
    s = {std::stod(std::string(parts[0])), std::stod(std::string(parts[1]))};
  } catch (const std::logic_error&) {
    idem::fail(idem::ErrorKind::invalid_argument, "--scale: cannot parse '" + text + "'");
  }
  s.validate();
  return s;
}

// Fills options not given on the command line from a JSON object keyed by long option name.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  const auto j = idem::config::load(path);
  if (!j.is_object()) idem::fail(idem::ErrorKind::invalid_argument, path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "config") idem::fail(idem::ErrorKind::invalid_argument, path + ": nested \"config\" is not allowed");
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      idem::fail(idem::ErrorKind::invalid_argument, path + ": unknown key \"" + key + "\"");
    }
    if (opt->count() > 0) continue;  // command line wins
    std::string text;
    if (value.is_string())
      text = value.get<std::string>();
    else if (value.is_number() || value.is_boolean())
      text = value.dump();
    else
      idem::fail(idem::ErrorKind::invalid_argument, path + ": \"" + key + "\" must be a string or number");
    opt->add_result(text);
    opt->run_callback();
  }
}

idem::EmbeddingSet load_normalized(const std::string& path, const std::string& labels) {
  std::optional<fs::path> lp;
  if (!labels.empty()) lp = labels;
  const auto set = idem::load_embeddings(path, idem::format_for_path(path), lp);
  return set.normalized() ? set : idem::normalize(set);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) idem::fail(idem::ErrorKind::invalid_argument, std::string(flag) + " is required");
}

class Run {
 public:
  Run(std::string command, int argc, char** argv, const std::string& out) : command_(std::move(command)), out_(out) {
    require(out, "--out");
    for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
    fs::create_directories(out_);
  }

  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }

  void manifest(Json resolved) {
    Json m;
    m["tool"] = "idem";
    m["version"] = idem::kVersion;
    m["command"] = command_;
    m["argv"] = argv_;
    m["config"] = std::move(resolved);
    m["outputs"] = outputs_;
    m["created_utc"] = utc_now();
    idem::write_json(m, out_ / "manifest.json");
  }

 private:
  std::string command_;
  fs::path out_;
  std::vector<std::string> argv_;
  std::vector<std::string> outputs_;
};

Json common_json(const Common& c, const std::optional<idem::ThresholdGrid>& grid, const idem::ScoreScale& scale) {
  Json j;
  j["real"] = c.real;
  j["labels"] = c.labels.empty() ? Json(nullptr) : Json(c.labels);
  j["fake"] = c.fake.empty() ? Json(nullptr) : Json(c.fake);
  j["fake_labels"] = c.fake_labels.empty() ? Json(nullptr) : Json(c.fake_labels);
  j["grid"] = grid ? Json(std::vector<double>(grid->values().begin(), grid->values().end())) : Json(nullptr);
  j["scale"] = {{"alpha", scale.alpha}, {"beta", scale.beta}};
  j["workers"] = idem::EngineOptions{c.workers}.resolved_workers();
  return j;
}

// ---- far ----

int cmd_far(const Common& c, int argc, char** argv) {
  require(c.real, "--real");
  const std::string mode = c.mode.empty() ? "all" : c.mode;
  if (mode != "within" && mode != "between" && mode != "nn" && mode != "all")
    idem::fail(idem::ErrorKind::invalid_argument, "--mode must be within, between, nn or all");
  const bool have_fake = !c.fake.empty();
  if (mode == "between" && !have_fake) idem::fail(idem::ErrorKind::invalid_argument, "--mode between requires --fake");

  Run run("far", argc, argv, c.out);
  const idem::EngineOptions options{c.workers};
  const auto scale = parse_scale(c.scale);
  const auto real = load_normalized(c.real, c.labels);
  std::optional<idem::EmbeddingSet> fake;
  if (have_fake) fake = load_normalized(c.fake, c.fake_labels);
  std::optional<idem::ThresholdGrid> grid;
  if (!c.grid.empty()) grid = parse_grid(c.grid);

  const auto rr = idem::ComparisonSpec::within_nonmated(real, scale);
  if (mode == "within" || mode == "between" || !have_fake) {
    std::vector<std::pair<std::string, idem::ComparisonSpec>> jobs;
    if (mode != "between") jobs.emplace_back("real_vs_real", rr);
    if (have_fake && mode == "within") jobs.emplace_back("fake_vs_fake", idem::ComparisonSpec::within_any(*fake, scale));
    if (mode == "between") jobs.emplace_back("fake_vs_real", idem::ComparisonSpec::between(*fake, real, scale));
    for (const auto& [_, spec] : jobs) spec.validate();
    if (!grid) {
      std::vector<idem::ComparisonSpec> specs;
      for (const auto& [_, spec] : jobs) specs.push_back(spec);
      grid = idem::default_grid(specs, idem::kDefaultGridPoints, options);
    }
    for (const auto& [name, spec] : jobs) {
      idem::write_csv(idem::far_curve(spec, *grid, options), run.path(name + ".csv"));
      if (mode == "nn" || mode == "all")
        idem::write_csv(idem::nn_far_curve(spec, *grid, options), run.path("nn_" + name + ".csv"));
    }
  } else {
    const auto report = idem::overfit_report(real, *fake, grid, scale, options);
    grid = report.grid();
    idem::write_csv(report.real_vs_real, run.path("real_vs_real.csv"));
    idem::write_csv(report.fake_vs_real, run.path("fake_vs_real.csv"));
    idem::write_csv(report.fake_vs_fake, run.path("fake_vs_fake.csv"));
    if (mode == "nn") {
      idem::write_csv(report.nn_real_vs_real, run.path("nn_real_vs_real.csv"));
      idem::write_csv(report.nn_fake_vs_real, run.path("nn_fake_vs_real.csv"));
      idem::write_csv(report.nn_fake_vs_fake, run.path("nn_fake_vs_fake.csv"));
    }
    idem::write_json(idem::to_json(report), run.path("report.json"));
    std::cout << "overfitting: " << (report.overfitting() ? "yes" : "no")
              << "\ncollapse: " << (report.collapse() ? "yes" : "no") << '\n';
  }
  auto resolved = common_json(c, grid, scale);
  resolved["mode"] = mode;
  run.manifest(std::move(resolved));
  return 0;
}

// ---- frr / roc ----

int cmd_frr_roc(const std::string& command, const Common& c, int argc, char** argv) {
  require(c.real, "--real");
  if (c.target_far && !(*c.target_far > 0.0 && *c.target_far <= 1.0))
    idem::fail(idem::ErrorKind::invalid_argument, "--target-far must be in (0, 1]");
  Run run(command, argc, argv, c.out);
  const idem::EngineOptions options{c.workers};
  const auto scale = parse_scale(c.scale);
  const auto real = load_normalized(c.real, c.labels);
  const auto mated = idem::ComparisonSpec::within_mated(real, scale);
  const auto nonmated = idem::ComparisonSpec::within_nonmated(real, scale);
  mated.validate();

  const auto grid = c.grid.empty() ? idem::default_grid(std::vector{mated, nonmated}, idem::kDefaultGridPoints, options)
                                   : parse_grid(c.grid);
  const auto frr = idem::frr_curve(mated, grid, options);
  Json summary;
  summary["mated_total"] = frr.total;
  summary["nonmated_total"] = nonmated.expected_total();
  if (c.threshold)
    summary["frr_at_threshold"] = {{"threshold", *c.threshold},
                                   {"frr", idem::frr_at_threshold(mated, *c.threshold, options)}};
  if (c.target_far) {
    const auto op = idem::frr_at_far(mated, nonmated, *c.target_far, options);
    summary["frr_at_far"] = {{"target_far", *c.target_far}, {"threshold", op.threshold}, {"frr", op.frr}};
  }
  if (command == "frr") {
    idem::write_csv(frr, run.path("frr.csv"));
  } else {
    idem::write_csv(idem::roc_curve(mated, nonmated, grid, options), run.path("roc.csv"));
  }
  idem::write_json(summary, run.path(command + ".json"));
  std::cout << summary.dump(2) << '\n';

  auto resolved = common_json(c, grid, scale);
  resolved["target_far"] = c.target_far ? Json(*c.target_far) : Json(nullptr);
  resolved["threshold"] = c.threshold ? Json(*c.threshold) : Json(nullptr);
  run.manifest(std::move(resolved));
  return 0;
}

// ---- report ----

int cmd_report(const Common& c, int argc, char** argv) {
  require(c.real, "--real");
  require(c.fake, "--fake");
  const double target = c.target_far.value_or(1e-3);
  Run run("report", argc, argv, c.out);
  const idem::EngineOptions options{c.workers};
  const auto scale = parse_scale(c.scale);
  const auto real = load_normalized(c.real, c.labels);
  const auto fake = load_normalized(c.fake, c.fake_labels);
  std::optional<idem::ThresholdGrid> grid;
  if (!c.grid.empty()) grid = parse_grid(c.grid);

  const auto report = idem::overfit_report(real, fake, grid, scale, options);
  auto j = idem::to_json(report);

  // Operating point: the real set's threshold at the target FAR.
  const auto rr = idem::ComparisonSpec::within_nonmated(real, scale);
  const auto fr = idem::ComparisonSpec::between(fake, real, scale);
  const auto ff = idem::ComparisonSpec::within_any(fake, scale);
  const double t = idem::threshold_for_far(rr, target, options);
  const double far_rr = idem::far_at_threshold(rr, t, options);
  const double far_fr = idem::far_at_threshold(fr, t, options);
  const double far_ff = idem::far_at_threshold(ff, t, options);
  Json op;
  op["target_far"] = target;
  op["threshold"] = t;
  op["far_real_vs_real"] = far_rr;
  op["far_fake_vs_real"] = far_fr;
  op["far_fake_vs_fake"] = far_ff;
  op["distinguishable_identities_real"] = far_rr > 0 ? Json(idem::distinguishable_identities(far_rr)) : Json(nullptr);
  op["distinguishable_identities_fake"] = far_ff > 0 ? Json(idem::distinguishable_identities(far_ff)) : Json(nullptr);
  op["mode_collapse_fraction"] =
      far_rr > 0 && far_ff > 0 ? Json(idem::mode_collapse_fraction(far_rr, far_ff)) : Json(nullptr);
  Json out;
  out["operating_point"] = op;
  for (auto& [key, value] : j.items()) out[key] = value;
  idem::write_json(out, run.path("report.json"));

  std::cout << "overfitting: " << (report.overfitting() ? "yes" : "no")
            << "\ncollapse: " << (report.collapse() ? "yes" : "no") << "\noperating point: " << op.dump() << '\n';
  auto resolved = common_json(c, report.grid(), scale);
  resolved["target_far"] = target;
  run.manifest(std::move(resolved));
  return 0;
}

// ---- synth ----

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out, int argc,
              char** argv) {
  auto cfg = config_path.empty() ? idem::config::SynthConfig{} : idem::config::synth_from_json(idem::config::load(config_path));
  if (seed) cfg.mixture.seed = *seed;
  Run run("synth", argc, argv, out);
  const auto real = idem::gen_identity_clouds(cfg.mixture, "real");
  idem::save_embeddings(real, run.path("real.bin"));
  run.path("real.bin.labels");
  if (cfg.fake) {
    const auto fake = idem::make_fake_set(real, cfg.fake->pathology, cfg.fake->rows, cfg.fake->seed, "fake");
    idem::save_embeddings(fake, run.path("fake.bin"));
  }
  run.manifest(idem::config::to_json(cfg));
  return 0;
}

// ---- train ----

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> steps,
              const std::string& data, const std::string& labels, const std::string& out, int argc, char** argv) {
  auto cfg = config_path.empty() ? idem::config::TrainConfig{} : idem::config::train_from_json(idem::config::load(config_path));
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  if (!data.empty()) cfg.data_path = data;
  if (!labels.empty()) cfg.labels_path = labels;
  cfg.training.validate();

  Run run("train", argc, argv, out);
  const auto set = cfg.data_path ? load_normalized(*cfg.data_path, cfg.labels_path.value_or(""))
                                 : idem::gen_identity_clouds(cfg.mixture, "train");
  cfg.architecture.data_dim = set.dim();
  const auto model = idem::gan::make_sdgan(cfg.architecture, cfg.seed);
  const auto result = idem::gan::train(model, set, cfg.training, cfg.steps, cfg.seed + 1, {.workers = 1});
  idem::gan::save_checkpoint(result.model, run.path("model.sdgt"));
  idem::io_detail::write_file(run.path("trace.csv"), idem::gan::trace_csv(result.trace));
  auto resolved = idem::config::to_json(cfg);
  resolved["workers"] = 1;
  run.manifest(std::move(resolved));
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    std::cout << "steps: " << cfg.steps << "  loss_d: " << last.loss_d << "  loss_g: " << last.loss_g << '\n';
  }
  return 0;
}

// ---- gen ----

int cmd_gen(const std::string& checkpoint, std::size_t k, std::size_t m, std::uint64_t seed, const std::string& out,
            int argc, char** argv) {
  require(checkpoint, "--checkpoint");
  Run run("gen", argc, argv, out);
  const auto model = idem::gan::load_checkpoint(checkpoint);
  const auto set = idem::gan::generate_identity_sets(model, k, m, seed, "generated");
  idem::save_embeddings(set, run.path("generated.bin"));
  run.path("generated.bin.labels");
  run.manifest({{"checkpoint", checkpoint}, {"K", k}, {"m", m}, {"seed", seed}});
  std::cout << "rows: " << set.size() << "  identities: " << set.identity_count() << '\n';
  return 0;
}

void add_eval_options(CLI::App* sub, Common& c, bool fake, bool mode, bool target, bool threshold) {
  sub->add_option("--real", c.real, "Real embedding file (.bin or .csv)");
  sub->add_option("--labels", c.labels, "Label file for --real (default: sidecar)");
  if (fake) {
    sub->add_option("--fake", c.fake, "Synthetic embedding file");
    sub->add_option("--fake-labels", c.fake_labels, "Label file for --fake");
  }
  if (mode) sub->add_option("--mode", c.mode, "within | between | nn | all");
  sub->add_option("--grid", c.grid, "min:max:points or comma-separated thresholds");
  sub->add_option("--scale", c.scale, "Score scale alpha:beta");
  if (target) sub->add_option("--target-far", c.target_far, "Target false acceptance rate");
  if (threshold) sub->add_option("--threshold", c.threshold, "Operating threshold");
  sub->add_option("--workers", c.workers, "Worker threads (0 = all cores)");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", c.config, "JSON object of option values");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity overfitting and mode-collapse statistics for generative models"};
  app.set_version_flag("--version", idem::kVersion);
  app.require_subcommand(1);

  Common far_opts, frr_opts, roc_opts, report_opts;
  auto* far = app.add_subcommand("far", "False acceptance curves within and between real and synthetic sets");
  add_eval_options(far, far_opts, true, true, false, false);
  auto* frr = app.add_subcommand("frr", "False rejection curve of a labeled set");
  add_eval_options(frr, frr_opts, false, false, true, true);
  auto* roc = app.add_subcommand("roc", "ROC of a labeled set");
  add_eval_options(roc, roc_opts, false, false, true, true);
  auto* report = app.add_subcommand("report", "Overfitting and collapse report with operating-point arithmetic");
  add_eval_options(report, report_opts, true, false, true, false);

  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate synthetic identity clouds and pathological fake sets");
  synth->add_option("--config", synth_config, "Synthesis spec (JSON)");
  synth->add_option("--seed", synth_seed, "Override the mixture seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string train_config, train_out, train_data, train_labels;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> train_steps;
  auto* train = app.add_subcommand("train", "Train the SD-GAN, with or without the triplet term");
  train->add_option("--config", train_config, "Training config (JSON)");
  train->add_option("--seed", train_seed, "Override the training seed");
  train->add_option("--steps", train_steps, "Override the number of training steps");
  train->add_option("--real", train_data, "Labeled training embeddings (overrides the config data)");
  train->add_option("--labels", train_labels, "Label file for --real");
  train->add_option("--out", train_out, "Output directory")->required();

  std::string gen_checkpoint, gen_out;
  std::size_t gen_k = 1000, gen_m = 10;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate identity sets from a trained checkpoint");
  gen->add_option("--checkpoint", gen_checkpoint, "Model checkpoint")->required();
  gen->add_option("--K", gen_k, "Number of identities")->capture_default_str();
  gen->add_option("--m", gen_m, "Images per identity")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Sampling seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (far->parsed()) {
      apply_config(*far, far_opts.config);
      return cmd_far(far_opts, argc, argv);
    }
    if (frr->parsed()) {
      apply_config(*frr, frr_opts.config);
      return cmd_frr_roc("frr", frr_opts, argc, argv);
    }
    if (roc->parsed()) {
      apply_config(*roc, roc_opts.config);
      return cmd_frr_roc("roc", roc_opts, argc, argv);
    }
    if (report->parsed()) {
      apply_config(*report, report_opts.config);
      return cmd_report(report_opts, argc, argv);
    }
    if (synth->parsed()) return cmd_synth(synth_config, synth_seed, synth_out, argc, argv);
    if (train->parsed())
      return cmd_train(train_config, train_seed, train_steps, train_data, train_labels, train_out, argc, argv);
    if (gen->parsed()) return cmd_gen(gen_checkpoint, gen_k, gen_m, gen_seed, gen_out, argc, argv);
  } catch (const idem::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
