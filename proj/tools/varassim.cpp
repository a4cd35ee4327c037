/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// varassim command line: data generation, training, reconstruction, baselines,
// evaluation and plotting over an experiment directory (truth/, obs/, recon/).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varassim/errors.hpp"
#include "varassim/evaluation.hpp"
#include "varassim/experiment.hpp"

namespace fs = std::filesystem;
using namespace varassim;

namespace {

struct ConfigArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App * app, ConfigArgs & a) {
  app->add_option("--config", a.config, "Experiment config (JSON, may include others)");
  app->add_option("--preset", a.preset, "Start from a named preset");
  app->add_option("--seed", a.seed, "Override the experiment seed");
}

bool has_config(const ConfigArgs & a) { return !a.config.empty() || !a.preset.empty() || a.seed.has_value(); }

ExperimentConfig resolve_config(const ConfigArgs & a, const ExperimentConfig * fallback = nullptr) {
  Json doc = fallback ? to_json(*fallback) : Json::object();
  if (!a.preset.empty()) doc = preset_json(a.preset);
  if (!a.config.empty()) merge_config(doc, load_config_document(a.config));
  if (a.seed) doc["seed"] = *a.seed;
  return parse_experiment_config(doc);
}

DayRange range_named(const ExperimentConfig & cfg, const std::string & name) {
  if (name == "train") return cfg.split.train;
  if (name == "validation") return cfg.split.validation;
  if (name == "test") return cfg.split.test;
  if (name == "all") return {0, cfg.truth.grid.time_steps};
  throw ConfigError("unknown range '" + name + "' (expected train, validation, test or all)");
}

void write_recon(const fs::path & out, const SpaceTimeField & field, const DayRange & range) {
  fs::create_directories(out);
  save_field(field_file(out, "ssh"), field, nullptr, range.begin);
}

// Reconstruction directories are named after the method they hold.
std::vector<NamedField> load_recons(const std::vector<std::string> & dirs, int & start_day) {
  std::vector<NamedField> out;
  std::optional<int> start;
  for (const std::string & d : dirs) {
    const fs::path dir = fs::path(d).lexically_normal();
    const std::string name = (dir.has_filename() ? dir.filename() : dir.parent_path().filename()).string();
    LoadedField f = load_field(field_file(dir, "ssh"));
    const int s = static_cast<int>(f.start_day);
    if (start && *start != s) throw ConfigError("reconstructions cover different periods");
    if (start && out.front().field.grid() != f.field.grid()) {
      throw ConfigError("reconstructions have different grids");
    }
    start = s;
    out.push_back({name, f.field});
  }
  start_day = start.value_or(0);
  return out;
}

std::string default_log(const std::string & ckpt) { return ckpt + ".log.jsonl"; }

TrainedModel train_and_save(const ExperimentData & data, const ExperimentConfig & cfg, const Variant & v,
                            const fs::path & ckpt, const fs::path & log_path) {
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open training log '" + log_path.string() + "'");
  TrainedModel m = train_variant(data, cfg, v, &log);
  save_model(m, ckpt);
  return m;
}

void print_reports(const std::vector<MetricReport> & reports) { std::cout << report_csv(reports); }

}  // namespace

int main(int argc, char ** argv) {
  CLI::App app{"varassim: trainable variational reconstruction of sea-surface height"};
  app.require_subcommand(1);
  bool force = false;

  // gen-data
  ConfigArgs gen_cfg;
  std::string gen_out;
  auto * gen = app.add_subcommand("gen-data", "Generate truth, observations and the OI product");
  add_config_options(gen, gen_cfg);
  gen->add_option("--out", gen_out, "Experiment directory")->required();
  gen->add_flag("--force", force, "Overwrite existing outputs");

  // train
  ConfigArgs train_cfg;
  std::string train_data, train_out, train_variant_name, train_log;
  auto * tr = app.add_subcommand("train", "Train one model variant");
  add_config_options(tr, train_cfg);
  tr->add_option("--data", train_data, "Experiment directory from gen-data")->required();
  tr->add_option("--out", train_out, "Checkpoint path")->required();
  tr->add_option("--variant", train_variant_name, "Variant name (default: the first, else the base model)");
  tr->add_option("--log", train_log, "Training log (default: <out>.log.jsonl)");
  tr->add_flag("--force", force, "Overwrite existing outputs");

  // reconstruct
  std::string rec_model, rec_obs, rec_out, rec_range = "test";
  int rec_factor = 1;
  auto * rec = app.add_subcommand("reconstruct", "Reconstruct SSH with a trained model");
  rec->add_option("--model", rec_model, "Checkpoint")->required();
  rec->add_option("--obs", rec_obs, "Experiment directory holding obs/")->required();
  rec->add_option("--out", rec_out, "Output directory")->required();
  rec->add_option("--range", rec_range, "train, validation, test or all");
  rec->add_option("--sst-factor", rec_factor, "Coarsen SST by this factor first");
  rec->add_flag("--force", force, "Overwrite existing outputs");

  // baseline
  ConfigArgs base_cfg;
  std::string base_method, base_data, base_out, base_range = "test";
  bool base_use_sst = false;
  auto * base = app.add_subcommand("baseline", "OI, direct U-Net or SQG reconstruction");
  add_config_options(base, base_cfg);
  base->add_option("--method", base_method, "oi, unet or sqg")->required()->check(CLI::IsMember({"oi", "unet", "sqg"}));
  base->add_option("--data", base_data, "Experiment directory")->required();
  base->add_option("--out", base_out, "Output directory")->required();
  base->add_option("--range", base_range, "train, validation, test or all");
  base->add_flag("--use-sst", base_use_sst, "Feed SST to the direct U-Net");
  base->add_flag("--force", force, "Overwrite existing outputs");

  // eval
  std::string eval_truth, eval_baseline = "oi", eval_out;
  std::vector<std::string> eval_recon;
  std::optional<int> eval_day;
  auto * ev = app.add_subcommand("eval", "Score reconstructions against the truth");
  ev->add_option("--truth", eval_truth, "Experiment directory holding truth/")->required();
  ev->add_option("--recon", eval_recon, "Reconstruction directories")->required();
  ev->add_option("--baseline", eval_baseline, "Reference method for the gain columns");
  ev->add_option("--out", eval_out, "Report directory")->required();
  ev->add_option("--day", eval_day, "Day (inside the evaluated period) for the maps");
  ev->add_flag("--force", force, "Overwrite existing outputs");

  // features
  std::string feat_model, feat_data, feat_out;
  int feat_window = 0;
  auto * feat = app.add_subcommand("features", "Export learned SST feature maps");
  feat->add_option("--model", feat_model, "Checkpoint")->required();
  feat->add_option("--data", feat_data, "Experiment directory")->required();
  feat->add_option("--window", feat_window, "Start day of the window")->required();
  feat->add_option("--out", feat_out, "Output directory")->required();
  feat->add_flag("--force", force, "Overwrite existing outputs");

  // plot
  std::string plot_truth, plot_out, plot_model;
  std::vector<std::string> plot_recon;
  int plot_day = 0;
  std::optional<int> plot_window;
  auto * pl = app.add_subcommand("plot", "Gradient-norm, Laplacian and feature maps");
  pl->add_option("--truth", plot_truth, "Experiment directory holding truth/")->required();
  pl->add_option("--recon", plot_recon, "Reconstruction directories")->required();
  pl->add_option("--day", plot_day, "Day inside the reconstructed period")->required();
  pl->add_option("--out", plot_out, "Output directory")->required();
  pl->add_option("--model", plot_model, "Checkpoint whose SST features are also drawn");
  pl->add_option("--window", plot_window, "Start day of the feature window");
  pl->add_flag("--force", force, "Overwrite existing outputs");

  // run
  ConfigArgs run_cfg;
  std::string run_out;
  auto * run = app.add_subcommand("run", "Full pipeline: gen-data, train, reconstruct, baselines, eval");
  add_config_options(run, run_cfg);
  run->add_option("--out", run_out, "Run directory (default: <output_root>/<run_name>)");
  run->add_flag("--force", force, "Overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      const ExperimentConfig cfg = resolve_config(gen_cfg);
      check_writable(gen_out, force);
      const ExperimentData data = generate_data(cfg, &std::cerr);
      save_data(gen_out, data, cfg);
      std::cerr << "data hash " << data.hash << "\n";
    } else if (*tr) {
      const LoadedData loaded = load_data(train_data);
      const ExperimentConfig cfg = has_config(train_cfg) ? resolve_config(train_cfg) : loaded.config;
      Variant v{"model", cfg.model};
      if (!train_variant_name.empty()) v = cfg.variant(train_variant_name);
      else if (!cfg.variants.empty()) v = cfg.variants.front();
      const std::string log = train_log.empty() ? default_log(train_out) : train_log;
      check_writable(train_out, force);
      check_writable(log, force);
      const TrainedModel m = train_and_save(loaded.data, cfg, v, train_out, log);
      std::cerr << "variant " << v.name << ": best epoch " << m.best_epoch << "\n";
    } else if (*rec) {
      const LoadedData loaded = load_data(rec_obs);
      const TrainedModel m = load_model(rec_model);
      if (m.time_steps != loaded.config.window_length) {
        throw ConfigError("model window length differs from the data configuration");
      }
      const DayRange r = range_named(loaded.config, rec_range);
      check_writable(rec_out, force);
      write_recon(rec_out, reconstruct_range(loaded.data, m, r, rec_factor), r);
    } else if (*base) {
      const LoadedData loaded = load_data(base_data);
      const ExperimentConfig cfg = has_config(base_cfg) ? resolve_config(base_cfg) : loaded.config;
      const DayRange r = range_named(cfg, base_range);
      check_writable(base_out, force);
      if (base_method == "oi") {
        write_recon(base_out, oi_range(loaded.data, r), r);
      } else if (base_method == "sqg") {
        write_recon(base_out, sqg_range(loaded.data, cfg, r), r);
      } else {
        Variant v{"unet", cfg.model};
        v.model.kind = ModelKind::unet_direct;
        v.model.unet.use_sst = base_use_sst;
        const fs::path ckpt = fs::path(base_out) / "model.ckpt";
        const TrainedModel m = train_and_save(loaded.data, cfg, v, ckpt, default_log(ckpt.string()));
        write_recon(base_out, reconstruct_range(loaded.data, m, r), r);
      }
    } else if (*ev) {
      const LoadedData loaded = load_data(eval_truth);
      int start = 0;
      std::vector<NamedField> methods = load_recons(eval_recon, start);
      const SpaceTimeField truth = truth_range(loaded.data, {start, start + methods.front().field.grid().time_steps});
      check_writable(eval_out, force);
      EvalConfig ecfg = loaded.config.eval;
      const std::vector<MetricReport> reports = report(methods, truth, eval_baseline, ecfg);
      fs::create_directories(eval_out);
      std::ofstream(fs::path(eval_out) / "report.csv") << report_csv(reports);
      std::ofstream(fs::path(eval_out) / "report.json") << report_json(reports).dump(2) << "\n";
      methods.insert(methods.begin(), NamedField{"truth", truth});
      const int day = eval_day.value_or(std::min(loaded.config.plot_day, truth.grid().time_steps - 1));
      plot_fields(methods, day, fs::path(eval_out) / "maps");
      print_reports(reports);
    } else if (*feat) {
      const LoadedData loaded = load_data(feat_data);
      const TrainedModel m = load_model(feat_model);
      const Tensor f = feature_maps(loaded.data, m, feat_window);
      check_writable(feat_out, force);
      fs::create_directories(feat_out);
      const SpaceTimeGrid g = loaded.data.truth.ssh.grid().with_time_steps(m.time_steps);
      const std::size_t n = static_cast<std::size_t>(g.time_steps) * g.width * g.width;
      for (int k = 0; k < f.dim(0); ++k) {
        Tensor values(g.shape());
        std::copy(f.data() + k * n, f.data() + (k + 1) * n, values.data());
        save_field(field_file(feat_out, "feature_" + std::to_string(k)),
                   SpaceTimeField(g, values, "sst_feature_" + std::to_string(k), "1"), nullptr, feat_window);
      }
    } else if (*pl) {
      const LoadedData loaded = load_data(plot_truth);
      int start = 0;
      std::vector<NamedField> methods = load_recons(plot_recon, start);
      const SpaceTimeField truth = truth_range(loaded.data, {start, start + methods.front().field.grid().time_steps});
      methods.insert(methods.begin(), NamedField{"truth", truth});
      std::optional<TrainedModel> m;
      if (!plot_model.empty()) m = load_model(plot_model);
      check_writable(plot_out, force);
      PlotSet ps = plot_fields(methods, plot_day, plot_out);
      if (m) {
        const int T = m->time_steps;
        const int w = plot_window.value_or(std::max(0, start + plot_day - T / 2));
        for (fs::path & p : write_feature_pngs(feature_maps(loaded.data, *m, w), plot_out, "feature")) {
          ps.files.push_back(std::move(p));
        }
      }
      std::cerr << ps.files.size() << " maps written\n";
    } else if (*run) {
      ExperimentConfig cfg = resolve_config(run_cfg);
      const fs::path out = run_out.empty() ? cfg.output_root / cfg.run_name : fs::path(run_out);
      const ExperimentResult res = run_experiment(cfg, out, RunOptions{force, &std::cerr});
      print_reports(res.reports);
      if (!res.sst_reports.empty()) print_reports(res.sst_reports);
    }
  } catch (const ConfigError & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const StageError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception & e) {
    std::cerr << "error: stage '" << command << "' failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
