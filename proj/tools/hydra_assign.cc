// hydra-assign: data generation, training, evaluation, diagnostics, sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hydra/cli.h"

namespace {

using namespace hydra;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string dataset;
  std::size_t vg_split_total = 0;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
  for (const auto& kv : o.overrides) cfg.apply_override(kv);
  cfg.validate();
  return cfg;
}

std::string default_checkpoint(const RunConfig& cfg, const Options& o) {
  if (!o.checkpoint.empty()) return o.checkpoint;
  return (std::filesystem::path(cfg.out_dir) / kBestCheckpointName).string();
}

int run(const std::string& command, const Options& o) {
  RunConfig cfg = resolve(o);
  if (command == "gen-data") {
    if (o.vg_split_total > 0) apply_vg_split(cfg, o.vg_split_total);
    std::cout << cmd_gen_data(cfg);
  } else if (command == "train") {
    const TrainResult r = cmd_train(cfg);
    std::printf("trained %zu epochs; best epoch %zu; checkpoints in %s\n", r.log.size(),
                r.best_epoch, cfg.out_dir.c_str());
  } else if (command == "eval") {
    const MetricsReport r =
        cmd_eval(cfg, default_checkpoint(cfg, o), o.dataset.empty() ? cfg.test_path : o.dataset);
    std::printf("R@20/50/100 %.2f %.2f %.2f  mR@20/50/100 %.2f %.2f %.2f\n",
                100 * r.recall[0], 100 * r.recall[1], 100 * r.recall[2],
                100 * r.mean_recall[0], 100 * r.mean_recall[1], 100 * r.mean_recall[2]);
  } else if (command == "analyze") {
    const AnalysisReport r =
        cmd_analyze(cfg, default_checkpoint(cfg, o), o.dataset.empty() ? cfg.val_path : o.dataset);
    std::cout << r.to_json() << "\n";
  } else if (command == "sweep") {
    std::cout << sweep_csv(cfg.sweep_param, cmd_sweep(cfg));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid relation assignment toolkit"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value config file");
    sub->add_option("--override", o.overrides, "key=value, applied after --config")
        ->allow_extra_args(false);
  };
  auto* gen = app.add_subcommand("gen-data", "write train/val/test shards and a manifest");
  add_common(gen);
  gen->add_option("--vg-split", o.vg_split_total,
                  "total scenes split 57:5:26 into train/val/test");
  auto* tr = app.add_subcommand("train", "train the configured mode");
  add_common(tr);
  auto* ev = app.add_subcommand("eval", "score a checkpoint");
  add_common(ev);
  auto* an = app.add_subcommand("analyze", "diversity and query-distance diagnostics");
  add_common(an);
  for (auto* sub : {ev, an}) {
    sub->add_option("--checkpoint", o.checkpoint, "defaults to <out_dir>/best.ckpt");
    sub->add_option("--dataset", o.dataset, "JSONL scenes; eval defaults to test_path");
  }
  auto* sw = app.add_subcommand("sweep", "train+eval once per sweep value, CSV out");
  add_common(sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GenerationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << " (batch dump in " << kNanDumpName << ")\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
