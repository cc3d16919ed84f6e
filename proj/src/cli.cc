#include "hydra/cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hydra {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void dump_config(const RunConfig& cfg) {
  write_text(fs::path(cfg.out_dir) / kConfigDumpName, cfg.dump());
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> predicate_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back(i < kPredicateNames.size() ? kPredicateNames[i] : "rel" + std::to_string(i));
  }
  return names;
}

RelationModel load_checked(const RunConfig& cfg, const std::string& checkpoint) {
  RelationModel model = RelationModel::load(checkpoint);
  if (!(model.config() == cfg.model)) {
    throw ConfigError("checkpoint " + checkpoint +
                      " was trained with a different model configuration");
  }
  return model;
}

void check_scenes(const RunConfig& cfg, const Dataset& d, const std::string& path) {
  for (const SceneSample& s : d) {
    if (s.grid_h != cfg.model.grid_h || s.grid_w != cfg.model.grid_w ||
        s.tokens.cols() != cfg.model.token_dim) {
      throw ConfigError("scene " + s.id + " in " + path +
                        " does not match the configured grid or token_dim");
    }
  }
}

Dataset load_for(const RunConfig& cfg, const std::string& path) {
  Dataset d = load_dataset(path);
  check_scenes(cfg, d, path);
  return d;
}

TrainResult train_into(const RunConfig& cfg, const Dataset& train_set,
                       const Dataset& val_set) {
  cfg.validate();
  const fs::path dir(cfg.out_dir);
  dump_config(cfg);
  std::string log;
  try {
    TrainResult r = train(cfg, train_set, val_set, [&](const EpochLog& e) {
      log += e.to_json() + "\n";
      return true;
    });
    write_text(dir / kTrainLogName, log);
    r.best.save((dir / kBestCheckpointName).string());
    r.final.save((dir / kFinalCheckpointName).string());
    return r;
  } catch (const NonFiniteLossError& e) {
    write_text(dir / kTrainLogName, log);
    write_text(dir / kNanDumpName, e.dump() + "\n");
    throw;
  }
}

}  // namespace

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void apply_vg_split(RunConfig& cfg, std::size_t total) {
  if (total < 88) throw ConfigError("vg split needs at least 88 scenes");
  cfg.val_count = total * 5 / 88;
  cfg.test_count = total * 26 / 88;
  cfg.train_count = total - cfg.val_count - cfg.test_count;
}

std::string cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  cfg.gen.validate();
  nlohmann::ordered_json manifest;
  manifest["data_seed"] = cfg.data_seed;
  manifest["embedding_seed"] = cfg.gen.embedding_seed;
  struct Split {
    const char* name;
    std::uint64_t seed;
    std::size_t count;
    const std::string& path;
  };
  // Splits draw from disjoint seed ranges.
  const Split splits[] = {
      {"train", cfg.data_seed, cfg.train_count, cfg.train_path},
      {"val", cfg.data_seed + 1000000, cfg.val_count, cfg.val_path},
      {"test", cfg.data_seed + 2000000, cfg.test_count, cfg.test_path},
  };
  for (const Split& s : splits) {
    const Dataset d = generate_dataset(s.seed, s.count, cfg.gen);
    if (fs::path(s.path).has_parent_path()) {
      fs::create_directories(fs::path(s.path).parent_path());
    }
    save_dataset(s.path, d);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(content_hash(read_text(s.path))));
    std::size_t triplets = 0;
    for (const auto& sc : d) triplets += sc.triplets.size();
    manifest["splits"][s.name] = {{"path", s.path},
                                  {"first_seed", s.seed},
                                  {"count", s.count},
                                  {"triplets", triplets},
                                  {"fnv1a", hash}};
  }
  const std::string text = manifest.dump(2) + "\n";
  dump_config(cfg);
  write_text(fs::path(cfg.out_dir) / kManifestName, text);
  return text;
}

TrainResult cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const Dataset train_set = load_for(cfg, cfg.train_path);
  const Dataset val_set = load_for(cfg, cfg.val_path);
  return train_into(cfg, train_set, val_set);
}

MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
                       const std::string& dataset) {
  cfg.validate();
  const RelationModel model = load_checked(cfg, checkpoint);
  const Dataset d = load_for(cfg, dataset);
  const MetricsReport r = evaluate_model(model, d, cfg.eval_protocol);
  const auto names = predicate_names(cfg.model.n_relation_classes);
  const fs::path dir(cfg.out_dir);
  dump_config(cfg);
  write_text(dir / "eval.json", r.to_json(names) + "\n");
  write_text(dir / "eval_per_predicate.csv", r.per_predicate_csv(names));
  return r;
}

AnalysisReport cmd_analyze(const RunConfig& cfg, const std::string& checkpoint,
                           const std::string& dataset) {
  cfg.validate();
  const RelationModel model = load_checked(cfg, checkpoint);
  const Dataset d = load_for(cfg, dataset);
  const AnalysisReport r = analyze(model, d, cfg.seed);
  dump_config(cfg);
  write_text(fs::path(cfg.out_dir) / "analysis.json", r.to_json() + "\n");
  return r;
}

RunConfig with_sweep_value(const RunConfig& cfg, const std::string& param, double value) {
  RunConfig c = cfg;
  const std::string v = format_value(value);
  // Sweepable parameters share their names with config keys.
  if (param != "T" && param != "n_queries" && param != "ratio" && param != "epochs") {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (expected T, n_queries, ratio or epochs)");
  }
  c.set(param, v);
  c.out_dir = (fs::path(cfg.out_dir) / (param + "_" + v)).string();
  return c;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.sweep_values.empty()) throw ConfigError("sweep_values is empty");
  with_sweep_value(cfg, cfg.sweep_param, cfg.sweep_values.front());
  const Dataset train_set = load_for(cfg, cfg.train_path);
  const Dataset val_set = load_for(cfg, cfg.val_path);
  const Dataset test_set = load_for(cfg, cfg.test_path);
  dump_config(cfg);

  std::vector<SweepRow> rows;
  for (double value : cfg.sweep_values) {
    SweepRow row;
    row.value = value;
    try {
      const RunConfig cell = with_sweep_value(cfg, cfg.sweep_param, value);
      const TrainResult t = train_into(cell, train_set, val_set);
      row.best_epoch = t.best_epoch;
      row.report = evaluate_model(t.best, test_set, cell.eval_protocol);
      const auto names = predicate_names(cell.model.n_relation_classes);
      write_text(fs::path(cell.out_dir) / "eval.json", row.report.to_json(names) + "\n");
    } catch (const std::exception& e) {
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }
  write_text(fs::path(cfg.out_dir) / "sweep.csv", sweep_csv(cfg.sweep_param, rows));
  return rows;
}

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
  std::string out = param +
                    ",R@20,R@50,R@100,mR@20,mR@50,mR@100,F@20,F@50,F@100,"
                    "wmAP_rel,wmAP_phr,score_wtd,best_epoch,status\n";
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * v);
    return std::string(buf);
  };
  for (const SweepRow& r : rows) {
    out += format_value(r.value);
    const bool ok = r.status == "ok";
    for (const auto* arr : {&r.report.recall, &r.report.mean_recall, &r.report.f_recall}) {
      for (double v : *arr) out += "," + (ok ? cell(v) : std::string());
    }
    for (const auto* opt : {&r.report.wmap_rel, &r.report.wmap_phr, &r.report.score_wtd}) {
      out += "," + (ok && opt->has_value() ? cell(**opt) : std::string());
    }
    out += "," + (ok ? std::to_string(r.best_epoch) : std::string());
    // Quote the status so error text with commas stays one cell.
    std::string status;
    for (char ch : r.status) status += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    out += ",\"" + status + "\"\n";
  }
  return out;
}

}  // namespace hydra
