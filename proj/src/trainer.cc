#include "hydra/trainer.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hydra/ops.h"

namespace hydra {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key +
                      "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define HYDRA_SIZE(name, member)                                                \
  Field {                                                                       \
    name,                                                                       \
        [](RunConfig& c, const std::string& v) {                                \
          c.member = static_cast<std::size_t>(parse_uint(name, v));             \
        },                                                                      \
        [](const RunConfig& c) { return std::to_string(c.member); }             \
  }
#define HYDRA_REAL(name, member)                                                \
  Field {                                                                       \
    name, [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                        \
  }
#define HYDRA_TEXT(name, member)                                                \
  Field {                                                                       \
    name, [](RunConfig& c, const std::string& v) { c.member = v; },             \
        [](const RunConfig& c) { return c.member; }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"mode",
            [](RunConfig& c, const std::string& v) { c.mode = parse_train_mode(v); },
            [](const RunConfig& c) { return to_string(c.mode); }},
      Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      HYDRA_SIZE("epochs", epochs),
      HYDRA_REAL("lr", lr),
      HYDRA_SIZE("batch_size", batch_size),
      Field{"aux_loss",
            [](RunConfig& c, const std::string& v) { c.aux_loss = parse_bool("aux_loss", v); },
            [](const RunConfig& c) { return std::string(c.aux_loss ? "true" : "false"); }},
      HYDRA_REAL("grad_clip", grad_clip),
      HYDRA_SIZE("n_queries", model.n_queries),
      HYDRA_SIZE("d_model", model.d_model),
      HYDRA_SIZE("n_layers", model.n_layers),
      HYDRA_SIZE("n_heads", model.n_heads),
      HYDRA_SIZE("ffn_dim", model.ffn_dim),
      HYDRA_REAL("w_cls", loss.cls),
      HYDRA_REAL("w_rel", loss.rel),
      HYDRA_REAL("w_l1", loss.l1),
      HYDRA_REAL("w_giou", loss.giou),
      HYDRA_REAL("ratio", loss.ratio_o2m),
      HYDRA_REAL("focal_alpha", loss.focal_alpha),
      HYDRA_REAL("focal_gamma", loss.focal_gamma),
      HYDRA_REAL("cost_cls", cost.cls),
      HYDRA_REAL("cost_rel", cost.rel),
      HYDRA_REAL("cost_l1", cost.l1),
      HYDRA_REAL("cost_giou", cost.giou),
      HYDRA_REAL("T", o2m.threshold),
      Field{"threshold_mode",
            [](RunConfig& c, const std::string& v) {
              if (v == "raw") {
                c.o2m.mode = ThresholdMode::kRaw;
              } else if (v == "normalized") {
                c.o2m.mode = ThresholdMode::kNormalized;
              } else {
                throw ConfigError("threshold_mode must be raw or normalized, got '" +
                                  v + "'");
              }
            },
            [](const RunConfig& c) {
              return std::string(c.o2m.mode == ThresholdMode::kRaw ? "raw" : "normalized");
            }},
      HYDRA_SIZE("k", o2m.k),
      Field{"eval_protocol",
            [](RunConfig& c, const std::string& v) {
              if (v == "vg") {
                c.eval_protocol = Protocol::kVisualGenome;
              } else if (v == "oi") {
                c.eval_protocol = Protocol::kOpenImages;
              } else {
                throw ConfigError("eval_protocol must be vg or oi, got '" + v + "'");
              }
            },
            [](const RunConfig& c) {
              return std::string(c.eval_protocol == Protocol::kVisualGenome ? "vg" : "oi");
            }},
      HYDRA_SIZE("eval_limit", eval_limit),
      HYDRA_TEXT("train_path", train_path),
      HYDRA_TEXT("val_path", val_path),
      HYDRA_TEXT("test_path", test_path),
      HYDRA_TEXT("out_dir", out_dir),
      // Scene geometry and vocabularies are shared by data and model.
      Field{"grid_h",
            [](RunConfig& c, const std::string& v) {
              c.gen.grid_h = c.model.grid_h = parse_uint("grid_h", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.grid_h); }},
      Field{"grid_w",
            [](RunConfig& c, const std::string& v) {
              c.gen.grid_w = c.model.grid_w = parse_uint("grid_w", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.grid_w); }},
      Field{"token_dim",
            [](RunConfig& c, const std::string& v) {
              c.gen.token_dim = c.model.token_dim = parse_uint("token_dim", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.token_dim); }},
      Field{"n_entity_classes",
            [](RunConfig& c, const std::string& v) {
              c.gen.n_entity_classes = c.model.n_entity_classes =
                  parse_uint("n_entity_classes", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.n_entity_classes); }},
      Field{"n_relation_classes",
            [](RunConfig& c, const std::string& v) {
              c.gen.n_relation_classes = c.model.n_relation_classes =
                  parse_uint("n_relation_classes", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.n_relation_classes); }},
      HYDRA_SIZE("min_entities", gen.min_entities),
      HYDRA_SIZE("max_entities", gen.max_entities),
      HYDRA_SIZE("max_extent", gen.max_extent),
      HYDRA_REAL("triplets_per_image", gen.triplets_per_image),
      HYDRA_SIZE("max_triplets", gen.max_triplets),
      HYDRA_REAL("noise", gen.noise),
      HYDRA_REAL("predicate_skew", gen.predicate_skew),
      Field{"box_cues",
            [](RunConfig& c, const std::string& v) { c.gen.box_cues = parse_bool("box_cues", v); },
            [](const RunConfig& c) { return std::string(c.gen.box_cues ? "true" : "false"); }},
      Field{"embedding_seed",
            [](RunConfig& c, const std::string& v) {
              c.gen.embedding_seed = parse_uint("embedding_seed", v);
            },
            [](const RunConfig& c) { return std::to_string(c.gen.embedding_seed); }},
      Field{"data_seed",
            [](RunConfig& c, const std::string& v) { c.data_seed = parse_uint("data_seed", v); },
            [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      HYDRA_SIZE("train_count", train_count),
      HYDRA_SIZE("val_count", val_count),
      HYDRA_SIZE("test_count", test_count),
      HYDRA_TEXT("sweep_param", sweep_param),
      Field{"sweep_values",
            [](RunConfig& c, const std::string& v) {
              c.sweep_values.clear();
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                c.sweep_values.push_back(parse_double("sweep_values", trim(item)));
              }
            },
            [](const RunConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.sweep_values.size(); ++i) {
                if (i) out += ",";
                out += fmt(c.sweep_values[i]);
              }
              return out;
            }},
  };
  return table;
}

#undef HYDRA_SIZE
#undef HYDRA_REAL
#undef HYDRA_TEXT

bool all_finite(const LossBreakdown& b) {
  return std::isfinite(b.entity_cls) && std::isfinite(b.relation_cls) &&
         std::isfinite(b.box_l1) && std::isfinite(b.box_giou) && std::isfinite(b.total);
}

nlohmann::ordered_json breakdown_json(const LossBreakdown& b) {
  nlohmann::ordered_json j;
  j["entity_cls"] = b.entity_cls;
  j["relation_cls"] = b.relation_cls;
  j["box_l1"] = b.box_l1;
  j["box_giou"] = b.box_giou;
  j["total"] = b.total;
  return j;
}

LossBreakdown scaled(LossBreakdown b, double s) {
  b.entity_cls *= s;
  b.relation_cls *= s;
  b.box_l1 *= s;
  b.box_giou *= s;
  b.total *= s;
  return b;
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaselineO2O:
      return "baseline_o2o";
    case TrainMode::kVanillaHybrid:
      return "vanilla_hybrid";
    case TrainMode::kHydraComplete:
      return "hydra_complete";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "baseline_o2o") return TrainMode::kBaselineO2O;
  if (s == "vanilla_hybrid") return TrainMode::kVanillaHybrid;
  if (s == "hydra_complete") return TrainMode::kHydraComplete;
  throw ConfigError("unknown mode '" + s +
                    "' (expected baseline_o2o, vanilla_hybrid or hydra_complete)");
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& component) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : component) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::validate() const {
  try {
    model.validate();
    gen.validate();
  } catch (const GenerationError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
  if (o2m.k < 1) throw ConfigError("k must be >= 1");
  if (o2m.threshold < 0.0) throw ConfigError("T must be >= 0");
  if (loss.ratio_o2m < 0.0) throw ConfigError("ratio must be >= 0");
  if (model.n_queries < 2) throw ConfigError("n_queries must be >= 2");
  if (model.n_queries < gen.max_triplets) {
    throw ConfigError("n_queries (" + std::to_string(model.n_queries) +
                      ") must cover max_triplets (" +
                      std::to_string(gen.max_triplets) + ")");
  }
  if (!sweep_param.empty() && sweep_param != "T" && sweep_param != "n_queries" &&
      sweep_param != "ratio" && sweep_param != "epochs") {
    throw ConfigError("sweep_param must be T, n_queries, ratio or epochs");
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      cfg.apply_override(line);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["steps"] = steps;
  j["loss_total"] = loss_total;
  j["loss_o2o"] = breakdown_json(o2o);
  j["loss_o2m"] = breakdown_json(o2m);
  j["positives"] = {{"o2o", positives_o2o},
                    {"o2m", positives_o2m},
                    {"hybrid", positives_hybrid}};
  nlohmann::ordered_json val;
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    val["recall@" + std::to_string(kRecallKs[i])] = val_recall[i];
  }
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    val["mean_recall@" + std::to_string(kRecallKs[i])] = val_mean_recall[i];
  }
  j["val"] = std::move(val);
  return j.dump();
}

HydraLoss image_loss(const RelationModel& model, const SceneSample& scene,
                     const RunConfig& cfg, bool aux_loss) {
  const Tensor memory = model.encode(scene.tokens);
  const auto rel_states = model.decode(memory, DecoderPath::kRelDecoder);
  std::vector<QueryStates> hydra_states;
  if (cfg.mode == TrainMode::kHydraComplete) {
    hydra_states = model.decode(memory, DecoderPath::kHydraBranch);
  }
  HydraLossConfig lc;
  lc.mode = cfg.mode;
  lc.assign.cost = cfg.cost;
  lc.assign.o2m = cfg.o2m;
  lc.weights = cfg.loss;

  HydraLoss out;
  out.o2m.branch = Branch::kO2M;
  const std::size_t first = aux_loss ? 0 : rel_states.size() - 1;
  for (std::size_t l = first; l < rel_states.size(); ++l) {
    const PredictionTensors rel = model.predict_heads(rel_states[l]);
    std::optional<PredictionTensors> hydra;
    if (!hydra_states.empty()) hydra = model.predict_heads(hydra_states[l]);
    HydraLoss layer = loss_hydra(rel, hydra ? &*hydra : nullptr, scene.triplets, lc);
    out.total = out.total.defined() ? out.total + layer.total : layer.total;
    out.o2o += layer.o2o;
    out.o2m += layer.o2m;
    out.assignment = std::move(layer.assignment);  // final layer's wins
  }
  return out;
}

std::vector<EvalImage> eval_images(const RelationModel& model,
                                   std::span<const SceneSample> dataset,
                                   Protocol protocol) {
  NoGradScope no_grad;
  const RankOptions opts = rank_options_for(protocol);
  std::vector<EvalImage> out;
  out.reserve(dataset.size());
  for (const SceneSample& s : dataset) {
    const auto preds = model.infer(s.tokens).triplets();
    out.push_back({rank_predictions(preds, opts), s.triplets});
  }
  return out;
}

MetricsReport evaluate_model(const RelationModel& model,
                             std::span<const SceneSample> dataset,
                             Protocol protocol) {
  const auto images = eval_images(model, dataset, protocol);
  return evaluate(images, protocol, model.config().n_relation_classes);
}

PositiveStats measure_positives(const RelationModel& model,
                                std::span<const SceneSample> dataset,
                                const RunConfig& cfg) {
  NoGradScope no_grad;
  HybridConfig hc;
  hc.cost = cfg.cost;
  hc.o2m = cfg.o2m;
  hc.o2m_enabled = cfg.mode != TrainMode::kBaselineO2O;
  std::vector<HybridAssignment> all;
  for (const SceneSample& s : dataset) {
    const Tensor memory = model.encode(s.tokens);
    const auto rel = model.predict_heads(model.rel_decoder_forward(memory)).triplets();
    if (cfg.mode == TrainMode::kHydraComplete) {
      const auto hy =
          model.predict_heads(model.hydra_branch_forward(memory)).triplets();
      all.push_back(assign_hybrid(s.triplets, rel, hy, hc));
    } else {
      all.push_back(assign_hybrid(s.triplets, rel, rel, hc));
    }
  }
  return count_positives(all);
}

TrainResult train(const RunConfig& cfg, std::span<const SceneSample> train_set,
                  std::span<const SceneSample> val_set,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty() && cfg.epochs > 0) {
    throw std::invalid_argument("training set is empty");
  }
  RelationModel model(cfg.model, derive_seed(cfg.seed, "init"));
  TrainResult res{model.clone(), model.clone(), 0, {}};
  std::vector<Tensor> params = model.parameters();
  AdamOptions ao;
  ao.lr = cfg.lr;
  Adam opt(params, ao);
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  const std::span<const SceneSample> val =
      cfg.eval_limit > 0 && cfg.eval_limit < val_set.size()
          ? val_set.first(cfg.eval_limit)
          : val_set;

  double best_mr = -1.0;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates with an explicit draw, identical across standard libraries.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    EpochLog log;
    log.epoch = epoch;
    log.o2m.branch = Branch::kO2M;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      TapeScope scope(tape);
      Tensor total;
      LossBreakdown step_o2o, step_o2m;
      std::vector<double> image_totals;
      for (std::size_t b = start; b < stop; ++b) {
        const SceneSample& s = train_set[order[b]];
        HydraLoss l;
        try {
          l = image_loss(model, s, cfg, cfg.aux_loss);
        } catch (const ValueError&) {
          // Non-finite predictions poison the matching costs.
          l.total = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
        }
        total = total.defined() ? total + l.total : l.total;
        image_totals.push_back(l.total.item());
        step_o2o += l.o2o;
        step_o2m += l.o2m;
        log.positives_o2o += static_cast<double>(l.assignment.o2o.pairs.size());
        log.positives_o2m += static_cast<double>(l.assignment.o2m.pairs.size());
        log.positives_hybrid += static_cast<double>(l.assignment.positives_total);
      }
      const std::size_t n = stop - start;
      const Tensor loss = scale(total, 1.0 / static_cast<double>(n));
      if (!std::isfinite(loss.item()) || !all_finite(step_o2o) || !all_finite(step_o2m)) {
        nlohmann::ordered_json dump;
        dump["epoch"] = epoch;
        dump["step"] = log.steps + 1;
        nlohmann::ordered_json ids = nlohmann::ordered_json::array();
        for (std::size_t b = start; b < stop; ++b) ids.push_back(train_set[order[b]].id);
        dump["scene_ids"] = std::move(ids);
        nlohmann::ordered_json vals = nlohmann::ordered_json::array();
        for (double v : image_totals) {
          vals.push_back(std::isfinite(v) ? nlohmann::ordered_json(v)
                                          : nlohmann::ordered_json(fmt(v)));
        }
        dump["image_losses"] = std::move(vals);
        throw NonFiniteLossError(
            "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                std::to_string(log.steps + 1),
            dump.dump(2));
      }
      opt.zero_grad();
      tape.backward(loss);
      if (cfg.grad_clip > 0.0) clip_grad_norm(params, cfg.grad_clip);
      opt.step();
      ++log.steps;
      log.loss_total += loss.item() * static_cast<double>(n);
      log.o2o += step_o2o;
      log.o2m += step_o2m;
      seen += n;
    }
    const double inv = seen ? 1.0 / static_cast<double>(seen) : 0.0;
    log.loss_total *= inv;
    log.o2o = scaled(log.o2o, inv);
    log.o2m = scaled(log.o2m, inv);
    log.o2m.branch = Branch::kO2M;
    log.positives_o2o *= inv;
    log.positives_o2m *= inv;
    log.positives_hybrid *= inv;

    if (!val.empty()) {
      const MetricsReport rep = evaluate_model(model, val, Protocol::kVisualGenome);
      log.val_recall = rep.recall;
      log.val_mean_recall = rep.mean_recall;
    }
    if (log.val_mean_recall[1] > best_mr) {
      best_mr = log.val_mean_recall[1];
      res.best = model.clone();
      res.best_epoch = epoch;
    }
    res.log.push_back(log);
    if (on_epoch && !on_epoch(log)) break;
  }
  res.final = std::move(model);
  return res;
}

}  // namespace hydra
