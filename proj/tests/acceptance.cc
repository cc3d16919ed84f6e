// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--only 1,5,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hydra/analysis.h"
#include "hydra/cli.h"
#include "hydra/decoder.h"
#include "hydra/losses.h"
#include "hydra/matching.h"
#include "hydra/metrics.h"
#include "hydra/o2m.h"
#include "hydra/ops.h"
#include "hydra/optim.h"
#include "hydra/synthdata.h"
#include "hydra/trainer.h"
#include "test_util.h"

namespace hydra {
namespace {

using testing::brute_force_min_cost;
using testing::random_box;
using testing::random_gt;
using testing::random_tensor;

// Pinned tolerances and budgets.
constexpr int kHungarianInstances = 200;
constexpr std::size_t kHungarianMaxRows = 7, kHungarianMaxCols = 9;
constexpr double kHungarianSeconds = 5.0;
constexpr double kScoreTol = 1e-12;
constexpr double kComponentGradTol = 1e-4;
constexpr double kEndToEndGradTol = 1e-3;
constexpr double kTableTol = 0.05;
constexpr double kAmplification = 1.5;  // strict
constexpr std::size_t kWarmupEpochs = 3;
constexpr double kDistanceAlpha = 0.01;
constexpr double kApFixture = 0.8333;
constexpr double kApTol = 5e-5;
constexpr double kConvergenceSeconds = 20 * 60;
constexpr std::uint64_t kSeeds[] = {0, 1, 2};

// Training protocol shared by the trained-model criteria.
constexpr std::size_t kToyTrainScenes = 500;
constexpr std::size_t kToyValScenes = 100;
constexpr std::size_t kAmplificationEpochs = 20;
constexpr std::size_t kHydraEpochs = 12;
constexpr double kRecallBar = 0.30;  // frozen val R@20 bar

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig toy_run(TrainMode mode, std::uint64_t seed) {
  RunConfig c;
  c.mode = mode;
  c.seed = seed;
  c.lr = 2e-3;
  c.grad_clip = 1.0;
  c.train_count = kToyTrainScenes;
  c.val_count = kToyValScenes;
  return c;
}

struct ToyData {
  Dataset train, val;
};

const ToyData& toy_data() {
  static const ToyData d = [] {
    const RunConfig c = toy_run(TrainMode::kHydraComplete, 0);
    return ToyData{generate_dataset(c.data_seed, c.train_count, c.gen),
                   generate_dataset(c.data_seed + 1000000, c.val_count, c.gen)};
  }();
  return d;
}

// hydra_complete runs for criteria 7, 8 and 9, trained once per seed.
struct HydraRun {
  RelationModel model;
  std::vector<double> val_r20;
  double seconds;
};

const HydraRun& hydra_run(std::uint64_t seed) {
  static std::map<std::uint64_t, HydraRun> cache;
  auto it = cache.find(seed);
  if (it != cache.end()) return it->second;
  RunConfig c = toy_run(TrainMode::kHydraComplete, seed);
  c.epochs = kHydraEpochs;
  const auto t0 = Clock::now();
  TrainResult r = train(c, toy_data().train, toy_data().val);
  std::vector<double> r20;
  for (const auto& e : r.log) r20.push_back(e.val_recall[0]);
  return cache.emplace(seed, HydraRun{std::move(r.best), r20, seconds_since(t0)})
      .first->second;
}

std::optional<std::size_t> first_epoch_at(const std::vector<double>& curve, double bar) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] >= bar) return i + 1;
  }
  return std::nullopt;
}

// 1 ------------------------------------------------------------------------
Outcome hungarian_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  int exact = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < kHungarianInstances; ++i) {
    const std::size_t m = 1 + rng() % kHungarianMaxRows;
    const std::size_t n = m + rng() % (kHungarianMaxCols - m + 1);
    std::vector<std::vector<double>> c(m, std::vector<double>(n));
    for (auto& row : c) {
      for (double& x : row) x = u(rng);
    }
    const O2OAssignment a = hungarian(CostMatrix::from_rows(c));
    double s = 0.0;
    for (const auto& p : a.pairs) s += c[p.gt][p.query];
    if (a.pairs.size() == m && s == brute_force_min_cost(c)) ++exact;
  }
  const double t = seconds_since(t0);
  return {exact == kHungarianInstances && t < kHungarianSeconds,
          fmt("%d/%d exact, %.2fs incl. brute force (< %.0fs)", exact, kHungarianInstances, t,
              kHungarianSeconds)};
}

// 2 ------------------------------------------------------------------------
Outcome score_fixtures() {
  GtTriplet g;
  g.sub_class = 1;
  g.obj_class = 2;
  g.sub_box = NormBox::from_corners(0.0, 0.0, 0.5, 0.5);
  g.obj_box = NormBox::from_corners(0.0, 0.0, 0.5, 0.5);
  PredTriplet p;
  p.p_sub = {0.0, 0.8, 0.0};
  p.p_obj = {0.0, 0.0, 0.6};
  p.p_rel = {0.0};
  p.sub_box = NormBox::from_corners(0.0, 0.0, 0.5, 0.25);  // IoU 0.5
  p.obj_box = NormBox::from_corners(0.0, 0.0, 0.5, 0.35);  // IoU 0.7
  const double s = score_o2m(g, p);

  const std::vector<double> row = {0.9, 0.5, 0.45, 0.41, 0.3, 0.39, 0.44, 0.6};
  const O2MAssignment a = select_o2m(CostMatrix::from_rows({row}), O2MConfig{0.4, 6});
  std::vector<std::size_t> picked;
  for (const auto& pr : a.pairs) picked.push_back(pr.query);
  const std::vector<std::size_t> expected = {0, 7, 1, 2, 6, 3};
  return {std::abs(s - 2.6) < kScoreTol && picked == expected,
          fmt("score %.15f (|err| %.1e), top-6 %s", s, std::abs(s - 2.6),
              picked == expected ? "{0,7,1,2,6,3}" : "mismatch")};
}

// 3 ------------------------------------------------------------------------
PredictionTensors random_predictions(std::mt19937_64& rng, std::size_t n,
                                     std::size_t n_ent, std::size_t n_rel) {
  auto boxes = [&] {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = random_box(rng).as_array();
      v.insert(v.end(), a.begin(), a.end());
    }
    return Tensor::from(n, 4, v, true);
  };
  PredictionTensors p;
  p.sub_logits = random_tensor(rng, n, n_ent);
  p.obj_logits = random_tensor(rng, n, n_ent);
  p.rel_logits = random_tensor(rng, n, n_rel);
  p.sub_boxes = boxes();
  p.obj_boxes = boxes();
  return p;
}

// Worst relative error over every input tensor of a loss on predictions.
double worst_over_leaves(PredictionTensors& preds,
                         const std::function<Tensor(const PredictionTensors&)>& loss) {
  double worst = 0.0;
  Tensor* leaves[] = {&preds.sub_logits, &preds.obj_logits, &preds.rel_logits,
                      &preds.sub_boxes, &preds.obj_boxes};
  for (Tensor* leaf : leaves) {
    const Tensor saved = *leaf;
    worst = std::max(worst, grad_check(
                                [&](const Tensor& x) {
                                  *leaf = x;
                                  return loss(preds);
                                },
                                saved));
    *leaf = saved;
  }
  return worst;
}

Outcome gradient_integrity() {
  std::mt19937_64 rng(7);
  std::map<std::string, double> worst;

  for (int t = 0; t < 3; ++t) {
    const Tensor logits = random_tensor(rng, 4, 5);
    std::vector<double> targets(20);
    for (double& y : targets) y = static_cast<double>(rng() % 2);
    worst["focal"] = std::max(worst["focal"], grad_check([&](const Tensor& x) {
      return sigmoid_focal_loss(x, targets, 0.25, 2.0);
    }, logits));
    const Tensor a = random_predictions(rng, 3, 1, 1).sub_boxes;
    const Tensor b = random_predictions(rng, 3, 1, 1).sub_boxes;
    worst["l1"] = std::max(worst["l1"], grad_check([&](const Tensor& x) {
      return box_l1_loss(x, b);
    }, a));
    worst["giou"] = std::max(worst["giou"], grad_check([&](const Tensor& x) {
      return box_giou_loss(x, b);
    }, a));
  }

  // Composed losses; assignments are recomputed at every probe.
  const std::size_t n = 6, n_ent = 4, n_rel = 3;
  for (int t = 0; t < 2; ++t) {
    PredictionTensors rel = random_predictions(rng, n, n_ent, n_rel);
    PredictionTensors hyd = random_predictions(rng, n, n_ent, n_rel);
    std::vector<GtTriplet> gts = {random_gt(rng, n_ent, n_rel), random_gt(rng, n_ent, n_rel)};
    // Threshold 0 keeps every query eligible so both branches carry positives.
    auto with_mode = [](TrainMode m) {
      HydraLossConfig cfg;
      cfg.mode = m;
      cfg.assign.o2m.threshold = 0.0;
      cfg.assign.o2m.k = 3;
      return cfg;
    };
    const auto base = with_mode(TrainMode::kBaselineO2O);
    const auto vanilla = with_mode(TrainMode::kVanillaHybrid);
    const auto complete = with_mode(TrainMode::kHydraComplete);
    worst["eq2"] = std::max(worst["eq2"], worst_over_leaves(rel, [&](const PredictionTensors& p) {
      return loss_hydra(p, nullptr, gts, base).total;
    }));
    worst["eq4"] = std::max(worst["eq4"], worst_over_leaves(rel, [&](const PredictionTensors& p) {
      return loss_hydra(p, nullptr, gts, vanilla).total;
    }));
    worst["eq6"] = std::max(worst["eq6"], worst_over_leaves(hyd, [&](const PredictionTensors& p) {
      return loss_hydra(rel, &p, gts, complete).total;
    }));
    worst["eq6"] = std::max(worst["eq6"], worst_over_leaves(rel, [&](const PredictionTensors& p) {
      return loss_hydra(p, &hyd, gts, complete).total;
    }));
  }
  double component = 0.0;
  for (const auto& [k, v] : worst) component = std::max(component, v);

  // End to end through a 2-layer toy decoder, every parameter, all three modes.
  DecoderConfig dc;
  dc.n_queries = 3;
  dc.d_model = 8;
  dc.n_layers = 2;
  dc.n_heads = 2;
  dc.ffn_dim = 8;
  dc.n_entity_classes = 3;
  dc.n_relation_classes = 2;
  dc.token_dim = 5;
  dc.grid_h = dc.grid_w = 2;
  const RelationModel model(dc, 11);
  const Tensor tokens = random_tensor(rng, 4, 5, -1, 1, false);
  const std::vector<GtTriplet> gts = {random_gt(rng, 3, 2), random_gt(rng, 3, 2)};
  double e2e = 0.0;
  for (TrainMode mode :
       {TrainMode::kBaselineO2O, TrainMode::kVanillaHybrid, TrainMode::kHydraComplete}) {
    HydraLossConfig cfg;
    cfg.mode = mode;
    cfg.assign.o2m.threshold = 0.0;
    cfg.assign.o2m.k = 2;
    auto f = [&](const Tensor&) {
      const Tensor mem = model.encode(tokens);
      const auto pr = model.predict_heads(model.decode(mem, DecoderPath::kRelDecoder).back());
      const auto ph = model.predict_heads(model.decode(mem, DecoderPath::kHydraBranch).back());
      return loss_hydra(pr, &ph, gts, cfg).total;
    };
    for (const Tensor& p : model.parameters()) e2e = std::max(e2e, grad_check(f, p));
  }
  return {component < kComponentGradTol && e2e < kEndToEndGradTol,
          fmt("component max %.1e (focal %.1e l1 %.1e giou %.1e eq2 %.1e eq4 %.1e eq6 %.1e) "
              "< %.0e; end-to-end %.1e < %.0e over %zu params x 3 modes",
              component, worst["focal"], worst["l1"], worst["giou"], worst["eq2"],
              worst["eq4"], worst["eq6"], kComponentGradTol, e2e, kEndToEndGradTol,
              model.parameters().size())};
}

// 4 ------------------------------------------------------------------------
Outcome branch_identity() {
  const RunConfig c = toy_run(TrainMode::kHydraComplete, 0);
  RelationModel model(c.model, 5);
  model.zero_self_attention_output();
  const Dataset batch = generate_dataset(77, 8, c.gen);
  bool identical = true, losses_equal = true;
  double lv_sum = 0.0, lh_sum = 0.0;
  NoGradScope ng;
  for (const SceneSample& s : batch) {
    const Tensor mem = model.encode(s.tokens);
    const auto rel = model.decode(mem, DecoderPath::kRelDecoder);
    const auto hyd = model.decode(mem, DecoderPath::kHydraBranch);
    for (std::size_t l = 0; l < rel.size(); ++l) {
      identical = identical &&
                  std::equal(rel[l].sub.data().begin(), rel[l].sub.data().end(),
                             hyd[l].sub.data().begin()) &&
                  std::equal(rel[l].obj.data().begin(), rel[l].obj.data().end(),
                             hyd[l].obj.data().begin());
    }
    const auto pr = model.predict_heads(rel.back());
    const auto ph = model.predict_heads(hyd.back());
    HydraLossConfig vc{TrainMode::kVanillaHybrid, {}, {}};
    HydraLossConfig hc{TrainMode::kHydraComplete, {}, {}};
    const double lv = loss_hydra(pr, nullptr, s.triplets, vc).total.item();
    const double lh = loss_hydra(pr, &ph, s.triplets, hc).total.item();
    losses_equal = losses_equal && lv == lh;
    lv_sum += lv;
    lh_sum += lh;
  }
  return {identical && losses_equal,
          fmt("%s outputs at every layer; L_vanilla %.17g vs L_Hydra %.17g summed over %zu "
              "scenes, per-scene %s",
              identical ? "bit-identical" : "DIFFERENT", lv_sum, lh_sum, batch.size(),
              losses_equal ? "equal" : "DIFFERENT")};
}

// 5 ------------------------------------------------------------------------
Outcome table_arithmetic() {
  const double a = score_wtd(76.0, 42.8, 44.1);
  const double b = f_recall(28.6, 16.0);
  const double c = score_wtd(71.7, 34.2, 37.5);
  const bool ok = std::abs(a - 50.0) <= kTableTol && std::abs(b - 20.5) <= kTableTol &&
                  std::abs(c - 43.0) <= kTableTol;
  return {ok, fmt("score_wtd %.4f (50.0), f_recall %.4f (20.5), score_wtd %.4f (43.0), "
                  "tol %.2f",
                  a, b, c, kTableTol)};
}

// 6 ------------------------------------------------------------------------
Outcome positive_amplification() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : kSeeds) {
    RunConfig c = toy_run(TrainMode::kVanillaHybrid, seed);
    c.o2m.mode = ThresholdMode::kNormalized;
    c.epochs = kAmplificationEpochs;
    const TrainResult r = train(c, toy_data().train, {});
    std::optional<std::size_t> crossing;
    for (const auto& e : r.log) {
      if (!crossing && e.epoch > kWarmupEpochs &&
          e.positives_hybrid > kAmplification * e.positives_o2o) {
        crossing = e.epoch;
      }
    }
    const EpochLog& last = r.log.back();
    const double ratio = last.positives_hybrid / last.positives_o2o;
    ok = ok && ratio > kAmplification;
    detail += fmt("%sseed %llu: %.2f/%.2f = %.3fx at epoch %zu (first > %.1fx: %s)",
                  detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                  last.positives_hybrid, last.positives_o2o, ratio, last.epoch, kAmplification,
                  crossing ? fmt("epoch %zu", *crossing).c_str() : "never");
  }
  return {ok, detail};
}

// 7 ------------------------------------------------------------------------
Outcome ads_direction() {
  std::string detail;
  int wins = 0;
  for (std::uint64_t seed : kSeeds) {
    const AdsReport r = ads_report(hydra_run(seed).model, toy_data().val);
    wins += r.ads_on > r.ads_off;
    detail += fmt("%sseed %llu: on %.3f off %.3f", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), r.ads_on, r.ads_off);
  }
  return {wins == 3, fmt("%d/3; ", wins) + detail};
}

// 8 ------------------------------------------------------------------------
Outcome distance_direction() {
  std::string detail;
  int wins = 0;
  for (std::uint64_t seed : kSeeds) {
    const DistanceStats s = distance_study(hydra_run(seed).model, toy_data().val);
    const bool lower = s.test && s.mean_off < s.mean_on && s.test->p < kDistanceAlpha;
    wins += lower;
    detail += fmt("%sseed %llu: on %.4f off %.4f t %.2f p %.2g n %zu", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), s.mean_on, s.mean_off,
                  s.test ? s.test->t : 0.0, s.test ? s.test->p : 1.0, s.n_pairs);
  }
  return {wins == 3, fmt("%d/3; ", wins) + detail};
}

// 9 ------------------------------------------------------------------------
Outcome convergence_direction() {
  const auto t0 = Clock::now();
  const HydraRun& h = hydra_run(kSeeds[0]);
  const auto hydra_epoch = first_epoch_at(h.val_r20, kRecallBar);
  if (!hydra_epoch) {
    return {false, fmt("hydra_complete never reached R@20 %.2f in %zu epochs", kRecallBar,
                       kHydraEpochs)};
  }
  // Baseline passes the bar too early if it gets there within 2x - 1 epochs.
  RunConfig c = toy_run(TrainMode::kBaselineO2O, kSeeds[0]);
  c.epochs = 2 * *hydra_epoch - 1;
  std::optional<std::size_t> base_epoch;
  train(c, toy_data().train, toy_data().val, [&](const EpochLog& e) {
    if (e.val_recall[0] >= kRecallBar) base_epoch = e.epoch;
    return !base_epoch;
  });
  const double t = h.seconds + seconds_since(t0);
  const bool ok = !base_epoch && t < kConvergenceSeconds;
  return {ok, fmt("bar R@20 %.2f: hydra_complete epoch %zu, baseline_o2o %s (needs >= %zu); "
                  "%.0fs (< %.0fs)",
                  kRecallBar, *hydra_epoch,
                  base_epoch ? fmt("epoch %zu", *base_epoch).c_str()
                             : fmt("not within %zu epochs", c.epochs).c_str(),
                  2 * *hydra_epoch, t, kConvergenceSeconds)};
}

// 10 -----------------------------------------------------------------------
RankedPrediction ranked(int s, int r, int o, NormBox sb, NormBox ob, double score) {
  RankedPrediction p;
  p.sub_class = s;
  p.rel_class = r;
  p.obj_class = o;
  p.sub_box = sb;
  p.obj_box = ob;
  p.score = score;
  return p;
}

Outcome protocol_soundness() {
  const NormBox a = NormBox::from_corners(0.0, 0.0, 0.4, 0.4);
  const NormBox b = NormBox::from_corners(0.5, 0.5, 0.9, 0.9);
  GtTriplet g;
  g.sub_class = 1;
  g.rel_class = 2;
  g.obj_class = 3;
  g.sub_box = a;
  g.obj_box = b;
  const std::vector<GtTriplet> gts = {g};

  // Two equally good predictions for one GT: only the first counts.
  const std::vector<RankedPrediction> dup = {ranked(1, 2, 3, a, b, 0.9),
                                             ranked(1, 2, 3, a, b, 0.8)};
  const auto hits = match_triplets(dup, gts, MatchMode::kRelation);
  const bool dedup = hits == std::vector<bool>{true, false};

  // IoU exactly 0.5 matches; just below does not.
  const NormBox half = NormBox::from_corners(0.0, 0.0, 0.4, 0.2);
  const NormBox below = NormBox::from_corners(0.0, 0.0, 0.4, 0.19);
  const bool boundary =
      iou(half, a) == 0.5 &&
      match_triplets(std::vector{ranked(1, 2, 3, half, b, 0.9)}, gts, MatchMode::kRelation)[0] &&
      !match_triplets(std::vector{ranked(1, 2, 3, below, b, 0.9)}, gts, MatchMode::kRelation)[0];

  // Per-predicate isolation: a hit on predicate 0 never moves predicate 1.
  auto image = [&](bool hit0) {
    GtTriplet g0 = g, g1 = g;
    g0.rel_class = 0;
    g1.rel_class = 1;
    g1.obj_box = a;
    g1.sub_box = b;
    EvalImage im;
    im.gts = {g0, g1};
    im.preds = {ranked(1, hit0 ? 0 : 2, 3, a, b, 0.9), ranked(1, 1, 3, b, a, 0.5)};
    return im;
  };
  const MeanRecall with = mean_recall_at_k(std::vector{image(true)}, 20, 3);
  const MeanRecall without = mean_recall_at_k(std::vector{image(false)}, 20, 3);
  const bool isolation = with.per_predicate[1] == without.per_predicate[1] &&
                         with.per_predicate[0] == 1.0 && without.per_predicate[0] == 0.0 &&
                         !with.per_predicate[2].has_value();

  const double ap = average_precision({true, false, true}, 2);
  const bool ap_ok = std::abs(ap - kApFixture) < kApTol;
  return {dedup && boundary && isolation && ap_ok,
          fmt("dedup %s, IoU 0.5 inclusive %s, mR isolation %s, AP %.6f (%.4f)",
              dedup ? "ok" : "FAIL", boundary ? "ok" : "FAIL", isolation ? "ok" : "FAIL", ap,
              kApFixture)};
}

// 11 -----------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "hydra_acceptance_determinism";
  fs::remove_all(root);
  RunConfig c = toy_run(TrainMode::kHydraComplete, 3);
  c.train_count = 40;
  c.val_count = 10;
  c.test_count = 10;
  c.epochs = 2;
  c.train_path = (root / "data/train.jsonl").string();
  c.val_path = (root / "data/val.jsonl").string();
  c.test_path = (root / "data/test.jsonl").string();

  const char* files[] = {kManifestName, kConfigDumpName, kTrainLogName, kBestCheckpointName,
                         kFinalCheckpointName, "eval.json", "eval_per_predicate.csv",
                         "analysis.json"};
  std::vector<std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    // Same paths both times, so the config dumps can be compared too.
    fs::remove_all(root);
    RunConfig ci = c;
    ci.out_dir = (root / "run").string();
    cmd_gen_data(ci);
    cmd_train(ci);
    const std::string ckpt = (fs::path(ci.out_dir) / kBestCheckpointName).string();
    cmd_eval(ci, ckpt, ci.test_path);
    cmd_analyze(ci, ckpt, ci.val_path);
    for (const char* f : files) runs[i].push_back(slurp(fs::path(ci.out_dir) / f));
  }
  std::size_t same = 0, bytes = 0;
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    same += !runs[0][i].empty() && runs[0][i] == runs[1][i];
    bytes += runs[0][i].size();
  }
  fs::remove_all(root);
  return {same == runs[0].size(),
          fmt("%zu/%zu artifacts byte-identical (%zu bytes)", same, runs[0].size(), bytes)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace
}  // namespace hydra

int main(int argc, char** argv) {
  using namespace hydra;
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }
  }
  const Criterion criteria[] = {
      {1, "hungarian_oracle", hungarian_oracle},
      {2, "one_to_many_score_fixtures", score_fixtures},
      {3, "gradient_integrity", gradient_integrity},
      {4, "branch_identity", branch_identity},
      {5, "table_metric_arithmetic", table_arithmetic},
      {6, "positive_amplification", positive_amplification},
      {7, "ads_direction", ads_direction},
      {8, "query_distance_direction", distance_direction},
      {9, "convergence_direction", convergence_direction},
      {10, "evaluation_protocol", protocol_soundness},
      {11, "determinism", determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %-28s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
