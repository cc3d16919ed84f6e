#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hydra/losses.h"
#include "hydra/ops.h"
#include "hydra/optim.h"
#include "test_util.h"

namespace hydra {
namespace {

using testing::random_gt;
using testing::random_tensor;

constexpr std::size_t kEnt = 4;
constexpr std::size_t kRel = 3;

// Written out from the definition, independent of the library.
double ref_focal(double p, int target, double alpha, double gamma) {
  const double pt = target ? p : 1 - p;
  const double at = target ? alpha : 1 - alpha;
  return -at * std::pow(1 - pt, gamma) * std::log(pt);
}

double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor random_boxes(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> c(0.3, 0.7), e(0.1, 0.4);
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.insert(v.end(), {c(rng), c(rng), e(rng), e(rng)});
  }
  return Tensor::from(n, 4, v, true);
}

PredictionTensors random_preds(std::mt19937_64& rng, std::size_t n) {
  PredictionTensors p;
  p.sub_logits = random_tensor(rng, n, kEnt);
  p.obj_logits = random_tensor(rng, n, kEnt);
  p.rel_logits = random_tensor(rng, n, kRel);
  p.sub_boxes = random_boxes(rng, n);
  p.obj_boxes = random_boxes(rng, n);
  return p;
}

std::vector<GtTriplet> random_gts(std::mt19937_64& rng, std::size_t m) {
  std::vector<GtTriplet> g;
  for (std::size_t i = 0; i < m; ++i) {
    g.push_back(random_gt(rng, static_cast<int>(kEnt), static_cast<int>(kRel)));
  }
  return g;
}

// Logits saturated toward the gt of each matched query (sigmoid exactly 0
// or 1 in double precision), boxes exact.
PredictionTensors perfect_preds(std::span<const GtTriplet> gts,
                                const std::vector<std::size_t>& owner,
                                std::size_t n) {
  auto logits = [&](std::size_t cols, auto cls_of) {
    std::vector<double> v(n * cols, -1000.0);
    for (std::size_t q = 0; q < n; ++q) {
      if (owner[q] < gts.size()) v[q * cols + cls_of(gts[owner[q]])] = 1000.0;
    }
    return Tensor::from(n, cols, v, true);
  };
  auto boxes = [&](auto box_of) {
    std::vector<double> v;
    for (std::size_t q = 0; q < n; ++q) {
      const NormBox b = owner[q] < gts.size() ? box_of(gts[owner[q]])
                                              : NormBox{0.5, 0.5, 0.2, 0.2};
      v.insert(v.end(), {b.cx, b.cy, b.w, b.h});
    }
    return Tensor::from(n, 4, v, true);
  };
  PredictionTensors p;
  p.sub_logits = logits(kEnt, [](const GtTriplet& g) { return std::size_t(g.sub_class); });
  p.obj_logits = logits(kEnt, [](const GtTriplet& g) { return std::size_t(g.obj_class); });
  p.rel_logits = logits(kRel, [](const GtTriplet& g) { return std::size_t(g.rel_class); });
  p.sub_boxes = boxes([](const GtTriplet& g) { return g.sub_box; });
  p.obj_boxes = boxes([](const GtTriplet& g) { return g.obj_box; });
  return p;
}

TEST(FocalTest, Fixtures) {
  EXPECT_NEAR(focal_loss(0.5, 1, 1.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.5, 1, 0.25, 2.0), 0.25 * 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.5, 1, 0.25, 2.0), 0.04332, 1e-5);
  EXPECT_LT(focal_loss(1.0 - 1e-9, 1, 0.25, 2.0), 1e-20);
  EXPECT_EQ(focal_loss(1.0, 1, 0.25, 2.0), 0.0);
  // Clamped: a confident wrong prediction stays finite.
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, 1, 0.25, 2.0)));
}

TEST(FocalTest, MatchesDefinition) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng);
    for (int t : {0, 1}) {
      EXPECT_NEAR(focal_loss(p, t, 0.25, 2.0), ref_focal(p, t, 0.25, 2.0), 1e-13);
    }
  }
}

TEST(BoxLossTest, Fixtures) {
  const NormBox b{0.4, 0.6, 0.2, 0.3};
  const BoxLoss same = box_loss(b, b);
  EXPECT_EQ(same.l1, 0.0);
  EXPECT_EQ(same.giou_loss, 0.0);
  const BoxLoss apart = box_loss(NormBox::from_corners(0, 0, 0.25, 0.25),
                                 NormBox::from_corners(0.5, 0, 0.75, 0.25));
  EXPECT_NEAR(apart.giou_loss, 4.0 / 3.0, 1e-12);
}

TEST(BoxLossTest, TensorFormsAgreeWithScalar) {
  std::mt19937_64 rng(2);
  const Tensor a = random_boxes(rng, 5), b = random_boxes(rng, 5);
  double l1 = 0, gl = 0;
  for (std::size_t r = 0; r < 5; ++r) {
    const NormBox pa{a.at(r, 0), a.at(r, 1), a.at(r, 2), a.at(r, 3)};
    const NormBox pb{b.at(r, 0), b.at(r, 1), b.at(r, 2), b.at(r, 3)};
    l1 += box_loss(pa, pb).l1;
    gl += box_loss(pa, pb).giou_loss;
  }
  NoGradScope ng;
  EXPECT_NEAR(box_l1_loss(a, b).item(), l1, 1e-12);
  EXPECT_NEAR(box_giou_loss(a, b).item(), gl, 1e-12);
}

TEST(BoxLossTest, GradientsPassCheck) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 3; ++t) {
    Tensor a = random_boxes(rng, 4);
    const Tensor b = random_boxes(rng, 4).detach();
    EXPECT_LT(grad_check([&](const Tensor& x) { return box_giou_loss(x, b); }, a), 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return box_l1_loss(x, b); }, a), 1e-4);
  }
}

TEST(LossO2OTest, PerfectPositivesNoNegativesIsZero) {
  std::mt19937_64 rng(4);
  const auto gts = random_gts(rng, 3);
  const std::vector<std::size_t> owner = {1, 0, 2};
  const auto preds = perfect_preds(gts, owner, 3);
  O2OAssignment a;
  a.pairs = {{0, 1}, {1, 0}, {2, 2}};
  const BranchLoss l = loss_o2o(preds, gts, a, {});
  EXPECT_EQ(l.parts.total, 0.0);
  EXPECT_EQ(l.parts.box_l1, 0.0);
  EXPECT_NEAR(l.parts.box_giou, 0.0, 1e-15);
}

TEST(LossO2OTest, EmptyGroundTruthIsBackgroundOnly) {
  std::mt19937_64 rng(5);
  const auto preds = random_preds(rng, 4);
  const BranchLoss l = loss_o2o(preds, {}, {}, {});
  EXPECT_EQ(l.parts.box_l1, 0.0);
  EXPECT_EQ(l.parts.box_giou, 0.0);
  double ent = 0, rel = 0;
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t c = 0; c < kEnt; ++c) {
      ent += ref_focal(ref_sigmoid(preds.sub_logits.at(q, c)), 0, 0.25, 2);
      ent += ref_focal(ref_sigmoid(preds.obj_logits.at(q, c)), 0, 0.25, 2);
    }
    for (std::size_t c = 0; c < kRel; ++c) {
      rel += ref_focal(ref_sigmoid(preds.rel_logits.at(q, c)), 0, 0.25, 2);
    }
  }
  EXPECT_NEAR(l.parts.entity_cls, ent, 1e-12);
  EXPECT_NEAR(l.parts.relation_cls, rel, 1e-12);
  EXPECT_NEAR(l.parts.total, 2 * ent + 2 * rel, 1e-12);
}

TEST(LossO2OTest, HandAssembledTwoQueryFixture) {
  std::mt19937_64 rng(6);
  const auto preds = random_preds(rng, 2);
  const auto gts = random_gts(rng, 1);
  O2OAssignment a;
  a.pairs = {{0, 1}};
  LossWeights w;
  w.cls = 1.5;
  w.rel = 0.7;
  w.l1 = 3.0;
  w.giou = 2.5;
  const BranchLoss l = loss_o2o(preds, gts, a, w);

  const GtTriplet& g = gts[0];
  double ent = 0, rel = 0;
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t c = 0; c < kEnt; ++c) {
      const int ts = q == 1 && c == std::size_t(g.sub_class);
      const int to = q == 1 && c == std::size_t(g.obj_class);
      ent += ref_focal(ref_sigmoid(preds.sub_logits.at(q, c)), ts, 0.25, 2);
      ent += ref_focal(ref_sigmoid(preds.obj_logits.at(q, c)), to, 0.25, 2);
    }
    for (std::size_t c = 0; c < kRel; ++c) {
      const int tr = q == 1 && c == std::size_t(g.rel_class);
      rel += ref_focal(ref_sigmoid(preds.rel_logits.at(q, c)), tr, 0.25, 2);
    }
  }
  const NormBox ps{preds.sub_boxes.at(1, 0), preds.sub_boxes.at(1, 1),
                   preds.sub_boxes.at(1, 2), preds.sub_boxes.at(1, 3)};
  const NormBox po{preds.obj_boxes.at(1, 0), preds.obj_boxes.at(1, 1),
                   preds.obj_boxes.at(1, 2), preds.obj_boxes.at(1, 3)};
  const double l1 = box_loss(ps, g.sub_box).l1 + box_loss(po, g.obj_box).l1;
  const double gl = box_loss(ps, g.sub_box).giou_loss + box_loss(po, g.obj_box).giou_loss;
  EXPECT_NEAR(l.parts.entity_cls, ent, 1e-12);
  EXPECT_NEAR(l.parts.relation_cls, rel, 1e-12);
  EXPECT_NEAR(l.parts.box_l1, l1, 1e-12);
  EXPECT_NEAR(l.parts.box_giou, gl, 1e-12);
  EXPECT_NEAR(l.parts.total, 1.5 * ent + 0.7 * rel + 3.0 * l1 + 2.5 * gl, 1e-12);
}

TEST(LossO2OTest, NormalizedByPairCount) {
  std::mt19937_64 rng(7);
  const auto preds = random_preds(rng, 3);
  const auto gts = random_gts(rng, 2);
  O2OAssignment one, two;
  one.pairs = {{0, 0}};
  two.pairs = {{0, 0}, {1, 2}};
  const auto gts_one = std::vector<GtTriplet>{gts[0]};
  const BranchLoss a = loss_o2o(preds, gts_one, one, {});
  const BranchLoss b = loss_o2o(preds, gts, two, {});
  // Box terms average over pairs; the (0,0) pair is common to both.
  const NormBox p2{preds.sub_boxes.at(2, 0), preds.sub_boxes.at(2, 1),
                   preds.sub_boxes.at(2, 2), preds.sub_boxes.at(2, 3)};
  const NormBox o2{preds.obj_boxes.at(2, 0), preds.obj_boxes.at(2, 1),
                   preds.obj_boxes.at(2, 2), preds.obj_boxes.at(2, 3)};
  const double extra = box_loss(p2, gts[1].sub_box).l1 + box_loss(o2, gts[1].obj_box).l1;
  EXPECT_NEAR(b.parts.box_l1, (a.parts.box_l1 + extra) / 2, 1e-12);
}

TEST(LossO2OTest, GradientsPassCheck) {
  std::mt19937_64 rng(8);
  auto preds = random_preds(rng, 3);
  const auto gts = random_gts(rng, 2);
  O2OAssignment a;
  a.pairs = {{0, 2}, {1, 0}};
  Tensor* leaves[] = {&preds.sub_logits, &preds.obj_logits, &preds.rel_logits,
                      &preds.sub_boxes, &preds.obj_boxes};
  for (Tensor* leaf : leaves) {
    const Tensor saved = *leaf;
    auto f = [&](const Tensor& x) {
      *leaf = x;
      return loss_o2o(preds, gts, a, {}).total;
    };
    EXPECT_LT(grad_check(f, saved), 1e-4);
    *leaf = saved;
  }
}

TEST(LossO2OTest, GroundTruthOrderInvariant) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto preds = random_preds(rng, 6);
    const auto gts = random_gts(rng, 3);
    const std::vector<GtTriplet> rev(gts.rbegin(), gts.rend());
    const auto trip = preds.triplets();
    const auto la = loss_o2o(preds, gts, assign_o2o(gts, trip), {});
    const auto lb = loss_o2o(preds, rev, assign_o2o(rev, trip), {});
    EXPECT_NEAR(la.parts.total, lb.parts.total, 1e-12);
  }
}

TEST(LossO2MTest, EmptyAssignmentIsBackgroundOnly) {
  std::mt19937_64 rng(10);
  const auto preds = random_preds(rng, 4);
  const auto gts = random_gts(rng, 2);
  const auto o2m = loss_o2m(preds, gts, {}, {});
  const auto bg = loss_o2o(preds, {}, {}, {});
  EXPECT_EQ(o2m.parts.box_l1, 0.0);
  EXPECT_DOUBLE_EQ(o2m.parts.total, bg.parts.total);
  EXPECT_EQ(o2m.parts.branch, Branch::kO2M);
}

TEST(LossO2MTest, DuplicatePerfectQueriesHaveZeroLoss) {
  std::mt19937_64 rng(11);
  const auto gts = random_gts(rng, 1);
  const auto preds = perfect_preds(gts, {0, 0, 0}, 3);
  O2MAssignment a;
  a.pairs = {{0, 0, 4.0}, {0, 1, 4.0}, {0, 2, 4.0}};
  a.per_gt_counts = {3};
  const auto l = loss_o2m(preds, gts, a, {});
  EXPECT_EQ(l.parts.entity_cls, 0.0);
  EXPECT_EQ(l.parts.relation_cls, 0.0);
  EXPECT_EQ(l.parts.box_l1, 0.0);
  EXPECT_NEAR(l.parts.total, 0.0, 1e-14);
}

TEST(LossO2MTest, RatioScalesLinearly) {
  std::mt19937_64 rng(12);
  const auto preds = random_preds(rng, 5);
  const auto gts = random_gts(rng, 2);
  O2MAssignment a;
  a.pairs = {{0, 1, 2.0}, {0, 3, 1.9}, {1, 4, 1.0}};
  a.per_gt_counts = {2, 1};
  LossWeights w;
  const double base = loss_o2m(preds, gts, a, w).parts.total;
  w.ratio_o2m = 2.5;
  EXPECT_NEAR(loss_o2m(preds, gts, a, w).parts.total, 2.5 * base, 1e-12);
}

class HydraLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(13);
    rel = random_preds(rng, 8);
    branch = random_preds(rng, 8);
    gts = random_gts(rng, 3);
    cfg.assign.o2m.threshold = 0.5;
  }
  PredictionTensors rel, branch;
  std::vector<GtTriplet> gts;
  HydraLossConfig cfg;
};

TEST_F(HydraLossTest, DisabledBranchEqualsBaseline) {
  cfg.mode = TrainMode::kHydraComplete;
  cfg.assign.o2m_enabled = false;
  const auto h = loss_hydra(rel, &branch, gts, cfg);
  cfg.mode = TrainMode::kBaselineO2O;
  cfg.assign.o2m_enabled = true;
  const auto b = loss_hydra(rel, nullptr, gts, cfg);
  EXPECT_EQ(h.total.item(), b.total.item());
  const auto direct = loss_o2o(rel, gts, assign_o2o(gts, rel.triplets()), cfg.weights);
  EXPECT_EQ(b.total.item(), direct.total.item());
  EXPECT_TRUE(b.assignment.o2m.pairs.empty());
}

TEST_F(HydraLossTest, EqualBranchesMakeVanillaAndCompleteAgree) {
  cfg.mode = TrainMode::kHydraComplete;
  const auto c = loss_hydra(rel, &rel, gts, cfg);
  cfg.mode = TrainMode::kVanillaHybrid;
  const auto v = loss_hydra(rel, nullptr, gts, cfg);
  EXPECT_EQ(c.total.item(), v.total.item());
  EXPECT_EQ(c.assignment.o2m.pairs, v.assignment.o2m.pairs);
}

TEST_F(HydraLossTest, TotalIsSumOfBranches) {
  const auto h = loss_hydra(rel, &branch, gts, cfg);
  EXPECT_NEAR(h.total.item(), h.o2o.total + h.o2m.total, 1e-12);
  EXPECT_FALSE(h.assignment.o2m.pairs.empty());
}

TEST_F(HydraLossTest, RatioLeavesOneToOnePartUntouched) {
  const auto a = loss_hydra(rel, &branch, gts, cfg);
  cfg.weights.ratio_o2m = 3.0;
  const auto b = loss_hydra(rel, &branch, gts, cfg);
  EXPECT_EQ(a.o2o.total, b.o2o.total);
  EXPECT_EQ(a.o2o.entity_cls, b.o2o.entity_cls);
  EXPECT_NEAR(b.o2m.total, 3.0 * a.o2m.total, 1e-12);
}

TEST_F(HydraLossTest, CompleteModeNeedsBranch) {
  cfg.mode = TrainMode::kHydraComplete;
  EXPECT_THROW(loss_hydra(rel, nullptr, gts, cfg), std::invalid_argument);
}

TEST_F(HydraLossTest, BranchGradientsPassCheck) {
  Tensor saved = branch.rel_logits;
  auto f = [&](const Tensor& x) {
    branch.rel_logits = x;
    return loss_hydra(rel, &branch, gts, cfg).total;
  };
  EXPECT_LT(grad_check(f, saved), 1e-4);
}

TEST(LossProperty, NonNegative) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 30; ++t) {
    const auto preds = random_preds(rng, 6);
    const auto gts = random_gts(rng, rng() % 4);
    HydraLossConfig cfg;
    const auto h = loss_hydra(preds, &preds, gts, cfg);
    for (const LossBreakdown& b : {h.o2o, h.o2m}) {
      EXPECT_GE(b.entity_cls, 0.0);
      EXPECT_GE(b.relation_cls, 0.0);
      EXPECT_GE(b.box_l1, 0.0);
      EXPECT_GE(b.box_giou, 0.0);
      EXPECT_TRUE(std::isfinite(b.total));
    }
  }
}

}  // namespace
}  // namespace hydra
