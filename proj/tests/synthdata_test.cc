#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "hydra/synthdata.h"
#include "test_util.h"

namespace hydra {
namespace {

using testing::random_box;

bool has(const std::vector<int>& preds, int p) {
  return std::find(preds.begin(), preds.end(), p) != preds.end();
}

std::vector<double> flat(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

class TempFile {
 public:
  explicit TempFile(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / name) {}
  ~TempFile() { std::filesystem::remove(path_); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

TEST(PredicateOracleTest, LeftAndRight) {
  const NormBox a{0.2, 0.5, 0.2, 0.2}, b{0.8, 0.5, 0.2, 0.2};
  EXPECT_EQ(predicate_oracle(a, b), (std::vector<int>{kLeftOf}));
  EXPECT_EQ(predicate_oracle(b, a), (std::vector<int>{kRightOf}));
}

TEST(PredicateOracleTest, IdenticalBoxesOnlyOverlap) {
  const NormBox a{0.4, 0.4, 0.3, 0.2};
  EXPECT_EQ(predicate_oracle(a, a), (std::vector<int>{kOverlaps}));
}

TEST(PredicateOracleTest, Containment) {
  const NormBox outer = NormBox::from_corners(0.1, 0.1, 0.9, 0.9);
  const NormBox inner = NormBox::from_corners(0.3, 0.3, 0.5, 0.5);
  EXPECT_EQ(predicate_oracle(inner, outer), (std::vector<int>{kInside}));
  EXPECT_TRUE(predicate_oracle(outer, inner).empty());
}

TEST(PredicateOracleTest, TouchingEdgesCountAsLeftOf) {
  const NormBox a = NormBox::from_corners(0.0, 0.0, 0.5, 0.5);
  const NormBox b = NormBox::from_corners(0.5, 0.0, 1.0, 0.5);
  EXPECT_EQ(predicate_oracle(a, b), (std::vector<int>{kLeftOf}));
}

TEST(PredicateOracleTest, RandomPairsAreConsistent) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const NormBox a = random_box(rng), b = random_box(rng);
    const auto ab = predicate_oracle(a, b), ba = predicate_oracle(b, a);
    EXPECT_EQ(has(ab, kLeftOf), has(ba, kRightOf));
    EXPECT_EQ(has(ab, kAbove), has(ba, kBelow));
    EXPECT_FALSE(has(ab, kLeftOf) && has(ab, kRightOf));
    EXPECT_FALSE(has(ab, kInside) && has(ba, kInside));
    EXPECT_EQ(has(ab, kOverlaps), has(ba, kOverlaps));
    const bool disjoint = iou(a, b) == 0.0;
    EXPECT_EQ(has(ab, kOverlaps) || has(ab, kInside) || has(ba, kInside), !disjoint);
    EXPECT_TRUE(std::is_sorted(ab.begin(), ab.end()));
  }
}

TEST(GenSpecTest, InfeasibleSpecs) {
  GenSpec s;
  s.grid_h = s.grid_w = 2;
  s.min_entities = s.max_entities = 5;
  EXPECT_THROW(generate_scene(0, s), GenerationError);
  s = GenSpec{};
  s.min_entities = 1;
  EXPECT_THROW(s.validate(), GenerationError);
  s = GenSpec{};
  s.n_relation_classes = 7;
  EXPECT_THROW(s.validate(), GenerationError);
  s = GenSpec{};
  s.token_dim = 4;
  EXPECT_THROW(s.validate(), GenerationError);
  EXPECT_NO_THROW(GenSpec{}.validate());
}

TEST(GenerateTest, SameSeedBitIdentical) {
  const GenSpec s;
  const SceneSample a = generate_scene(42, s), b = generate_scene(42, s);
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.entities, b.entities);
  EXPECT_EQ(a.triplets, b.triplets);
  EXPECT_EQ(flat(a.tokens), flat(b.tokens));
  const SceneSample c = generate_scene(43, s);
  EXPECT_NE(flat(a.tokens), flat(c.tokens));
}

TEST(GenerateTest, SceneInvariants) {
  const GenSpec s;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const SceneSample sc = generate_scene(seed, s);
    EXPECT_EQ(sc.tokens.shape(), (Shape{s.grid_h * s.grid_w, s.token_dim}));
    ASSERT_GE(sc.entities.size(), s.min_entities);
    ASSERT_LE(sc.entities.size(), s.max_entities);
    ASSERT_GE(sc.triplets.size(), 1u);
    EXPECT_LE(sc.triplets.size(), s.max_triplets);
    std::set<std::tuple<int, int, int>> seen;
    for (const GtTriplet& t : sc.triplets) {
      ASSERT_GE(t.sub_entity, 0);
      ASSERT_LT(static_cast<std::size_t>(t.sub_entity), sc.entities.size());
      ASSERT_LT(static_cast<std::size_t>(t.obj_entity), sc.entities.size());
      EXPECT_NE(t.sub_entity, t.obj_entity);
      const Entity& a = sc.entities[static_cast<std::size_t>(t.sub_entity)];
      const Entity& b = sc.entities[static_cast<std::size_t>(t.obj_entity)];
      EXPECT_EQ(t.sub_class, a.cls);
      EXPECT_EQ(t.obj_class, b.cls);
      EXPECT_EQ(t.sub_box, a.box);
      EXPECT_EQ(t.obj_box, b.box);
      EXPECT_GE(a.cls, 0);
      EXPECT_LT(static_cast<std::size_t>(a.cls), s.n_entity_classes);
      EXPECT_TRUE(has(predicate_oracle(a.box, b.box), t.rel_class)) << sc.id;
      EXPECT_TRUE(seen.insert({t.sub_entity, t.rel_class, t.obj_entity}).second);
    }
  }
}

TEST(GenerateTest, EntitiesStayVisible) {
  // Every entity owns at least one cell whose box cue is its own box.
  GenSpec s;
  s.noise = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SceneSample sc = generate_scene(seed, s);
    for (const Entity& e : sc.entities) {
      bool visible = false;
      for (std::size_t cell = 0; cell < sc.tokens.rows() && !visible; ++cell) {
        const std::size_t d = s.token_dim;
        visible = sc.tokens.at(cell, d - 4) == e.box.cx &&
                  sc.tokens.at(cell, d - 3) == e.box.cy &&
                  sc.tokens.at(cell, d - 2) == e.box.w &&
                  sc.tokens.at(cell, d - 1) == e.box.h;
      }
      EXPECT_TRUE(visible) << sc.id;
    }
  }
}

TEST(GenerateTest, MeanTripletCountNearTarget) {
  const GenSpec s;
  const Dataset d = generate_dataset(1000, 1000, s);
  double total = 0;
  for (const auto& sc : d) total += static_cast<double>(sc.triplets.size());
  EXPECT_NEAR(total / 1000.0, s.triplets_per_image, 0.5);
}

TEST(GenerateTest, SkewMakesLongTail) {
  GenSpec flat_spec, skew_spec;
  skew_spec.predicate_skew = 1.5;
  auto histogram = [](const Dataset& d) {
    std::map<int, double> h;
    for (const auto& sc : d) {
      for (const auto& t : sc.triplets) h[t.rel_class] += 1;
    }
    return h;
  };
  auto hf = histogram(generate_dataset(0, 400, flat_spec));
  auto hs = histogram(generate_dataset(0, 400, skew_spec));
  // The most common predicate gains share relative to the rarest one.
  const double ratio_flat = hf[kLeftOf] / std::max(1.0, hf[kInside]);
  const double ratio_skew = hs[kLeftOf] / std::max(1.0, hs[kInside]);
  EXPECT_GT(ratio_skew, 2.0 * ratio_flat);
}

TEST(DatasetIoTest, RoundTrip) {
  const Dataset d = generate_dataset(5, 100, GenSpec{});
  TempFile f("hydra_ds_roundtrip.jsonl");
  save_dataset(f.str(), d);
  const Dataset back = load_dataset(f.str());
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].id, d[i].id);
    EXPECT_EQ(back[i].entities, d[i].entities);
    EXPECT_EQ(back[i].triplets, d[i].triplets);
    ASSERT_EQ(back[i].tokens.shape(), d[i].tokens.shape());
    for (std::size_t j = 0; j < d[i].tokens.numel(); ++j) {
      EXPECT_NEAR(back[i].tokens.data()[j], d[i].tokens.data()[j], 1e-9);
    }
  }
}

TEST(DatasetIoTest, TruncatedFileReportsLine) {
  const Dataset d = generate_dataset(5, 3, GenSpec{});
  TempFile f("hydra_ds_truncated.jsonl");
  {
    std::ofstream out(f.str());
    out << scene_to_json(d[0]) << '\n' << scene_to_json(d[1]) << '\n';
    const std::string third = scene_to_json(d[2]);
    out << third.substr(0, third.size() / 2);
  }
  try {
    load_dataset(f.str());
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(DatasetIoTest, VersionMismatch) {
  std::string line = scene_to_json(generate_scene(1, GenSpec{}));
  const auto pos = line.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  line.replace(pos, 11, "\"version\":2");
  try {
    scene_from_json(line, 1);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(DatasetIoTest, SchemaErrors) {
  EXPECT_THROW(scene_from_json("{\"version\":1}", 4), DatasetError);
  EXPECT_THROW(load_dataset("/nonexistent/data.jsonl"), std::runtime_error);
}

}  // namespace
}  // namespace hydra
