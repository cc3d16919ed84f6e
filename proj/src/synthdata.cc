#include "hydra/synthdata.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace hydra {

namespace {

bool contains(const CornerBox& outer, const CornerBox& inner) {
  return inner.x1 >= outer.x1 && inner.x2 <= outer.x2 &&
         inner.y1 >= outer.y1 && inner.y2 <= outer.y2;
}

std::uint64_t mix_seed(std::uint64_t seed) {
  // splitmix64 finalizer; decorrelates consecutive scene seeds.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Row 0 is background; row c + 1 embeds entity class c.
std::vector<std::vector<double>> class_embeddings(const GenSpec& spec) {
  std::mt19937_64 rng(spec.embedding_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<std::vector<double>> table(spec.n_entity_classes + 1,
                                         std::vector<double>(spec.token_dim));
  for (auto& row : table) {
    for (double& v : row) v = dist(rng);
  }
  return table;
}

}  // namespace

void GenSpec::validate() const {
  auto fail = [](const std::string& msg) {
    throw GenerationError("infeasible generation spec: " + msg);
  };
  if (grid_h < 2 || grid_w < 2) fail("grid must be at least 2x2");
  if (token_dim < 1) fail("token_dim must be >= 1");
  if (box_cues && token_dim < 5) fail("box_cues needs token_dim >= 5");
  if (min_entities < 2) fail("need at least 2 entities per scene");
  if (min_entities > max_entities) fail("min_entities > max_entities");
  if (max_entities > grid_h * grid_w) {
    fail("more entities than grid cells (" + std::to_string(max_entities) +
         " > " + std::to_string(grid_h * grid_w) + ")");
  }
  if (max_extent < 1 || max_extent > std::min(grid_h, grid_w)) {
    fail("max_extent must lie in [1, min(grid_h, grid_w)]");
  }
  if (n_entity_classes < 1) fail("n_entity_classes must be >= 1");
  if (n_relation_classes != kNumPredicates) {
    fail("n_relation_classes must be " + std::to_string(kNumPredicates));
  }
  if (!(triplets_per_image >= 1.0)) fail("triplets_per_image must be >= 1");
  if (max_triplets < 1) fail("max_triplets must be >= 1");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (!(predicate_skew >= 0.0)) fail("predicate_skew must be >= 0");
}

std::vector<int> predicate_oracle(const NormBox& a, const NormBox& b) {
  const CornerBox ca = a.corners();
  const CornerBox cb = b.corners();
  std::vector<int> out;
  if (ca.x2 <= cb.x1) out.push_back(kLeftOf);
  if (ca.x1 >= cb.x2) out.push_back(kRightOf);
  if (ca.y2 <= cb.y1) out.push_back(kAbove);
  if (ca.y1 >= cb.y2) out.push_back(kBelow);
  const bool a_in_b = contains(cb, ca) && !(a == b);
  const bool b_in_a = contains(ca, cb) && !(a == b);
  if (a_in_b) out.push_back(kInside);
  if (iou(a, b) > 0.0 && !a_in_b && !b_in_a) out.push_back(kOverlaps);
  return out;
}

SceneSample generate_scene(std::uint64_t seed, const GenSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(mix_seed(seed));
  const std::size_t H = spec.grid_h, W = spec.grid_w;
  auto uniform_int = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  struct Placed {
    std::size_t x0, y0, w, h;
    int cls;
  };
  const std::size_t n_entities =
      uniform_int(spec.min_entities, spec.max_entities);
  std::vector<Placed> placed;
  std::vector<int> owner;  // per cell, index into `placed` or -1

  auto paint = [&](const std::vector<Placed>& ents) {
    // Larger entities first so smaller ones stay visible on top.
    std::vector<std::size_t> order(ents.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ents[a].w * ents[a].h > ents[b].w * ents[b].h;
    });
    std::vector<int> cells(H * W, -1);
    for (std::size_t idx : order) {
      const Placed& e = ents[idx];
      for (std::size_t y = e.y0; y < e.y0 + e.h; ++y) {
        for (std::size_t x = e.x0; x < e.x0 + e.w; ++x) {
          cells[y * W + x] = static_cast<int>(idx);
        }
      }
    }
    return cells;
  };

  constexpr int kMaxAttempts = 200;
  for (std::size_t i = 0; i < n_entities; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      Placed p;
      p.w = uniform_int(1, spec.max_extent);
      p.h = uniform_int(1, spec.max_extent);
      p.x0 = uniform_int(0, W - p.w);
      p.y0 = uniform_int(0, H - p.h);
      p.cls = static_cast<int>(uniform_int(0, spec.n_entity_classes - 1));
      bool duplicate = false;
      for (const Placed& q : placed) {
        duplicate = duplicate || (q.x0 == p.x0 && q.y0 == p.y0 && q.w == p.w &&
                                  q.h == p.h);
      }
      if (duplicate) continue;
      std::vector<Placed> trial = placed;
      trial.push_back(p);
      const std::vector<int> cells = paint(trial);
      std::vector<int> visible(trial.size(), 0);
      for (int c : cells) {
        if (c >= 0) visible[static_cast<std::size_t>(c)] = 1;
      }
      if (std::all_of(visible.begin(), visible.end(), [](int v) { return v; })) {
        placed = std::move(trial);
        owner = cells;
        ok = true;
      }
    }
    if (!ok) {
      throw GenerationError("could not place entity " + std::to_string(i) +
                            " without full occlusion (seed " +
                            std::to_string(seed) + ")");
    }
  }

  SceneSample scene;
  scene.id = "scene-" + std::to_string(seed);
  scene.grid_h = H;
  scene.grid_w = W;
  const double fw = static_cast<double>(W), fh = static_cast<double>(H);
  for (const Placed& p : placed) {
    scene.entities.push_back(
        {p.cls, NormBox::from_corners(static_cast<double>(p.x0) / fw,
                                      static_cast<double>(p.y0) / fh,
                                      static_cast<double>(p.x0 + p.w) / fw,
                                      static_cast<double>(p.y0 + p.h) / fh)});
  }

  const auto embeddings = class_embeddings(spec);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> tokens(H * W * spec.token_dim);
  for (std::size_t cell = 0; cell < H * W; ++cell) {
    const int who = owner[cell];
    const auto& emb =
        embeddings[who < 0 ? 0 : static_cast<std::size_t>(placed[static_cast<std::size_t>(who)].cls) + 1];
    const std::size_t cue_from = spec.box_cues ? spec.token_dim - 4 : spec.token_dim;
    for (std::size_t k = 0; k < spec.token_dim; ++k) {
      double base = emb[k];
      if (k >= cue_from) {
        base = who < 0 ? 0.0
                       : scene.entities[static_cast<std::size_t>(who)]
                             .box.as_array()[k - cue_from];
      }
      tokens[cell * spec.token_dim + k] = base + spec.noise * noise(rng);
    }
  }
  scene.tokens = Tensor::from(H * W, spec.token_dim, std::move(tokens));

  // All geometrically true triplets, then a weighted subsample.
  struct Candidate {
    int s, r, o;
  };
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < scene.entities.size(); ++a) {
    for (std::size_t b = 0; b < scene.entities.size(); ++b) {
      if (a == b) continue;
      for (int r : predicate_oracle(scene.entities[a].box, scene.entities[b].box)) {
        candidates.push_back({static_cast<int>(a), r, static_cast<int>(b)});
      }
    }
  }
  // Poisson offset calibrated so the dataset mean lands on the target despite
  // small scenes running out of true predicates.
  const double lambda = std::max(0.0, spec.triplets_per_image - 1.0 + 1.1);
  std::size_t want = 1 + std::poisson_distribution<std::size_t>(lambda)(rng);
  want = std::min({want, spec.max_triplets, candidates.size()});

  std::vector<double> keys(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    // Efraimidis-Spirakis weighted sampling without replacement.
    const double w = 1.0 / std::pow(static_cast<double>(candidates[i].r) + 1.0,
                                     spec.predicate_skew);
    const double u = std::uniform_real_distribution<double>(1e-300, 1.0)(rng);
    keys[i] = std::log(u) / w;
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  order.resize(want);
  std::sort(order.begin(), order.end());
  for (std::size_t idx : order) {
    const Candidate& c = candidates[idx];
    const Entity& s = scene.entities[static_cast<std::size_t>(c.s)];
    const Entity& o = scene.entities[static_cast<std::size_t>(c.o)];
    scene.triplets.push_back({s.cls, o.cls, c.r, s.box, o.box, c.s, c.o});
  }
  return scene;
}

Dataset generate_dataset(std::uint64_t base_seed, std::size_t count,
                         const GenSpec& spec) {
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_scene(base_seed + i, spec));
  }
  return out;
}

std::string scene_to_json(const SceneSample& scene) {
  nlohmann::ordered_json j;
  j["version"] = kDatasetVersion;
  j["id"] = scene.id;
  j["grid"] = {scene.grid_h, scene.grid_w};
  nlohmann::ordered_json ents = nlohmann::ordered_json::array();
  for (const Entity& e : scene.entities) {
    ents.push_back({{"c", e.cls}, {"box", e.box.as_array()}});
  }
  j["entities"] = std::move(ents);
  nlohmann::ordered_json trips = nlohmann::ordered_json::array();
  for (const GtTriplet& t : scene.triplets) {
    trips.push_back({{"s", t.sub_entity}, {"r", t.rel_class}, {"o", t.obj_entity}});
  }
  j["triplets"] = std::move(trips);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < scene.tokens.rows(); ++r) {
    auto row = scene.tokens.data().subspan(r * scene.tokens.cols(),
                                           scene.tokens.cols());
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["tokens"] = std::move(rows);
  return j.dump();
}

SceneSample scene_from_json(const std::string& line, std::size_t line_no) {
  auto fail = [line_no](const std::string& msg) -> DatasetError {
    return DatasetError("line " + std::to_string(line_no) + ": " + msg, line_no);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw fail("expected a JSON object");
  if (!j.contains("version")) throw fail("missing schema version");
  if (j["version"] != kDatasetVersion) {
    throw fail("schema version mismatch: expected " +
               std::to_string(kDatasetVersion) + ", found " + j["version"].dump());
  }
  SceneSample s;
  try {
    s.id = j.at("id").get<std::string>();
    const auto grid = j.at("grid").get<std::vector<std::size_t>>();
    if (grid.size() != 2) throw fail("grid must be [H, W]");
    s.grid_h = grid[0];
    s.grid_w = grid[1];
    for (const auto& e : j.at("entities")) {
      const auto b = e.at("box").get<std::vector<double>>();
      if (b.size() != 4) throw fail("box must have 4 numbers");
      s.entities.push_back({e.at("c").get<int>(), {b[0], b[1], b[2], b[3]}});
    }
    for (const auto& t : j.at("triplets")) {
      const int si = t.at("s").get<int>();
      const int oi = t.at("o").get<int>();
      if (si < 0 || oi < 0 || static_cast<std::size_t>(si) >= s.entities.size() ||
          static_cast<std::size_t>(oi) >= s.entities.size()) {
        throw fail("triplet references a missing entity");
      }
      const Entity& se = s.entities[static_cast<std::size_t>(si)];
      const Entity& oe = s.entities[static_cast<std::size_t>(oi)];
      s.triplets.push_back(
          {se.cls, oe.cls, t.at("r").get<int>(), se.box, oe.box, si, oi});
    }
    const auto& rows = j.at("tokens");
    if (rows.size() != s.grid_h * s.grid_w) throw fail("token count != H*W");
    std::vector<double> data;
    std::size_t width = 0;
    for (const auto& r : rows) {
      auto v = r.get<std::vector<double>>();
      if (width == 0) width = v.size();
      if (v.size() != width || width == 0) throw fail("ragged token rows");
      data.insert(data.end(), v.begin(), v.end());
    }
    s.tokens = Tensor::from(rows.size(), width, std::move(data));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("schema error: ") + e.what());
  }
  return s;
}

void save_dataset(const std::string& path, std::span<const SceneSample> scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  for (const SceneSample& s : scenes) out << scene_to_json(s) << '\n';
  if (!out) throw std::runtime_error("write failed for dataset " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path, 0);
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(scene_from_json(line, line_no));
  }
  return out;
}

}  // namespace hydra
