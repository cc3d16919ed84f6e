#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydra/geometry.h"
#include "hydra/tensor.h"
#include "hydra/triplet.h"

namespace hydra {

// Spatial predicates, in relation-class index order.
enum Predicate : int {
  kLeftOf = 0,
  kRightOf = 1,
  kAbove = 2,
  kBelow = 3,
  kInside = 4,
  kOverlaps = 5,
};
inline constexpr std::size_t kNumPredicates = 6;
inline constexpr std::array<const char*, kNumPredicates> kPredicateNames = {
    "left-of", "right-of", "above", "below", "inside", "overlaps"};

struct GenSpec {
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t token_dim = 16;
  std::size_t min_entities = 2;
  std::size_t max_entities = 6;
  std::size_t max_extent = 4;  // largest entity side, in cells
  std::size_t n_entity_classes = 10;
  std::size_t n_relation_classes = kNumPredicates;
  double triplets_per_image = 5.5;
  std::size_t max_triplets = 12;
  double noise = 0.1;
  // Cells covered by an entity carry its box (cx, cy, w, h) in the last four
  // token dims, standing in for extent-aware backbone features.
  bool box_cues = true;
  // Zipf exponent over predicate index when subsampling true triplets; 0 keeps
  // the subsample uniform.
  double predicate_skew = 0.0;
  std::uint64_t embedding_seed = 7;

  // Throws GenerationError when no scene can satisfy the spec.
  void validate() const;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entity {
  int cls = 0;
  NormBox box;
  bool operator==(const Entity&) const = default;
};

struct SceneSample {
  std::string id;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Tensor tokens;  // (grid_h * grid_w) x token_dim, row-major over the grid
  std::vector<Entity> entities;
  std::vector<GtTriplet> triplets;
};

using Dataset = std::vector<SceneSample>;

// Geometric truth of every predicate for subject `a` against object `b`,
// ascending by index.
std::vector<int> predicate_oracle(const NormBox& a, const NormBox& b);

SceneSample generate_scene(std::uint64_t seed, const GenSpec& spec);

// Scenes for seeds base_seed, base_seed + 1, ...
Dataset generate_dataset(std::uint64_t base_seed, std::size_t count,
                         const GenSpec& spec);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr int kDatasetVersion = 1;

// One JSON object per line.
std::string scene_to_json(const SceneSample& scene);
SceneSample scene_from_json(const std::string& line, std::size_t line_no);
void save_dataset(const std::string& path, std::span<const SceneSample> scenes);
Dataset load_dataset(const std::string& path);

}  // namespace hydra
