#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hydra/predictions.h"
#include "hydra/tensor.h"

namespace hydra {

struct DecoderConfig {
  std::size_t n_queries = 32;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 128;
  std::size_t n_entity_classes = 10;
  std::size_t n_relation_classes = 6;
  std::size_t token_dim = 16;
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;

  // Throws std::invalid_argument when inconsistent.
  void validate() const;
  bool operator==(const DecoderConfig&) const = default;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  Tensor operator()(const Tensor& x) const;
};

struct Norm {
  Tensor gain;
  Tensor bias;
  Tensor operator()(const Tensor& x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, out;
  std::size_t heads = 1;
  Tensor operator()(const Tensor& query, const Tensor& memory) const;
};

struct DecoderLayer {
  Norm sa_norm;
  MultiHeadAttention self_attn;
  Norm ca_norm;
  MultiHeadAttention cross_attn;
  Norm ffn_norm;
  Linear ffn_in, ffn_out;
};

struct Mlp {
  std::vector<Linear> layers;  // ReLU between layers
  Tensor operator()(const Tensor& x) const;
};

// Which decoder topology a forward pass runs. Both share every weight; the
// Hydra Branch skips the self-attention sublayers.
enum class DecoderPath { kRelDecoder, kHydraBranch };

/// Subject and object query states (N x d each) read out after one layer.
struct QueryStates {
  Tensor sub;
  Tensor obj;
};

/// Toy relation decoder with parameter-shared Hydra Branch.
///
/// Layer: x += SA(LN(x)) over the stacked [Q_sub; Q_obj] (RelDecoder only),
/// x += CA(LN(x), F), x += FFN(LN(x)). Every layer's output passes through a
/// shared output norm before the shared prediction heads.
class RelationModel {
 public:
  RelationModel(const DecoderConfig& config, std::uint64_t seed);

  // Parameters are shared handles; copying would alias them.
  RelationModel(const RelationModel&) = delete;
  RelationModel& operator=(const RelationModel&) = delete;
  RelationModel(RelationModel&&) = default;
  RelationModel& operator=(RelationModel&&) = default;

  const DecoderConfig& config() const { return config_; }

  // Image tokens (HW x token_dim) -> memory F (HW x d) with positions added.
  Tensor encode(const Tensor& tokens) const;

  // Query states after every layer, first to last.
  std::vector<QueryStates> decode(const Tensor& memory, DecoderPath path) const;

  QueryStates rel_decoder_forward(const Tensor& memory) const;
  QueryStates hydra_branch_forward(const Tensor& memory) const;

  PredictionTensors predict_heads(const QueryStates& states) const;

  // Inference path: encode, RelDecoder, heads on the last layer.
  PredictionTensors infer(const Tensor& tokens) const;

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  // Deep copy of every parameter.
  RelationModel clone() const;

  // Zeroes every self-attention output projection, making SA an identity
  // under the residual connection.
  void zero_self_attention_output();

  std::string to_json() const;
  static RelationModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static RelationModel load(const std::string& path);

 private:
  DecoderConfig config_;
  Tensor query_sub_;
  Tensor query_obj_;
  Linear token_proj_;
  Tensor positions_;  // fixed, HW x d
  std::vector<DecoderLayer> layers_;
  Norm out_norm_;
  Mlp sub_box_head_, obj_box_head_;
  Linear sub_cls_head_, obj_cls_head_;
  Mlp rel_head_;
};

// Sinusoidal encodings for an h x w grid; rows then columns, d/2 dims each.
Tensor grid_positional_encoding(std::size_t h, std::size_t w, std::size_t d);

// Thrown when a checkpoint cannot be parsed or disagrees with expectations.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hydra
