#include "hydra/decoder.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hydra/ops.h"

namespace hydra {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "hydra-assign-checkpoint";

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Linear linear(std::size_t in, std::size_t out, double gain = 1.0) {
    const double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(in * out);
    for (double& v : w) v = dist(rng_);
    return {Tensor::from(in, out, std::move(w), true),
            Tensor::zeros(1, out, true)};
  }

  Tensor normal(std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> w(rows * cols);
    for (double& v : w) v = dist(rng_);
    return Tensor::from(rows, cols, std::move(w), true);
  }

  Norm norm(std::size_t d) {
    return {Tensor::full(1, d, 1.0, true), Tensor::zeros(1, d, true)};
  }

  MultiHeadAttention attention(std::size_t d, std::size_t heads) {
    MultiHeadAttention a;
    a.q = linear(d, d);
    a.k = linear(d, d);
    a.v = linear(d, d);
    a.out = linear(d, d);
    a.heads = heads;
    return a;
  }

  Mlp mlp(std::size_t in, std::size_t hidden, std::size_t out) {
    Mlp m;
    m.layers.push_back(linear(in, hidden));
    m.layers.push_back(linear(hidden, hidden));
    m.layers.push_back(linear(hidden, out));
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

void fill_bias(Tensor& bias, double value) {
  for (double& v : bias.mutable_data()) v = value;
}

}  // namespace

void DecoderConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("decoder config: " + msg);
  };
  if (n_queries < 1) fail("n_queries must be >= 1");
  if (n_heads < 1 || d_model % n_heads != 0) {
    fail("d_model must be divisible by n_heads");
  }
  if (d_model < 2 || d_model % 4 != 0) fail("d_model must be a multiple of 4");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (ffn_dim < 1) fail("ffn_dim must be >= 1");
  if (n_entity_classes < 1 || n_relation_classes < 1) {
    fail("class counts must be >= 1");
  }
  if (token_dim < 1 || grid_h < 1 || grid_w < 1) fail("empty token grid");
}

Tensor Linear::operator()(const Tensor& x) const {
  return add_row(matmul(x, weight), bias);
}

Tensor Norm::operator()(const Tensor& x) const {
  return layernorm(x, gain, bias);
}

Tensor MultiHeadAttention::operator()(const Tensor& query,
                                      const Tensor& memory) const {
  const Tensor qp = q(query);
  const Tensor kp = k(memory);
  const Tensor vp = v(memory);
  const std::size_t d = qp.cols();
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(qp, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(kp, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(vp, h * dh, (h + 1) * dh);
    const Tensor weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    outs.push_back(matmul(weights, vh));
  }
  const Tensor joined = heads == 1 ? outs.front() : concat_cols(outs);
  return out(joined);
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

Tensor grid_positional_encoding(std::size_t h, std::size_t w, std::size_t d) {
  const std::size_t half = d / 2;
  std::vector<double> out(h * w * d, 0.0);
  auto encode = [](double pos, std::size_t dims, double* dst) {
    for (std::size_t i = 0; i < dims; i += 2) {
      const double freq =
          std::pow(100.0, -static_cast<double>(i) / static_cast<double>(dims));
      dst[i] = std::sin(pos * freq);
      if (i + 1 < dims) dst[i + 1] = std::cos(pos * freq);
    }
  };
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double* row = out.data() + (r * w + c) * d;
      encode(static_cast<double>(r), half, row);
      encode(static_cast<double>(c), d - half, row + half);
    }
  }
  return Tensor::from(h * w, d, std::move(out));
}

RelationModel::RelationModel(const DecoderConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  Initializer init(seed);
  query_sub_ = init.normal(config_.n_queries, d, 0.02);
  query_obj_ = init.normal(config_.n_queries, d, 0.02);
  token_proj_ = init.linear(config_.token_dim, d);
  positions_ = grid_positional_encoding(config_.grid_h, config_.grid_w, d);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    DecoderLayer layer;
    layer.sa_norm = init.norm(d);
    layer.self_attn = init.attention(d, config_.n_heads);
    layer.ca_norm = init.norm(d);
    layer.cross_attn = init.attention(d, config_.n_heads);
    layer.ffn_norm = init.norm(d);
    layer.ffn_in = init.linear(d, config_.ffn_dim);
    layer.ffn_out = init.linear(config_.ffn_dim, d);
    layers_.push_back(std::move(layer));
  }
  out_norm_ = init.norm(d);
  sub_box_head_ = init.mlp(d, d, 4);
  obj_box_head_ = init.mlp(d, d, 4);
  sub_cls_head_ = init.linear(d, config_.n_entity_classes);
  obj_cls_head_ = init.linear(d, config_.n_entity_classes);
  rel_head_ = init.mlp(2 * d, d, config_.n_relation_classes);
  // Focal-loss prior: start every class near probability 0.01.
  const double prior = -std::log((1.0 - 0.01) / 0.01);
  fill_bias(sub_cls_head_.bias, prior);
  fill_bias(obj_cls_head_.bias, prior);
  fill_bias(rel_head_.layers.back().bias, prior);
}

Tensor RelationModel::encode(const Tensor& tokens) const {
  if (tokens.rows() != config_.grid_h * config_.grid_w ||
      tokens.cols() != config_.token_dim) {
    throw DimensionError("encode: tokens " + tokens.shape().str() +
                         " do not match grid " +
                         Shape{config_.grid_h * config_.grid_w,
                               config_.token_dim}
                             .str());
  }
  return token_proj_(tokens) + positions_;
}

std::vector<QueryStates> RelationModel::decode(const Tensor& memory,
                                               DecoderPath path) const {
  if (memory.cols() != config_.d_model) {
    throw DimensionError("decode: memory " + memory.shape().str() +
                         " has wrong width for d_model " +
                         std::to_string(config_.d_model));
  }
  const std::size_t n = config_.n_queries;
  const Tensor parts[] = {query_sub_, query_obj_};
  Tensor x = concat_rows(parts);
  std::vector<QueryStates> states;
  states.reserve(layers_.size());
  for (const DecoderLayer& layer : layers_) {
    if (path == DecoderPath::kRelDecoder) {
      const Tensor h = layer.sa_norm(x);
      x = x + layer.self_attn(h, h);
    }
    // Cross-attention is row-wise, so one pass over the stack equals separate
    // subject and object passes with the same weights.
    x = x + layer.cross_attn(layer.ca_norm(x), memory);
    x = x + layer.ffn_out(relu(layer.ffn_in(layer.ffn_norm(x))));
    const Tensor y = out_norm_(x);
    states.push_back({slice_rows(y, 0, n), slice_rows(y, n, 2 * n)});
  }
  return states;
}

QueryStates RelationModel::rel_decoder_forward(const Tensor& memory) const {
  return decode(memory, DecoderPath::kRelDecoder).back();
}

QueryStates RelationModel::hydra_branch_forward(const Tensor& memory) const {
  return decode(memory, DecoderPath::kHydraBranch).back();
}

PredictionTensors RelationModel::predict_heads(const QueryStates& s) const {
  PredictionTensors p;
  p.sub_logits = sub_cls_head_(s.sub);
  p.obj_logits = obj_cls_head_(s.obj);
  const Tensor pair[] = {s.sub, s.obj};
  p.rel_logits = rel_head_(concat_cols(pair));
  p.sub_boxes = sigmoid(sub_box_head_(s.sub));
  p.obj_boxes = sigmoid(obj_box_head_(s.obj));
  return p;
}

PredictionTensors RelationModel::infer(const Tensor& tokens) const {
  return predict_heads(rel_decoder_forward(encode(tokens)));
}

std::vector<std::pair<std::string, Tensor>> RelationModel::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto lin = [&out](const std::string& name, const Linear& l) {
    out.emplace_back(name + ".weight", l.weight);
    out.emplace_back(name + ".bias", l.bias);
  };
  auto nrm = [&out](const std::string& name, const Norm& n) {
    out.emplace_back(name + ".gain", n.gain);
    out.emplace_back(name + ".bias", n.bias);
  };
  auto att = [&lin](const std::string& name, const MultiHeadAttention& a) {
    lin(name + ".q", a.q);
    lin(name + ".k", a.k);
    lin(name + ".v", a.v);
    lin(name + ".out", a.out);
  };
  auto mlp = [&lin](const std::string& name, const Mlp& m) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      lin(name + "." + std::to_string(i), m.layers[i]);
    }
  };
  out.emplace_back("query_sub", query_sub_);
  out.emplace_back("query_obj", query_obj_);
  lin("token_proj", token_proj_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layers." + std::to_string(l);
    const DecoderLayer& layer = layers_[l];
    nrm(p + ".sa_norm", layer.sa_norm);
    att(p + ".self_attn", layer.self_attn);
    nrm(p + ".ca_norm", layer.ca_norm);
    att(p + ".cross_attn", layer.cross_attn);
    nrm(p + ".ffn_norm", layer.ffn_norm);
    lin(p + ".ffn_in", layer.ffn_in);
    lin(p + ".ffn_out", layer.ffn_out);
  }
  nrm("out_norm", out_norm_);
  mlp("sub_box_head", sub_box_head_);
  mlp("obj_box_head", obj_box_head_);
  lin("sub_cls_head", sub_cls_head_);
  lin("obj_cls_head", obj_cls_head_);
  mlp("rel_head", rel_head_);
  return out;
}

std::vector<Tensor> RelationModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t RelationModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : parameters()) n += t.numel();
  return n;
}

RelationModel RelationModel::clone() const {
  RelationModel out(config_, 0);
  const auto src = named_parameters();
  auto dst = out.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::copy(src[i].second.data().begin(), src[i].second.data().end(),
              dst[i].second.mutable_data().begin());
  }
  return out;
}

void RelationModel::zero_self_attention_output() {
  for (DecoderLayer& layer : layers_) {
    for (double& v : layer.self_attn.out.weight.mutable_data()) v = 0.0;
    for (double& v : layer.self_attn.out.bias.mutable_data()) v = 0.0;
  }
}

std::string RelationModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = {{"n_queries", config_.n_queries},
                 {"d_model", config_.d_model},
                 {"n_layers", config_.n_layers},
                 {"n_heads", config_.n_heads},
                 {"ffn_dim", config_.ffn_dim},
                 {"n_entity_classes", config_.n_entity_classes},
                 {"n_relation_classes", config_.n_relation_classes},
                 {"token_dim", config_.token_dim},
                 {"grid_h", config_.grid_h},
                 {"grid_w", config_.grid_w}};
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [name, t] : named_parameters()) {
    params[name] = {{"shape", {t.rows(), t.cols()}},
                    {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  j["params"] = std::move(params);
  return j.dump();
}

RelationModel RelationModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) {
    throw CheckpointError("not a hydra-assign checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          j.value("version", nlohmann::json(-1)).dump());
  }
  DecoderConfig cfg;
  try {
    const auto& c = j.at("config");
    cfg.n_queries = c.at("n_queries").get<std::size_t>();
    cfg.d_model = c.at("d_model").get<std::size_t>();
    cfg.n_layers = c.at("n_layers").get<std::size_t>();
    cfg.n_heads = c.at("n_heads").get<std::size_t>();
    cfg.ffn_dim = c.at("ffn_dim").get<std::size_t>();
    cfg.n_entity_classes = c.at("n_entity_classes").get<std::size_t>();
    cfg.n_relation_classes = c.at("n_relation_classes").get<std::size_t>();
    cfg.token_dim = c.at("token_dim").get<std::size_t>();
    cfg.grid_h = c.at("grid_h").get<std::size_t>();
    cfg.grid_w = c.at("grid_w").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }
  RelationModel model(cfg, 0);
  const auto& params = j.at("params");
  for (auto& [name, t] : model.named_parameters()) {
    if (!params.contains(name)) throw CheckpointError("missing parameter " + name);
    const auto& p = params.at(name);
    const auto data = p.at("data").get<std::vector<double>>();
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
        data.size() != t.numel()) {
      throw CheckpointError("shape mismatch for parameter " + name);
    }
    auto dst = t.mutable_data();
    std::copy(data.begin(), data.end(), dst.begin());
  }
  return model;
}

void RelationModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << to_json() << '\n';
}

RelationModel RelationModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace hydra
