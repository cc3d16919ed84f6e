#include "hydra/analysis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "hydra/ops.h"

namespace hydra {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw StatisticError("incomplete beta continued fraction did not converge");
}

std::vector<std::size_t> per_image_ds(const RelationModel& model,
                                      std::span<const SceneSample> dataset,
                                      DecoderPath path,
                                      std::optional<std::size_t> top_k) {
  NoGradScope no_grad;
  std::vector<std::size_t> out;
  out.reserve(dataset.size());
  for (const SceneSample& s : dataset) {
    const Tensor memory = model.encode(s.tokens);
    const QueryStates states = path == DecoderPath::kRelDecoder
                                   ? model.rel_decoder_forward(memory)
                                   : model.hydra_branch_forward(memory);
    const auto preds = model.predict_heads(states).triplets();
    out.push_back(diversity_score(preds, top_k));
  }
  return out;
}

double mean_of(const std::vector<std::size_t>& v) {
  if (v.empty()) return 0.0;
  return static_cast<double>(std::accumulate(v.begin(), v.end(), std::size_t{0})) /
         static_cast<double>(v.size());
}

Tensor query_embeddings(const RelationModel& model, const Tensor& tokens,
                        DecoderPath path) {
  const Tensor memory = model.encode(tokens);
  const QueryStates s = path == DecoderPath::kRelDecoder
                            ? model.rel_decoder_forward(memory)
                            : model.hydra_branch_forward(memory);
  const Tensor parts[] = {s.sub, s.obj};
  return concat_cols(parts);
}

}  // namespace

std::size_t diversity_score(std::span<const PredTriplet> preds,
                            std::optional<std::size_t> top_k) {
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(preds.size());
  for (const PredTriplet& p : preds) {
    if (p.p_rel.empty()) continue;
    const std::size_t c = argmax(p.p_rel);
    ranked.emplace_back(p.p_rel[c], c);
  }
  if (top_k && *top_k < ranked.size()) {
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    ranked.resize(*top_k);
  }
  std::set<std::size_t> classes;
  for (const auto& r : ranked) classes.insert(r.second);
  return classes.size();
}

double ads(const RelationModel& model, std::span<const SceneSample> dataset,
           bool sa_enabled, std::optional<std::size_t> top_k) {
  return mean_of(per_image_ds(
      model, dataset,
      sa_enabled ? DecoderPath::kRelDecoder : DecoderPath::kHydraBranch, top_k));
}

AdsReport ads_report(const RelationModel& model,
                     std::span<const SceneSample> dataset,
                     std::optional<std::size_t> top_k) {
  AdsReport r;
  r.ds_on = per_image_ds(model, dataset, DecoderPath::kRelDecoder, top_k);
  r.ds_off = per_image_ds(model, dataset, DecoderPath::kHydraBranch, top_k);
  r.ads_on = mean_of(r.ds_on);
  r.ads_off = mean_of(r.ds_off);
  return r;
}

std::vector<double> pairwise_distances(const Tensor& q) {
  const std::size_t n = q.rows(), d = q.cols();
  if (n < 2) {
    throw std::invalid_argument("pairwise distances need at least 2 rows, got " +
                                std::to_string(n));
  }
  const auto data = q.data();
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = data[i * d + k] - data[j * d + k];
        s += diff * diff;
      }
      out.push_back(std::sqrt(s));
    }
  }
  return out;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("incomplete beta needs a, b > 0");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("incomplete beta needs x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student t needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult paired_ttest(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("paired t-test needs equal lengths, got " +
                                std::to_string(x.size()) + " and " +
                                std::to_string(y.size()));
  }
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("paired t-test needs n >= 2");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (x[i] - y[i]) - mean;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) {
    throw StatisticError("paired differences have zero variance; t is undefined");
  }
  TTestResult r;
  r.n = n;
  r.mean_diff = mean;
  r.sd_diff = sd;
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.d = mean / sd;
  const double df = static_cast<double>(n - 1);
  // Two-sided tail computed directly so tiny p-values keep their precision.
  r.p = incomplete_beta(0.5 * df, 0.5, df / (df + r.t * r.t));
  return r;
}

DistanceStats distance_study(const RelationModel& model,
                             std::span<const SceneSample> dataset,
                             DistancePooling pooling) {
  if (dataset.empty()) throw std::invalid_argument("distance study needs images");
  NoGradScope no_grad;
  DistanceStats st;
  st.n_images = dataset.size();
  std::vector<double> on, off;
  std::vector<double> image_on, image_off;
  for (const SceneSample& s : dataset) {
    const auto d_on = pairwise_distances(
        query_embeddings(model, s.tokens, DecoderPath::kRelDecoder));
    const auto d_off = pairwise_distances(
        query_embeddings(model, s.tokens, DecoderPath::kHydraBranch));
    st.n_pairs_per_image = d_on.size();
    on.insert(on.end(), d_on.begin(), d_on.end());
    off.insert(off.end(), d_off.begin(), d_off.end());
    image_on.push_back(std::accumulate(d_on.begin(), d_on.end(), 0.0) /
                       static_cast<double>(d_on.size()));
    image_off.push_back(std::accumulate(d_off.begin(), d_off.end(), 0.0) /
                        static_cast<double>(d_off.size()));
  }
  st.n_pairs = on.size();
  st.mean_on = std::accumulate(on.begin(), on.end(), 0.0) / static_cast<double>(on.size());
  st.mean_off =
      std::accumulate(off.begin(), off.end(), 0.0) / static_cast<double>(off.size());
  st.exact_equality = on == off;
  if (!st.exact_equality) {
    try {
      st.test = pooling == DistancePooling::kPairs ? paired_ttest(on, off)
                                                   : paired_ttest(image_on, image_off);
    } catch (const StatisticError&) {
      // Constant nonzero shift; leave the test empty.
    } catch (const std::invalid_argument&) {
      // Single image under per-image pooling.
    }
  }
  return st;
}

AnalysisReport analyze(const RelationModel& model,
                       std::span<const SceneSample> dataset, std::uint64_t seed,
                       DistancePooling pooling) {
  AnalysisReport r;
  r.ads = ads_report(model, dataset);
  r.distance = distance_study(model, dataset, pooling);
  r.seed = seed;
  return r;
}

std::string AnalysisReport::to_json() const {
  nlohmann::ordered_json j;
  j["ads_on"] = ads.ads_on;
  j["ads_off"] = ads.ads_off;
  j["mean_on"] = distance.mean_on;
  j["mean_off"] = distance.mean_off;
  const auto num_or_null = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  const auto& t = distance.test;
  j["t"] = num_or_null(t ? std::optional<double>(t->t) : std::nullopt);
  j["p"] = num_or_null(t ? std::optional<double>(t->p) : std::nullopt);
  j["d"] = num_or_null(t ? std::optional<double>(t->d) : std::nullopt);
  j["n_pairs"] = distance.n_pairs;
  j["n_pairs_per_image"] = distance.n_pairs_per_image;
  j["n_images"] = distance.n_images;
  j["exact_equality"] = distance.exact_equality;
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace hydra
