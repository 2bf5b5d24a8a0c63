// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rankserve/predictors.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rankserve/errors.h"
#include "rankserve/ranking_metrics.h"

namespace rankserve {

namespace {

constexpr std::size_t kCalibrationPoints = 101;

// Per-request noise, fixed by (seed, id) so repeated scoring agrees.
double request_noise(std::uint64_t seed, RequestId id, double sigma) {
  if (sigma == 0.0) return 0.0;
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(id) >> 32),
                    0xa11ceu};
  std::mt19937_64 rng(seq);
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

double self_report(const Scorer& s, const Request& r) {
  return static_cast<double>(r.true_output_tokens) *
         std::exp(request_noise(s.seed, r.id, s.sigma));
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double bucket_midpoint(const Scorer& s, std::size_t bucket) {
  return static_cast<double>(static_cast<std::int64_t>(bucket) * s.bucket_size) +
         static_cast<double>(s.bucket_size) / 2.0;
}

std::int64_t reference_length(const Scorer& s, RequestId id) {
  const auto it = s.reference_lengths.find(id);
  if (it == s.reference_lengths.end()) {
    throw InvalidArgument("cross-seed oracle has no length for request " +
                          std::to_string(id));
  }
  return it->second;
}

void check_features(const Scorer& s, const Request& r) {
  if (r.features.size() != s.net.input_dim) {
    throw InvalidArgument("request " + std::to_string(r.id) + " has " +
                          std::to_string(r.features.size()) +
                          " features, scorer expects " +
                          std::to_string(s.net.input_dim));
  }
}

// min over d of E[min(X, d)] / P(X <= d) for X = scale * v - g over the
// support points with scale * v > g; `v` ascending and equally weighted.
std::optional<double> inverse_gittins(const std::vector<double>& v, double scale,
                                      double g) {
  std::vector<double> x;
  for (auto q : v) {
    if (scale * q > g) x.push_back(scale * q - g);
  }
  if (x.empty()) return std::nullopt;
  const double m = static_cast<double>(x.size());
  double best = std::numeric_limits<double>::infinity();
  double prefix = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    prefix += x[k];
    if (k + 1 < x.size() && x[k + 1] == x[k]) continue;
    const double done = static_cast<double>(k + 1);
    const double work = prefix + (m - done) * x[k];
    best = std::min(best, work / done);
  }
  return std::max(1.0, best);
}

double remaining_from_length(const Scorer& s, double predicted_length,
                             std::int64_t generated) {
  const double g = static_cast<double>(generated);
  if (s.calibration.empty()) return std::max(predicted_length - g, 1.0);
  return s.calibration.remaining_rank(predicted_length, g);
}

class Adam {
 public:
  Adam(std::size_t size, const TrainConfig& cfg)
      : m_(size, 0.0), v_(size, 0.0), cfg_(cfg) {}

  void step(std::vector<double>& params, const std::vector<double>& grad,
            std::int64_t t) {
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.adam_beta1 * m_[i] + (1.0 - cfg_.adam_beta1) * grad[i];
      v_[i] = cfg_.adam_beta2 * v_[i] + (1.0 - cfg_.adam_beta2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (m_[i] / c1) /
                   (std::sqrt(v_[i] / c2) + cfg_.adam_epsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  TrainConfig cfg_;
};

// Gradient buffers matching FeatureNet's parameter blocks.
struct NetGrad {
  std::vector<double> w1, b1, w2, b2;

  explicit NetGrad(const FeatureNet& net)
      : w1(net.w1.size()), b1(net.b1.size()), w2(net.w2.size()), b2(net.b2.size()) {}
  void zero() {
    std::fill(w1.begin(), w1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
  }
};

struct Activations {
  std::vector<double> z;  // standardized input
  std::vector<double> h;  // hidden (empty for linear)
  std::vector<double> out;
};

void standardize(const FeatureNet& net, std::span<const double> x,
                 std::vector<double>& z) {
  z.resize(net.input_dim);
  for (std::size_t j = 0; j < net.input_dim; ++j) {
    z[j] = (x[j] - net.mean[j]) * net.inv_scale[j];
  }
}

void forward_into(const FeatureNet& net, std::span<const double> x,
                  Activations& a) {
  standardize(net, x, a.z);
  const std::size_t d = net.input_dim;
  std::span<const double> top = a.z;
  if (net.hidden > 0) {
    a.h.resize(net.hidden);
    for (std::size_t k = 0; k < net.hidden; ++k) {
      double s = net.b1[k];
      for (std::size_t j = 0; j < d; ++j) s += net.w1[k * d + j] * a.z[j];
      a.h[k] = std::tanh(s);
    }
    top = a.h;
  }
  a.out.resize(net.outputs);
  for (std::size_t o = 0; o < net.outputs; ++o) {
    double s = net.b2[o];
    for (std::size_t j = 0; j < top.size(); ++j) s += net.w2[o * top.size() + j] * top[j];
    a.out[o] = s;
  }
}

void backward_into(const FeatureNet& net, const Activations& a,
                   std::span<const double> dout, NetGrad& g) {
  const std::size_t d = net.input_dim;
  if (net.hidden == 0) {
    for (std::size_t o = 0; o < net.outputs; ++o) {
      g.b2[o] += dout[o];
      for (std::size_t j = 0; j < d; ++j) g.w2[o * d + j] += dout[o] * a.z[j];
    }
    return;
  }
  const std::size_t hdim = net.hidden;
  for (std::size_t o = 0; o < net.outputs; ++o) {
    g.b2[o] += dout[o];
    for (std::size_t k = 0; k < hdim; ++k) g.w2[o * hdim + k] += dout[o] * a.h[k];
  }
  for (std::size_t k = 0; k < hdim; ++k) {
    double dh = 0.0;
    for (std::size_t o = 0; o < net.outputs; ++o) dh += dout[o] * net.w2[o * hdim + k];
    const double da = dh * (1.0 - a.h[k] * a.h[k]);
    g.b1[k] += da;
    for (std::size_t j = 0; j < d; ++j) g.w1[k * d + j] += da * a.z[j];
  }
}

FeatureNet init_net(const Trace& train, std::size_t hidden, std::size_t outputs,
                    std::mt19937_64& rng) {
  FeatureNet net;
  net.input_dim = train[0].features.size();
  net.hidden = hidden;
  net.outputs = outputs;
  const std::size_t d = net.input_dim;
  const double n = static_cast<double>(train.size());
  net.mean.assign(d, 0.0);
  net.inv_scale.assign(d, 0.0);
  for (const auto& r : train.requests()) {
    if (r.features.size() != d) throw InvalidArgument("inconsistent feature dimension");
    for (std::size_t j = 0; j < d; ++j) net.mean[j] += r.features[j] / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (const auto& r : train.requests()) {
      const double dv = r.features[j] - net.mean[j];
      var += dv * dv / n;
    }
    net.inv_scale[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t top = hidden > 0 ? hidden : d;
  if (hidden > 0) {
    net.w1.resize(hidden * d);
    net.b1.assign(hidden, 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& w : net.w1) w = s1 * gauss(rng);
  }
  net.w2.resize(outputs * top);
  net.b2.assign(outputs, 0.0);
  const double s2 = 0.01;
  for (auto& w : net.w2) w = s2 * gauss(rng);
  return net;
}

std::vector<double> quantiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> q(kCalibrationPoints);
  for (std::size_t k = 0; k < kCalibrationPoints; ++k) {
    const double pos = static_cast<double>(k) / static_cast<double>(kCalibrationPoints - 1) *
                       static_cast<double>(v.size() - 1);
    q[k] = v[static_cast<std::size_t>(std::llround(pos))];
  }
  return q;
}

// `map_scores` is false when scores are already lengths (classifier).
LengthCalibration calibrate(const Scorer& scorer, const Trace& train,
                            bool map_scores) {
  LengthCalibration c;
  std::vector<double> lengths;
  for (auto l : train.output_lengths()) lengths.push_back(static_cast<double>(l));
  const auto scores = predicted_scores(scorer, train);
  if (map_scores) c.score_quantiles = quantiles(scores);
  c.length_quantiles = quantiles(lengths);
  std::vector<double> residuals;
  residuals.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double predicted = std::max(c.predicted_length(scores[i]), 1.0);
    residuals.push_back(std::log(lengths[i] / predicted));
  }
  c.log_residual_quantiles = quantiles(std::move(residuals));
  return c;
}

std::int64_t checkpoint_interval(const TrainConfig& cfg, std::int64_t total_steps) {
  if (cfg.checkpoint_every > 0) return cfg.checkpoint_every;
  return std::max<std::int64_t>(1, total_steps / 20);
}

// Shared minibatch loop. `batch_loss` fills d loss / d outputs for each item
// and returns the batch loss.
template <typename LossFn, typename EvalFn>
TrainingReport run_training(FeatureNet& net, const Trace& train,
                            const TrainConfig& cfg, std::size_t min_batch,
                            std::mt19937_64& rng, LossFn&& batch_loss,
                            EvalFn&& evaluate) {
  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::size_t batches_per_epoch = n / batch;
  if (n % batch >= min_batch) ++batches_per_epoch;
  const auto total_steps =
      static_cast<std::int64_t>(batches_per_epoch) * cfg.epochs;
  const std::int64_t every = checkpoint_interval(cfg, total_steps);

  NetGrad grad(net);
  Adam adam_w1(net.w1.size(), cfg), adam_b1(net.b1.size(), cfg);
  Adam adam_w2(net.w2.size(), cfg), adam_b2(net.b2.size(), cfg);

  TrainingReport report;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Activations> acts;
  std::vector<std::vector<double>> douts;
  std::int64_t step = 0;
  double window_loss = 0.0;
  std::int64_t window_steps = 0;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      if (end - start < min_batch) break;
      const std::span<const std::size_t> items(order.data() + start, end - start);

      acts.resize(items.size());
      douts.resize(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        forward_into(net, train[items[i]].features, acts[i]);
        douts[i].assign(net.outputs, 0.0);
      }
      const double loss = batch_loss(items, acts, douts);

      grad.zero();
      for (std::size_t i = 0; i < items.size(); ++i) {
        backward_into(net, acts[i], douts[i], grad);
      }
      ++step;
      adam_w1.step(net.w1, grad.w1, step);
      adam_b1.step(net.b1, grad.b1, step);
      adam_w2.step(net.w2, grad.w2, step);
      adam_b2.step(net.b2, grad.b2, step);

      report.step_loss.push_back(loss);
      window_loss += loss;
      ++window_steps;
      if (step % every == 0 || step == total_steps) {
        TrainingCheckpoint cp;
        cp.step = step;
        cp.loss = window_loss / static_cast<double>(window_steps);
        evaluate(cp);
        report.checkpoints.push_back(cp);
        window_loss = 0.0;
        window_steps = 0;
      }
    }
  }

  std::vector<double> losses;
  std::vector<double> taus;
  for (const auto& cp : report.checkpoints) {
    if (cp.heldout_tau) {
      losses.push_back(cp.loss);
      taus.push_back(*cp.heldout_tau);
    }
  }
  if (losses.size() >= 2) {
    try {
      report.loss_tau_pearson = pearson_correlation(losses, taus);
    } catch (const UndefinedResult&) {
    }
  }
  return report;
}

}  // namespace

const char* to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kOracle:
      return "oracle";
    case ScorerKind::kCrossSeedOracle:
      return "cross-seed-oracle";
    case ScorerKind::kNoisyOracle:
      return "noisy-oracle";
    case ScorerKind::kRankingModel:
      return "ranking";
    case ScorerKind::kClassifier:
      return "classifier";
    case ScorerKind::kPerceptionOnly:
      return "perception-only";
  }
  return "?";
}

std::vector<double> FeatureNet::forward(std::span<const double> features) const {
  Activations a;
  forward_into(*this, features, a);
  return a.out;
}

std::size_t FeatureNet::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

double LengthCalibration::predicted_length(double score) const {
  const auto& s = score_quantiles;
  const auto& l = length_quantiles;
  if (s.empty() || l.size() != s.size()) return score;
  const std::size_t m = s.size() - 1;
  if (score <= s.front()) return l.front();
  if (score >= s.back()) return l.back();
  const auto i = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), score) - s.begin()) - 1;
  const double frac = (score - s[i]) / (s[i + 1] - s[i]);
  const double pos = static_cast<double>(i) + frac;
  const auto lo = std::min(static_cast<std::size_t>(pos), m);
  const auto hi = std::min(lo + 1, m);
  return l[lo] + (pos - static_cast<double>(lo)) * (l[hi] - l[lo]);
}

double LengthCalibration::remaining_rank(double generated) const {
  return inverse_gittins(length_quantiles, 1.0, generated).value_or(1.0);
}

double LengthCalibration::remaining_rank(double predicted, double generated) const {
  std::vector<double> lengths;
  lengths.reserve(log_residual_quantiles.size());
  for (auto r : log_residual_quantiles) lengths.push_back(std::exp(r));
  const auto rank = inverse_gittins(lengths, predicted, generated);
  return rank ? *rank : remaining_rank(generated);
}

Scorer Scorer::oracle() { return Scorer{}; }

Scorer Scorer::noisy_oracle(double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("noisy oracle sigma must be finite and >= 0");
  }
  Scorer s;
  s.kind = ScorerKind::kNoisyOracle;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

Scorer Scorer::perception_only(std::int64_t warmup_tokens, double sigma,
                               std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("perception-only sigma must be finite and >= 0");
  }
  Scorer s;
  s.kind = ScorerKind::kPerceptionOnly;
  s.warmup_tokens = perception_only_warmup_tokens(warmup_tokens);
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

std::int64_t perception_only_warmup_tokens(std::optional<std::int64_t> configured) {
  const std::int64_t k = configured.value_or(15);
  if (k < 1) {
    throw InvalidArgument("perception-only needs at least one warmup token");
  }
  return k;
}

double predicted_score(const Scorer& s, const Request& r) {
  switch (s.kind) {
    case ScorerKind::kOracle:
      return static_cast<double>(r.true_output_tokens);
    case ScorerKind::kCrossSeedOracle:
      return static_cast<double>(reference_length(s, r.id));
    case ScorerKind::kNoisyOracle:
    case ScorerKind::kPerceptionOnly:
      return self_report(s, r);
    case ScorerKind::kRankingModel:
      check_features(s, r);
      // The model is trained so that higher output = shorter generation.
      return -s.net.forward(r.features)[0];
    case ScorerKind::kClassifier:
      check_features(s, r);
      return bucket_midpoint(s, argmax(s.net.forward(r.features)));
  }
  return 0.0;
}

std::optional<double> score_request(const Scorer& s, const Request& r,
                                    ScoreMode mode) {
  if (s.kind == ScorerKind::kPerceptionOnly && r.warmup_tokens < s.warmup_tokens &&
      !r.finished()) {
    return std::nullopt;
  }
  if (mode == ScoreMode::kAdmission) return predicted_score(s, r);

  const double g = static_cast<double>(r.generated_tokens);
  switch (s.kind) {
    case ScorerKind::kOracle:
      return static_cast<double>(r.remaining_tokens());
    case ScorerKind::kNoisyOracle:
      return static_cast<double>(r.remaining_tokens()) *
             std::exp(request_noise(s.seed, r.id, s.sigma));
    case ScorerKind::kCrossSeedOracle:
    case ScorerKind::kPerceptionOnly:
      return std::max(predicted_score(s, r) - g, 1.0);
    case ScorerKind::kRankingModel:
      return remaining_from_length(
          s, s.calibration.predicted_length(predicted_score(s, r)),
          r.generated_tokens);
    case ScorerKind::kClassifier:
      return remaining_from_length(s, predicted_score(s, r), r.generated_tokens);
  }
  return std::nullopt;
}

std::vector<std::optional<double>> score_batch(
    const Scorer& scorer, std::span<const Request* const> requests,
    ScoreMode mode) {
  std::vector<std::optional<double>> out;
  out.reserve(requests.size());
  for (const auto* r : requests) out.push_back(score_request(scorer, *r, mode));
  return out;
}

std::vector<std::optional<double>> score_batch(const Scorer& scorer,
                                               std::span<const Request> requests,
                                               ScoreMode mode) {
  std::vector<std::optional<double>> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(score_request(scorer, r, mode));
  return out;
}

Scorer cross_seed_oracle(const Trace& seed_a, const Trace& seed_b) {
  if (seed_a.size() != seed_b.size()) {
    throw InvalidArgument("cross-seed oracle: traces differ in size");
  }
  std::map<RequestId, const Request*> by_id;
  for (const auto& r : seed_b.requests()) by_id[r.id] = &r;
  Scorer s;
  s.kind = ScorerKind::kCrossSeedOracle;
  for (const auto& r : seed_a.requests()) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end() || it->second->prompt != r.prompt) {
      throw InvalidArgument("cross-seed oracle: request " + std::to_string(r.id) +
                            " missing or different in the executed trace");
    }
    s.reference_lengths[r.id] = r.true_output_tokens;
  }
  return s;
}

TrainConfig TrainConfig::transformer_defaults() {
  TrainConfig cfg;
  cfg.learning_rate = 2e-5;
  return cfg;
}

void TrainConfig::validate(bool ranking_loss) const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < (ranking_loss ? 2 : 1)) {
    throw InvalidArgument(ranking_loss ? "ranking loss needs batch_size >= 2"
                                       : "batch_size must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must be in [0, 1)");
  }
  if (bucket_width < 1) throw InvalidArgument("bucket_width must be >= 1");
  if (hidden_units < 0) throw InvalidArgument("hidden_units must be >= 0");
}

TrainResult train_ranking(const Trace& train, const TrainConfig& cfg,
                          const Trace* heldout) {
  cfg.validate(true);
  if (static_cast<std::int64_t>(train.size()) < cfg.batch_size) {
    throw InvalidArgument("training set smaller than one batch");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32), 77u};
  std::mt19937_64 rng(seq);
  Scorer scorer;
  scorer.kind = ScorerKind::kRankingModel;
  scorer.net = init_net(train, static_cast<std::size_t>(cfg.hidden_units), 1, rng);

  std::vector<double> scores;
  std::vector<RequestId> ids;
  std::vector<std::int64_t> lengths;
  auto loss_fn = [&](std::span<const std::size_t> items,
                     const std::vector<Activations>& acts,
                     std::vector<std::vector<double>>& douts) {
    scores.clear();
    ids.clear();
    lengths.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
      scores.push_back(acts[i].out[0]);
      ids.push_back(train[items[i]].id);
      lengths.push_back(train[items[i]].true_output_tokens);
    }
    const auto order = make_rank_labels(ids, lengths, cfg.bucket_width).true_order();
    const auto g = list_mle_gradient(scores, order);
    for (std::size_t i = 0; i < items.size(); ++i) douts[i][0] = g[i];
    return list_mle_loss(scores, order);
  };
  auto eval_fn = [&](TrainingCheckpoint& cp) {
    if (heldout != nullptr && heldout->size() >= 2) {
      cp.heldout_tau = evaluate_tau(scorer, *heldout);
    }
  };

  TrainResult result;
  result.report = run_training(scorer.net, train, cfg, 2, rng, loss_fn, eval_fn);
  result.report.method = "ranking";
  scorer.calibration = calibrate(scorer, train, true);
  result.report.train_tau = evaluate_tau(scorer, train);
  if (heldout != nullptr && heldout->size() >= 2) {
    result.report.heldout_tau = evaluate_tau(scorer, *heldout);
  }
  result.scorer = std::move(scorer);
  return result;
}

TrainResult train_classifier(const Trace& train, const TrainConfig& cfg,
                             std::int64_t n_buckets, std::int64_t bucket_size,
                             const Trace* heldout) {
  cfg.validate(false);
  if (n_buckets < 2) throw InvalidArgument("classifier needs at least two buckets");
  if (bucket_size < 1) throw InvalidArgument("bucket_size must be >= 1");
  if (static_cast<std::int64_t>(train.size()) < cfg.batch_size) {
    throw InvalidArgument("training set smaller than one batch");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32), 78u};
  std::mt19937_64 rng(seq);
  Scorer scorer;
  scorer.kind = ScorerKind::kClassifier;
  scorer.n_buckets = n_buckets;
  scorer.bucket_size = bucket_size;
  scorer.net = init_net(train, static_cast<std::size_t>(cfg.hidden_units),
                        static_cast<std::size_t>(n_buckets), rng);

  auto loss_fn = [&](std::span<const std::size_t> items,
                     const std::vector<Activations>& acts,
                     std::vector<std::vector<double>>& douts) {
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& logits = acts[i].out;
      const std::int64_t label = std::min(
          train[items[i]].true_output_tokens / bucket_size, n_buckets - 1);
      const double m = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto v : logits) z += std::exp(v - m);
      const double log_z = m + std::log(z);
      loss += (log_z - logits[static_cast<std::size_t>(label)]) * inv_b;
      for (std::size_t o = 0; o < logits.size(); ++o) {
        const double p = std::exp(logits[o] - log_z);
        douts[i][o] = (p - (static_cast<std::int64_t>(o) == label ? 1.0 : 0.0)) * inv_b;
      }
    }
    return loss;
  };
  auto eval_fn = [&](TrainingCheckpoint& cp) {
    if (heldout != nullptr && heldout->size() >= 2) {
      cp.heldout_tau = evaluate_tau(scorer, *heldout);
      cp.heldout_accuracy = classifier_accuracy(scorer, *heldout);
    }
  };

  TrainResult result;
  result.report = run_training(scorer.net, train, cfg, 1, rng, loss_fn, eval_fn);
  result.report.method = "classifier";
  scorer.calibration = calibrate(scorer, train, false);
  result.report.train_tau = evaluate_tau(scorer, train);
  if (heldout != nullptr && !heldout->empty()) {
    result.report.heldout_tau = heldout->size() >= 2 ? evaluate_tau(scorer, *heldout)
                                                     : std::nullopt;
    result.report.heldout_accuracy = classifier_accuracy(scorer, *heldout);
  }
  result.scorer = std::move(scorer);
  return result;
}

std::vector<double> predicted_scores(const Scorer& scorer, const Trace& trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& r : trace.requests()) out.push_back(predicted_score(scorer, r));
  return out;
}

std::optional<double> evaluate_tau(const Scorer& scorer, const Trace& trace) {
  const auto scores = predicted_scores(scorer, trace);
  std::vector<double> lengths;
  lengths.reserve(trace.size());
  for (auto l : trace.output_lengths()) lengths.push_back(static_cast<double>(l));
  return try_kendall_tau_b(scores, lengths);
}

double classifier_accuracy(const Scorer& scorer, const Trace& trace) {
  if (scorer.kind != ScorerKind::kClassifier) {
    throw InvalidArgument("accuracy is defined for classifiers only");
  }
  if (trace.empty()) throw InvalidArgument("accuracy of an empty trace");
  std::size_t hits = 0;
  for (const auto& r : trace.requests()) {
    check_features(scorer, r);
    const auto predicted = static_cast<std::int64_t>(argmax(scorer.net.forward(r.features)));
    const auto truth = std::min(r.true_output_tokens / scorer.bucket_size,
                                scorer.n_buckets - 1);
    if (predicted == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trace.size());
}

BatchTau batched_tau(const Scorer& scorer, const Trace& trace,
                     std::size_t batch_size) {
  if (batch_size < 2) throw InvalidArgument("batch size must be >= 2");
  const auto scores = predicted_scores(scorer, trace);
  BatchTau out;
  out.batch_size = batch_size;
  std::vector<double> taus;
  for (std::size_t start = 0; start + batch_size <= trace.size(); start += batch_size) {
    std::vector<double> lengths;
    for (std::size_t i = start; i < start + batch_size; ++i) {
      lengths.push_back(static_cast<double>(trace[i].true_output_tokens));
    }
    const auto tau = try_kendall_tau_b(
        std::span<const double>(scores).subspan(start, batch_size), lengths);
    if (tau) taus.push_back(*tau);
  }
  out.batches = taus.size();
  if (taus.empty()) return out;
  out.mean = std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
  for (auto t : taus) out.variance += (t - out.mean) * (t - out.mean);
  out.variance /= static_cast<double>(taus.size());
  return out;
}

}  // namespace rankserve
