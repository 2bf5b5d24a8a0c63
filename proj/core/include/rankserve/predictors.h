// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankserve/workload.h"

namespace rankserve {

enum class ScorerKind {
  kOracle,
  kCrossSeedOracle,
  kNoisyOracle,
  kRankingModel,
  kClassifier,
  kPerceptionOnly,
};

const char* to_string(ScorerKind kind);

// Linear (hidden == 0) or one-hidden-layer tanh network over standardized
// featurize() vectors.
struct FeatureNet {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 1;
  std::vector<double> mean;       // input_dim
  std::vector<double> inv_scale;  // input_dim; 0 drops a constant feature
  std::vector<double> w1, b1;     // hidden x input_dim, hidden
  std::vector<double> w2, b2;     // outputs x (hidden or input_dim), outputs

  std::vector<double> forward(std::span<const double> features) const;
  std::size_t parameter_count() const;
  bool operator==(const FeatureNet&) const = default;
};

// Matched quantiles of training scores and training output lengths. Turns
// an order-only score into a length estimate when running requests are
// re-scored.
struct LengthCalibration {
  std::vector<double> score_quantiles;   // ascending; empty = score is a length
  std::vector<double> length_quantiles;  // ascending
  // Quantiles of log(true / predicted length) on the training set.
  std::vector<double> log_residual_quantiles;

  bool empty() const { return length_quantiles.empty(); }
  double predicted_length(double score) const;
  // Remaining-work rank of a request that has generated g tokens, with L
  // distributed as the training lengths:
  //   min over d of E[min(L - g, d) | L > g] / P(L - g <= d | L > g),
  // the inverse Gittins index. Equals L - g when L is known. At least 1.
  double remaining_rank(double generated) const;
  // Same with L = predicted * exp(residual). Falls back to
  // remaining_rank(g) once every residual quantile is exhausted.
  double remaining_rank(double predicted, double generated) const;
  bool operator==(const LengthCalibration&) const = default;
};

// A ranking predictor. Scores follow one orientation everywhere: lower
// score = predicted shorter generation.
struct Scorer {
  ScorerKind kind = ScorerKind::kOracle;
  // NoisyOracle: multiplicative log-normal noise on the true length.
  // PerceptionOnly: error of the simulated self report.
  double sigma = 0.0;
  std::uint64_t seed = 0;
  // PerceptionOnly: tokens generated before the self report is available.
  std::int64_t warmup_tokens = 15;
  // CrossSeedOracle: lengths sampled under another seed, by request id.
  std::map<RequestId, std::int64_t> reference_lengths;
  FeatureNet net;
  std::int64_t n_buckets = 0;
  std::int64_t bucket_size = 0;
  LengthCalibration calibration;

  static Scorer oracle();
  static Scorer noisy_oracle(double sigma, std::uint64_t seed);
  static Scorer perception_only(std::int64_t warmup_tokens, double sigma,
                                std::uint64_t seed);

  bool needs_warmup() const { return kind == ScorerKind::kPerceptionOnly; }
  bool operator==(const Scorer&) const = default;
};

inline constexpr double kDefaultPerceptionSigma = 0.35;

// Admission scores rank total length; remaining scores estimate tokens still
// to generate and are used when running requests are re-scored.
enum class ScoreMode { kAdmission, kRemaining };

// nullopt means "needs warmup": a perception-only request that has not yet
// produced warmup_tokens tokens.
std::optional<double> score_request(const Scorer& scorer, const Request& request,
                                    ScoreMode mode = ScoreMode::kAdmission);
std::vector<std::optional<double>> score_batch(
    const Scorer& scorer, std::span<const Request* const> requests,
    ScoreMode mode = ScoreMode::kAdmission);
std::vector<std::optional<double>> score_batch(
    const Scorer& scorer, std::span<const Request> requests,
    ScoreMode mode = ScoreMode::kAdmission);

// The admission score a scorer would assign once any warmup has completed.
// Used for offline evaluation.
double predicted_score(const Scorer& scorer, const Request& request);

// Returns `configured`, or 15 by default. Throws InvalidArgument if < 1.
std::int64_t perception_only_warmup_tokens(
    std::optional<std::int64_t> configured = std::nullopt);

// Scorer that reports `seed_a` lengths; the engine executes `seed_b`.
// Throws InvalidArgument unless both traces hold the same ids and prompts.
Scorer cross_seed_oracle(const Trace& seed_a, const Trace& seed_b);

struct TrainConfig {
  std::int64_t epochs = 5;
  std::int64_t batch_size = 32;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::int64_t bucket_width = 10;
  std::uint64_t seed = 0;
  std::int64_t hidden_units = 0;
  // Optimizer steps between report checkpoints; 0 picks ~20 per run.
  std::int64_t checkpoint_every = 0;

  // Learning rate and betas used with the transformer backbone; too small to
  // move a linear scorer in a few epochs, kept reachable for fidelity runs.
  static TrainConfig transformer_defaults();
  void validate(bool ranking_loss) const;
};

struct TrainingCheckpoint {
  std::int64_t step = 0;
  // Mean training loss over the steps since the previous checkpoint.
  double loss = 0.0;
  std::optional<double> heldout_tau;
  std::optional<double> heldout_accuracy;
};

struct TrainingReport {
  std::string method;
  std::vector<double> step_loss;
  std::vector<TrainingCheckpoint> checkpoints;
  std::optional<double> train_tau;
  std::optional<double> heldout_tau;
  std::optional<double> heldout_accuracy;
  // Pearson(checkpoint loss, checkpoint held-out Tau).
  std::optional<double> loss_tau_pearson;
};

struct TrainResult {
  Scorer scorer;
  TrainingReport report;
};

// Adam on ListMLE over per-batch bucketed labels.
TrainResult train_ranking(const Trace& train, const TrainConfig& cfg,
                          const Trace* heldout = nullptr);

// Adam on softmax cross-entropy over length buckets; lengths beyond the last
// bucket are clipped into it.
TrainResult train_classifier(const Trace& train, const TrainConfig& cfg,
                             std::int64_t n_buckets, std::int64_t bucket_size,
                             const Trace* heldout = nullptr);

std::vector<double> predicted_scores(const Scorer& scorer, const Trace& trace);

// Tau-b between predicted scores and true lengths over the whole trace.
std::optional<double> evaluate_tau(const Scorer& scorer, const Trace& trace);

// Fraction of requests whose predicted bucket equals the true (clipped)
// bucket. Classifier only.
double classifier_accuracy(const Scorer& scorer, const Trace& trace);

struct BatchTau {
  std::size_t batch_size = 0;
  std::size_t batches = 0;  // batches with a defined Tau
  double mean = 0.0;
  double variance = 0.0;
};

// Tau-b of consecutive, non-overlapping batches of the trace.
BatchTau batched_tau(const Scorer& scorer, const Trace& trace,
                     std::size_t batch_size);

// Versioned JSON weight file. Round-trips exactly.
std::string scorer_to_json(const Scorer& scorer);
Scorer scorer_from_json(std::string_view text);
void save_scorer(const Scorer& scorer, const std::filesystem::path& path);
Scorer load_scorer(const std::filesystem::path& path);

// Stable digest of a scorer's parameters.
std::uint64_t scorer_hash(const Scorer& scorer);

}  // namespace rankserve
