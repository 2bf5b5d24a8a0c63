// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rankserve/workload.h"

namespace rankserve {

// Kendall's Tau-b with pair counts. n0 = n(n-1)/2, n1 / n2 = pairs tied in
// the first / second variable.
struct TauResult {
  double tau = 0.0;
  std::int64_t n_concordant = 0;
  std::int64_t n_discordant = 0;
  std::int64_t n0 = 0;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
};

// O(n log n) Tau-b (Knight's merge-sort counting). Tied pairs are neither
// concordant nor discordant. Throws UndefinedResult when n < 2 or either
// variable is constant; InvalidArgument on size mismatch or NaN.
TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y);

// Same, but nullopt instead of UndefinedResult.
std::optional<double> try_kendall_tau_b(std::span<const double> x,
                                        std::span<const double> y);

// ListMLE negative log-likelihood. `true_order[k]` is the index of the item
// that belongs at position k (position 0 should carry the highest score).
double list_mle_loss(std::span<const double> scores,
                     std::span<const std::size_t> true_order);

// d loss / d scores[i].
std::vector<double> list_mle_gradient(std::span<const double> scores,
                                      std::span<const std::size_t> true_order);

// label_i = floor(length_i / width). Throws InvalidArgument if width < 1.
std::vector<std::int64_t> bucket_lengths(std::span<const std::int64_t> lengths,
                                         std::int64_t width);

struct RankLabel {
  RequestId id = 0;
  std::int64_t true_length = 0;
  std::int64_t bucketed_label = 0;
};

struct RankLabels {
  std::vector<RankLabel> items;
  std::int64_t bucket_width = 1;

  // Positions of items sorted by (bucketed_label, id) ascending: shortest
  // first, ties broken by request id.
  std::vector<std::size_t> true_order() const;
};

RankLabels make_rank_labels(std::span<const RequestId> ids,
                            std::span<const std::int64_t> lengths,
                            std::int64_t bucket_width);

// max(ttft, max(tpot)); an empty series contributes 0.
double max_waiting_time(double ttft, std::span<const double> tpot);

struct LatencyRecord {
  RequestId id = 0;
  double arrival_time = 0.0;
  double finish_time = 0.0;
  std::int64_t output_tokens = 1;
  bool finished = true;
};

struct LatencyStats {
  std::size_t count = 0;
  double mean_per_token_latency = 0.0;
  double p90_per_token_latency = 0.0;
  double makespan = 0.0;
  double throughput = 0.0;  // finished requests / makespan
};

// Per-token latency_i = (finish_i - arrival_i) / output_tokens_i. Throws
// InvalidArgument if any record is unfinished or the input is empty.
LatencyStats latency_stats(std::span<const LatencyRecord> records);

double per_token_latency(const LatencyRecord& record);

// Nearest-rank percentile, q in (0, 1]. Throws on empty input.
double percentile_nearest_rank(std::vector<double> values, double q);

double pearson_correlation(std::span<const double> x, std::span<const double> y);
// Pearson on average ranks.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace rankserve
