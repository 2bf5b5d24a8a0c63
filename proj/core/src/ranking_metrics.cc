// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rankserve/ranking_metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rankserve/errors.h"

namespace rankserve {

namespace {

std::int64_t tied_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Sorts idx[lo, hi) by y, returning the number of inversions (strict).
std::int64_t merge_count(std::vector<std::size_t>& idx,
                         std::vector<std::size_t>& tmp,
                         std::span<const double> y, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(idx, tmp, y, lo, mid) +
                       merge_count(idx, tmp, y, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (y[idx[j]] < y[idx[i]]) {
      swaps += static_cast<std::int64_t>(mid - i);
      tmp[k++] = idx[j++];
    } else {
      tmp[k++] = idx[i++];
    }
  }
  while (i < mid) tmp[k++] = idx[i++];
  while (j < hi) tmp[k++] = idx[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
            tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            idx.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_order(std::span<const double> scores,
                 std::span<const std::size_t> order) {
  if (scores.size() != order.size() || scores.empty()) {
    throw InvalidArgument("ListMLE needs matching non-empty scores and order");
  }
  std::vector<bool> seen(order.size(), false);
  for (auto i : order) {
    if (i >= order.size() || seen[i]) {
      throw InvalidArgument("true_order is not a permutation");
    }
    seen[i] = true;
  }
}

// suffix[k] = log sum_{j >= k} exp(scores[order[j]]).
std::vector<double> suffix_log_sum_exp(std::span<const double> scores,
                                       std::span<const std::size_t> order) {
  const std::size_t n = order.size();
  std::vector<double> suffix(n);
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t k = n; k-- > 0;) {
    acc = log_add_exp(acc, scores[order[k]]);
    suffix[k] = acc;
  }
  return suffix;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgument("kendall_tau_b: x and y differ in length");
  }
  const std::size_t n = x.size();
  if (n < 2) throw UndefinedResult("kendall_tau_b needs at least two items");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) {
      throw InvalidArgument("kendall_tau_b: NaN input");
    }
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  TauResult r;
  r.n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  std::int64_t joint = 0;  // pairs tied in both x and y
  std::int64_t run_x = 1;
  std::int64_t run_xy = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    const bool same_x = i < n && x[idx[i]] == x[idx[i - 1]];
    const bool same_xy = same_x && y[idx[i]] == y[idx[i - 1]];
    if (same_x) {
      ++run_x;
    } else {
      r.n1 += tied_pairs(run_x);
      run_x = 1;
    }
    if (same_xy) {
      ++run_xy;
    } else {
      joint += tied_pairs(run_xy);
      run_xy = 1;
    }
  }

  std::vector<std::size_t> tmp(n);
  r.n_discordant = merge_count(idx, tmp, y, 0, n);

  std::int64_t run_y = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && y[idx[i]] == y[idx[i - 1]]) {
      ++run_y;
    } else {
      r.n2 += tied_pairs(run_y);
      run_y = 1;
    }
  }

  r.n_concordant = r.n0 - r.n1 - r.n2 + joint - r.n_discordant;
  const double denom = std::sqrt(static_cast<double>(r.n0 - r.n1) *
                                 static_cast<double>(r.n0 - r.n2));
  if (denom == 0.0) {
    throw UndefinedResult("kendall_tau_b undefined: a variable is constant");
  }
  r.tau = static_cast<double>(r.n_concordant - r.n_discordant) / denom;
  return r;
}

std::optional<double> try_kendall_tau_b(std::span<const double> x,
                                        std::span<const double> y) {
  try {
    return kendall_tau_b(x, y).tau;
  } catch (const UndefinedResult&) {
    return std::nullopt;
  }
}

double list_mle_loss(std::span<const double> scores,
                     std::span<const std::size_t> true_order) {
  check_order(scores, true_order);
  const auto suffix = suffix_log_sum_exp(scores, true_order);
  double loss = 0.0;
  for (std::size_t k = 0; k < true_order.size(); ++k) {
    loss += suffix[k] - scores[true_order[k]];
  }
  return loss;
}

std::vector<double> list_mle_gradient(std::span<const double> scores,
                                      std::span<const std::size_t> true_order) {
  check_order(scores, true_order);
  const auto suffix = suffix_log_sum_exp(scores, true_order);
  std::vector<double> grad(scores.size(), 0.0);
  // grad[order[j]] = -1 + sum_{i <= j} exp(s_j - suffix[i]); the prefix sum
  // is kept in log space so every term stays <= 1.
  double log_prefix = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < true_order.size(); ++j) {
    log_prefix = log_add_exp(log_prefix, -suffix[j]);
    const double s = scores[true_order[j]];
    grad[true_order[j]] = std::exp(s + log_prefix) - 1.0;
  }
  return grad;
}

std::vector<std::int64_t> bucket_lengths(std::span<const std::int64_t> lengths,
                                         std::int64_t width) {
  if (width < 1) throw InvalidArgument("bucket width must be >= 1");
  std::vector<std::int64_t> out;
  out.reserve(lengths.size());
  for (auto l : lengths) {
    if (l < 0) throw InvalidArgument("negative length");
    out.push_back(l / width);
  }
  return out;
}

std::vector<std::size_t> RankLabels::true_order() const {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    return x.bucketed_label < y.bucketed_label ||
           (x.bucketed_label == y.bucketed_label && x.id < y.id);
  });
  return order;
}

RankLabels make_rank_labels(std::span<const RequestId> ids,
                            std::span<const std::int64_t> lengths,
                            std::int64_t bucket_width) {
  if (ids.size() != lengths.size()) {
    throw InvalidArgument("make_rank_labels: ids and lengths differ in size");
  }
  const auto labels = bucket_lengths(lengths, bucket_width);
  RankLabels out;
  out.bucket_width = bucket_width;
  out.items.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.items.push_back({ids[i], lengths[i], labels[i]});
  }
  return out;
}

double max_waiting_time(double ttft, std::span<const double> tpot) {
  double m = ttft;
  for (auto t : tpot) m = std::max(m, t);
  return m;
}

double per_token_latency(const LatencyRecord& record) {
  return (record.finish_time - record.arrival_time) /
         static_cast<double>(record.output_tokens);
}

double percentile_nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of empty series");
  if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("percentile q must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size()) - 1e-12));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

LatencyStats latency_stats(std::span<const LatencyRecord> records) {
  if (records.empty()) throw InvalidArgument("latency_stats: no records");
  std::vector<double> latencies;
  latencies.reserve(records.size());
  double sum = 0.0;
  double first_arrival = std::numeric_limits<double>::infinity();
  double last_finish = 0.0;
  for (const auto& r : records) {
    if (!r.finished) {
      throw InvalidArgument("latency_stats: request " + std::to_string(r.id) +
                            " is unfinished");
    }
    const double l = per_token_latency(r);
    latencies.push_back(l);
    sum += l;
    first_arrival = std::min(first_arrival, r.arrival_time);
    last_finish = std::max(last_finish, r.finish_time);
  }
  LatencyStats s;
  s.count = records.size();
  s.mean_per_token_latency = sum / static_cast<double>(records.size());
  s.p90_per_token_latency = percentile_nearest_rank(std::move(latencies), 0.9);
  s.makespan = last_finish - first_arrival;
  s.throughput = s.makespan > 0.0 ? static_cast<double>(s.count) / s.makespan : 0.0;
  return s;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("pearson_correlation needs two equal series of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedResult("pearson_correlation undefined for a constant series");
  }
  return sxy / std::sqrt(sxx * syy);
}

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_correlation(rx, ry);
}

}  // namespace rankserve
