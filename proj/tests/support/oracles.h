// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "rankserve/ranking_metrics.h"
#include "rankserve/workload.h"

namespace rankserve::testing {

// Tau-b from all n(n-1)/2 pairs. nullopt when the denominator is zero.
inline std::optional<double> brute_force_tau_b(const std::vector<double>& x,
                                               const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom = std::sqrt(static_cast<double>(pairs - tied_x) *
                                 static_cast<double>(pairs - tied_y));
  if (denom == 0.0) return std::nullopt;
  return static_cast<double>(concordant - discordant) / denom;
}

// ListMLE written straight from the definition, no log-sum-exp tricks.
inline double naive_list_mle(const std::vector<double>& s,
                             const std::vector<std::size_t>& order) {
  double loss = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    double z = 0.0;
    for (std::size_t j = k; j < order.size(); ++j) z += std::exp(s[order[j]]);
    loss -= std::log(std::exp(s[order[k]]) / z);
  }
  return loss;
}

inline std::vector<double> central_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Mean per-token latency of running `lengths` back to back in `order` on a
// single slot, one second per token, everything arriving at t = 0. Summed in
// trace order.
inline double sequential_mean_latency(const std::vector<std::int64_t>& lengths,
                                      const std::vector<std::size_t>& order) {
  std::vector<double> finish(lengths.size());
  std::int64_t t = 0;
  for (auto i : order) {
    t += lengths[i];
    finish[i] = static_cast<double>(t);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    sum += finish[i] / static_cast<double>(lengths[i]);
  }
  return sum / static_cast<double>(lengths.size());
}

// Minimum over all n! execution orders.
inline double best_order_mean_latency(const std::vector<std::int64_t>& lengths) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = INFINITY;
  do {
    best = std::min(best, sequential_mean_latency(lengths, order));
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

// Two-sided Kolmogorov-Smirnov statistic of `sample` against `cdf`.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Burst trace with the given output lengths and a one-token prompt each.
inline Trace burst_of(const std::vector<std::int64_t>& lengths) {
  std::vector<Request> reqs;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Request r;
    r.id = static_cast<RequestId>(i);
    r.prompt = "p";
    r.prompt_tokens = 1;
    r.true_output_tokens = lengths[i];
    r.features = featurize(r.prompt);
    reqs.push_back(std::move(r));
  }
  return Trace(std::move(reqs), {"burst", "test", 0});
}

}  // namespace rankserve::testing
