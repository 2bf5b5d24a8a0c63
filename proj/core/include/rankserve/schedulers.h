// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "rankserve/workload.h"

namespace rankserve {

enum class Policy { kFcfs, kSjf, kSrtf, kMlfq, kRanking };

const char* to_string(Policy policy);
// fcfs, sjf, srtf, mlfq, ranking. Throws InvalidArgument otherwise.
Policy parse_policy(std::string_view name);

struct SchedulerConfig {
  Policy policy = Policy::kRanking;
  // Steps a request may go unscheduled before promotion. 0 disables
  // starvation prevention. Defaults tuned on the desk cost model (25 ms
  // iterations): a 25 s starvation bound and a 0.5 s priority window.
  std::int64_t starvation_threshold = 1000;
  // Scheduled steps a promoted request keeps its priority.
  std::int64_t priority_quantum = 20;
  double mlfq_base_quantum = 16.0;  // seconds
  double mlfq_growth_rate = 2.0;
  int mlfq_num_queues = 8;
  std::int64_t max_batch_requests = 256;
  bool preemption = true;

  bool starvation_enabled() const { return starvation_threshold > 0; }
  // Throws InvalidArgument.
  void validate() const;
  bool operator==(const SchedulerConfig&) const = default;
};

struct BatchDecision {
  std::vector<RequestId> run;  // the batch, in priority order
  std::vector<RequestId> preempted;
  std::vector<RequestId> promoted;
  std::vector<RequestId> demoted;

  bool operator==(const BatchDecision&) const = default;
};

struct BatchLimits {
  std::int64_t max_batch = std::numeric_limits<std::int64_t>::max();
  std::int64_t kv_budget = std::numeric_limits<std::int64_t>::max();
};

// KV tokens a request holds while in the batch for the coming iteration.
// With `reserve_full` the whole prompt + output is reserved up front, which
// is what a non-preemptive policy needs to never evict.
std::int64_t kv_footprint(const Request& request, bool reserve_full);

// q_k in nanoseconds.
std::int64_t mlfq_quantum_ns(const SchedulerConfig& cfg, int level);

void promote(Request& request, std::int64_t priority_quantum);
void demote(Request& request);

// Iteration-level policy. One instance per simulation; mutates the
// scheduling fields of the requests it is handed.
class Scheduler {
 public:
  explicit Scheduler(SchedulerConfig cfg);

  // `queue` holds every admitted, unfinished request; state kRunning marks
  // membership of the previous batch. Unscored requests are allowed only in
  // warmup mode, where they are run first in arrival order.
  BatchDecision schedule_step(std::span<Request* const> queue,
                              std::int64_t now_ns, const BatchLimits& limits);

  // Called after each iteration with the requests that ran in it.
  void on_iteration(std::span<Request* const> batch, std::int64_t duration_ns);

  bool preemptive() const;
  const SchedulerConfig& config() const { return cfg_; }
  void set_warmup_mode(bool enabled) { warmup_mode_ = enabled; }

 private:
  std::vector<Request*> order(std::span<Request* const> queue) const;
  void mlfq_demote(std::span<Request* const> queue, BatchDecision& decision) const;
  void starvation_update(std::span<Request* const> queue,
                         BatchDecision& decision) const;

  SchedulerConfig cfg_;
  bool warmup_mode_ = false;
};

}  // namespace rankserve
