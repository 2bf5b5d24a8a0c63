// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rankserve/schedulers.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "rankserve/errors.h"

namespace rankserve {

namespace {

bool by_arrival(const Request* a, const Request* b) {
  return a->arrival_time < b->arrival_time ||
         (a->arrival_time == b->arrival_time && a->id < b->id);
}

template <typename Key>
void sort_by(std::vector<Request*>& v, Key key) {
  std::sort(v.begin(), v.end(), [&](const Request* a, const Request* b) {
    const auto ka = key(a);
    const auto kb = key(b);
    if (ka != kb) return ka < kb;
    return by_arrival(a, b);
  });
}

}  // namespace

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::kFcfs:
      return "fcfs";
    case Policy::kSjf:
      return "sjf";
    case Policy::kSrtf:
      return "srtf";
    case Policy::kMlfq:
      return "mlfq";
    case Policy::kRanking:
      return "ranking";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  for (auto p : {Policy::kFcfs, Policy::kSjf, Policy::kSrtf, Policy::kMlfq,
                 Policy::kRanking}) {
    if (name == to_string(p)) return p;
  }
  throw InvalidArgument("unknown policy '" + std::string(name) +
                        "' (expected fcfs, sjf, srtf, mlfq or ranking)");
}

void SchedulerConfig::validate() const {
  if (starvation_threshold < 0) {
    throw InvalidArgument("starvation_threshold must be >= 0 (0 disables)");
  }
  if (starvation_enabled() && priority_quantum < 1) {
    throw InvalidArgument("priority_quantum must be >= 1 with starvation prevention");
  }
  if (!(mlfq_base_quantum > 0.0) || !std::isfinite(mlfq_base_quantum)) {
    throw InvalidArgument("mlfq_base_quantum must be > 0");
  }
  if (!(mlfq_growth_rate > 1.0) || !std::isfinite(mlfq_growth_rate)) {
    throw InvalidArgument("mlfq_growth_rate must be > 1");
  }
  if (mlfq_num_queues < 1) throw InvalidArgument("mlfq_num_queues must be >= 1");
  if (max_batch_requests < 1) throw InvalidArgument("max_batch_requests must be >= 1");
}

std::int64_t kv_footprint(const Request& r, bool reserve_full) {
  return reserve_full ? r.prompt_tokens + r.true_output_tokens
                      : r.prompt_tokens + r.generated_tokens + 1;
}

std::int64_t mlfq_quantum_ns(const SchedulerConfig& cfg, int level) {
  return std::llround(cfg.mlfq_base_quantum * std::pow(cfg.mlfq_growth_rate, level) * 1e9);
}

void promote(Request& r, std::int64_t priority_quantum) {
  r.priority = true;
  r.starvation_count = 0;
  r.quantum = priority_quantum;
}

void demote(Request& r) {
  r.priority = false;
  r.quantum = 0;
}

Scheduler::Scheduler(SchedulerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool Scheduler::preemptive() const {
  return cfg_.preemption && cfg_.policy != Policy::kSjf;
}

std::vector<Request*> Scheduler::order(std::span<Request* const> queue) const {
  std::vector<Request*> v;
  v.reserve(queue.size());
  for (auto* r : queue) {
    if (!r->finished()) v.push_back(r);
  }
  switch (cfg_.policy) {
    case Policy::kFcfs:
      std::sort(v.begin(), v.end(), by_arrival);
      break;
    case Policy::kSjf:
      sort_by(v, [](const Request* r) { return r->true_output_tokens; });
      break;
    case Policy::kSrtf:
      sort_by(v, [](const Request* r) { return r->remaining_tokens(); });
      break;
    case Policy::kMlfq:
      sort_by(v, [](const Request* r) { return r->mlfq_level; });
      break;
    case Policy::kRanking: {
      for (const auto* r : v) {
        if (!r->scored && !warmup_mode_) {
          throw InvalidArgument("ranking scheduler got unscored request " +
                                std::to_string(r->id));
        }
      }
      std::sort(v.begin(), v.end(), [](const Request* a, const Request* b) {
        // Requests still in perception warmup go first, in arrival order.
        if (a->scored != b->scored) return !a->scored;
        if (!a->scored) return by_arrival(a, b);
        if (a->priority != b->priority) return a->priority;
        if (a->score != b->score) return a->score < b->score;
        return by_arrival(a, b);
      });
      break;
    }
  }
  if (!preemptive()) {
    std::stable_partition(v.begin(), v.end(), [](const Request* r) {
      return r->state == RequestState::kRunning;
    });
  }
  return v;
}

void Scheduler::mlfq_demote(std::span<Request* const> queue,
                            BatchDecision& decision) const {
  for (auto* r : queue) {
    if (r->finished() || r->mlfq_level + 1 >= cfg_.mlfq_num_queues) continue;
    if (r->mlfq_level_runtime_ns >= mlfq_quantum_ns(cfg_, r->mlfq_level)) {
      ++r->mlfq_level;
      r->mlfq_level_runtime_ns = 0;
      decision.demoted.push_back(r->id);
    }
  }
}

void Scheduler::starvation_update(std::span<Request* const> queue,
                                  BatchDecision& decision) const {
  std::unordered_set<RequestId> in_batch(decision.run.begin(), decision.run.end());
  for (auto* r : queue) {
    if (r->finished()) continue;
    if (in_batch.count(r->id) != 0) {
      r->starvation_count = 0;
      if (r->priority) --r->quantum;
    } else {
      ++r->starvation_count;
    }
  }
  if (!cfg_.starvation_enabled()) return;
  for (auto* r : queue) {
    if (r->finished()) continue;
    if (r->starvation_count >= cfg_.starvation_threshold) {
      promote(*r, cfg_.priority_quantum);
      decision.promoted.push_back(r->id);
    } else if (r->priority && r->quantum <= 0) {
      demote(*r);
      decision.demoted.push_back(r->id);
    }
  }
}

BatchDecision Scheduler::schedule_step(std::span<Request* const> queue,
                                       [[maybe_unused]] std::int64_t now_ns,
                                       const BatchLimits& limits) {
  BatchDecision decision;
  if (cfg_.policy == Policy::kMlfq) mlfq_demote(queue, decision);

  const auto ordered = order(queue);
  const std::int64_t max_batch = std::min(limits.max_batch, cfg_.max_batch_requests);
  const bool reserve_full = !preemptive();
  std::int64_t used = 0;
  for (auto* r : ordered) {
    if (static_cast<std::int64_t>(decision.run.size()) >= max_batch) break;
    const std::int64_t fp = kv_footprint(*r, reserve_full);
    if (fp > limits.kv_budget - used) continue;
    used += fp;
    decision.run.push_back(r->id);
  }

  std::unordered_set<RequestId> in_batch(decision.run.begin(), decision.run.end());
  for (auto* r : ordered) {
    if (r->state == RequestState::kRunning && in_batch.count(r->id) == 0) {
      decision.preempted.push_back(r->id);
    }
  }

  if (cfg_.policy == Policy::kRanking) starvation_update(queue, decision);
  return decision;
}

void Scheduler::on_iteration(std::span<Request* const> batch,
                             std::int64_t duration_ns) {
  if (cfg_.policy != Policy::kMlfq) return;
  for (auto* r : batch) r->mlfq_level_runtime_ns += duration_ns;
}

}  // namespace rankserve
