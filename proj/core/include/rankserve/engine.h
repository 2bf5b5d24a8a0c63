// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankserve/predictors.h"
#include "rankserve/schedulers.h"
#include "rankserve/workload.h"

namespace rankserve {

inline constexpr const char* kVersion = "0.1.0";

// Per-iteration time accounting. One iteration decodes one token for every
// request in the batch and costs
//   decode_seconds + decode_seconds_per_extra_request * (|B| - 1)
// plus prefill for requests entering the batch.
struct CostModel {
  double decode_seconds = 1.0;
  double decode_seconds_per_extra_request = 0.0;
  double prefill_seconds_per_prompt_token = 0.0;
  // Charged per newly admitted request when a learned scorer is in use.
  double predictor_seconds_per_request = 0.0;
  std::int64_t kv_token_budget = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_batch_requests = std::numeric_limits<std::int64_t>::max();

  std::int64_t decode_ns(std::size_t batch_size) const;
  void validate() const;
  bool operator==(const CostModel&) const = default;
};

// fig1: 1 s per token, batch 1, nothing else charged.
// desk: 25 ms iterations, 0.1 ms per prompt token of prefill, 16k KV tokens.
CostModel cost_preset(std::string_view name);

struct StopCondition {
  enum class Kind { kAllFinished, kFinishedCount, kTimeLimit };
  Kind kind = Kind::kAllFinished;
  std::int64_t count = 0;  // kFinishedCount
  double seconds = 0.0;    // kTimeLimit, simulated

  bool operator==(const StopCondition&) const = default;
};

// `all`, `finished=K`, `time=T`.
StopCondition parse_stop_condition(std::string_view text);
std::string to_string(const StopCondition& stop);

struct EngineOptions {
  // Re-score running requests every iteration with remaining-length
  // estimates instead of scoring once at admission.
  bool rescore = false;
  // Perception-only warmup tokens count toward the output (reuse) or are
  // thrown away (discard).
  bool po_reuse_warmup_tokens = true;
  StopCondition stop;
  std::uint64_t seed = 0;

  bool operator==(const EngineOptions&) const = default;
};

struct RunConfig {
  SchedulerConfig scheduler;
  CostModel cost;
  EngineOptions options;

  bool operator==(const RunConfig&) const = default;
};

struct RequestRecord {
  RequestId id = 0;
  double arrival_time = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t arrival_ns = 0;
  std::vector<std::int64_t> token_times_ns;
  std::int64_t preemptions = 0;
  std::int64_t first_scheduled_iteration = -1;
  std::optional<double> score;  // last score assigned, if any
  bool dropped = false;

  bool finished() const {
    return !dropped && static_cast<std::int64_t>(token_times_ns.size()) == output_tokens;
  }
  // Seconds. Only meaningful once the first token exists.
  double ttft() const;
  std::vector<double> tpot() const;
  double finish_time() const;
  double max_waiting_time() const;
  double per_token_latency() const;

  bool operator==(const RequestRecord&) const = default;
};

struct MetricsReport {
  std::size_t requests = 0;
  std::size_t finished = 0;
  std::size_t dropped = 0;
  double mean_per_token_latency = 0.0;
  double p90_per_token_latency = 0.0;
  double mean_ttft = 0.0;
  double mean_max_waiting_time = 0.0;
  double max_max_waiting_time = 0.0;
  double throughput = 0.0;  // finished / (end - first arrival)
  double end_time = 0.0;    // simulated seconds when the run stopped
  std::int64_t iterations = 0;
  std::int64_t preemptions = 0;
  double prefill_seconds = 0.0;
  double decode_seconds = 0.0;
  // Predictor calls, or warmup decode share for perception-only.
  double prediction_overhead_seconds = 0.0;
  // Tau(first scheduled iteration, true length) over scheduled requests.
  std::optional<double> schedule_tau;
  // Tau(admission score, true length) over the trace.
  std::optional<double> scorer_tau;

  bool operator==(const MetricsReport&) const = default;
};

struct IterationRecord {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  BatchDecision decision;

  bool operator==(const IterationRecord&) const = default;
};

struct SimResult {
  RunConfig config;
  std::string scorer;  // scorer kind, or "none"
  std::uint64_t config_hash = 0;
  std::uint64_t trace_hash = 0;
  std::vector<RequestRecord> requests;  // trace order
  MetricsReport metrics;
  std::vector<IterationRecord> iterations;

  bool operator==(const SimResult&) const = default;
};

// Runs the trace to the stop condition. `scorer` is used by the ranking
// policy only and may be null for the others. Throws InvalidArgument on a
// bad configuration.
SimResult run(const Trace& trace, const Scorer* scorer, const RunConfig& config);

struct EventLog {
  std::uint64_t config_hash = 0;
  std::uint64_t trace_hash = 0;
  std::string config_json;
  std::vector<IterationRecord> iterations;
};

// Re-executes the logged decisions. Throws ReplayMismatch when the log does
// not belong to (trace, scorer, config) or diverges from it.
SimResult replay(const EventLog& log, const Trace& trace, const Scorer* scorer,
                 const RunConfig& config);

// Digest over the scheduler, cost model, options and scorer parameters.
std::uint64_t config_hash(const RunConfig& config, const Scorer* scorer);

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(std::string_view text);

std::string event_log_text(const SimResult& result);
// Throws ParseError on a malformed or truncated log.
EventLog parse_event_log(std::string_view text);

std::string result_to_json(const SimResult& result);
// One row per request after a `#` line with config hash, version and seed.
std::string result_to_csv(const SimResult& result);

}  // namespace rankserve
