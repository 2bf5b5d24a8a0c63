// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankserve/engine.h"
#include "rankserve/predictors.h"
#include "rankserve/workload.h"

namespace rankserve::tools {

// A trace given either as a JSONL path or as a generator spec string.
struct TraceSource {
  std::string path;
  std::string generator;

  bool empty() const { return path.empty() && generator.empty(); }
  // Generator seed is replaced by `seed` when given.
  Trace load(std::optional<std::uint64_t> seed = std::nullopt,
             std::optional<double> rate = std::nullopt) const;
  std::string describe() const;
};

// Scorer strings:
//   oracle | noisy:<sigma> | po | po:<k> | trained | classifier
//   | classifier:bucket=<size> | cross-seed | cross-seed:<jsonl> | <weights.json>
struct ScorerSpec {
  enum class Kind {
    kNone, kOracle, kNoisy, kPerception, kTrained, kClassifier, kCrossSeed, kFile
  };
  Kind kind = Kind::kNone;
  double sigma = 0.0;
  std::int64_t warmup_tokens = 15;
  std::int64_t bucket_size = 0;  // 0: max_len / 10
  std::string path;
};
ScorerSpec parse_scorer_spec(std::string_view text);

// `policy[:scorer][@key=value...]`, keys: threshold, quantum, rescore,
// preemption. E.g. `ranking:oracle@threshold=0`.
struct SchedulerEntry {
  std::string label;
  Policy policy = Policy::kFcfs;
  std::string scorer;
  std::optional<std::int64_t> threshold;
  std::optional<std::int64_t> quantum;
  std::optional<bool> rescore;
  std::optional<bool> preemption;
};
SchedulerEntry parse_scheduler_entry(std::string_view text);

struct ExperimentSpec {
  std::string name = "custom";
  TraceSource trace;
  // Training data for `trained` and `classifier` scorers.
  TraceSource train{"", "burst:n=4000,dist=lmsys-like,seed=11"};
  TraceSource heldout{"", "burst:n=1000,dist=lmsys-like,seed=12"};
  std::vector<std::string> schedulers;
  std::string cost_preset = "desk";
  std::optional<std::int64_t> kv_budget;
  std::optional<std::int64_t> max_batch;
  SchedulerConfig scheduler;
  EngineOptions options;
  std::vector<double> rates;           // empty: no rate axis
  std::vector<std::uint64_t> seeds;    // empty: the trace's own seed
  TrainConfig train_config = desk_train_config();
  std::int64_t max_length = 2048;      // classifier bucket range
  double cross_seed_sigma = 0.5;

  static TrainConfig desk_train_config();
  RunConfig run_config(const SchedulerEntry& entry) const;
  // Throws InvalidArgument.
  void validate() const;
  std::string to_json() const;
};

// fig1, burst-desk, rate-sweep-desk, sdg-desk, bucket-study-desk,
// starvation-desk.
ExperimentSpec experiment_preset(std::string_view name);
const std::vector<std::string>& preset_names();

// Trained predictors, built once per experiment and then shared read-only.
class ScorerCache {
 public:
  explicit ScorerCache(const ExperimentSpec& spec);
  // Trains whatever the given scorer strings need. Not thread-safe.
  void prepare(const std::vector<std::string>& scorer_specs);
  // Scorer for `spec_text` and the trace it should execute. Thread-safe
  // after prepare().
  struct Bound {
    std::optional<Scorer> scorer;
    Trace executed;
  };
  Bound bind(std::string_view spec_text, const Trace& trace,
             std::uint64_t seed) const;
  const TrainResult* ranking() const { return ranking_ ? &*ranking_ : nullptr; }
  const TrainResult* classifier(std::int64_t bucket_size) const;
  const Trace& heldout() const;
  // Takes over whatever `other` trained. Lets trainings run on separate
  // caches concurrently.
  void merge(ScorerCache&& other);

 private:
  const TrainResult& classifier_or_throw(std::int64_t bucket_size) const;
  std::int64_t resolve_bucket(std::int64_t bucket_size) const;

  ExperimentSpec spec_;
  std::optional<Trace> train_;
  std::optional<Trace> heldout_;
  std::optional<TrainResult> ranking_;
  std::vector<std::pair<std::int64_t, TrainResult>> classifiers_;
};

struct SweepRow {
  std::string scheduler;
  std::string scorer;
  std::optional<double> rate;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct SweepResult {
  ExperimentSpec spec;
  std::uint64_t hash = 0;
  std::vector<SweepRow> rows;
};

// Cross product of schedulers x rates x seeds, `jobs` cells at a time.
// Rows come back in that order regardless of `jobs`.
SweepResult run_sweep(const ExperimentSpec& spec, int jobs);
std::string sweep_to_csv(const SweepResult& result);

struct BucketRow {
  std::string method;
  std::optional<std::int64_t> n_buckets;
  std::optional<std::int64_t> bucket_size;
  std::optional<double> accuracy;
  std::optional<double> tau;
  double burst_latency = 0.0;
  double sdg_time = 0.0;
};

struct BucketStudySpec {
  TraceSource train{"", "burst:n=4000,dist=lmsys-like,seed=11"};
  TraceSource heldout{"", "burst:n=1000,dist=lmsys-like,seed=12"};
  TraceSource burst{"", "burst:n=200,dist=lmsys-like,seed=13"};
  TraceSource sdg{"", "burst:n=1000,dist=lmsys-like,seed=14"};
  std::int64_t sdg_finished = 100;
  std::string cost_preset = "desk";
  TrainConfig train_config = ExperimentSpec::desk_train_config();
  std::int64_t max_length = 2048;
  std::vector<std::int64_t> bucket_sizes{100, 10, 1};
  double cross_seed_sigma = 0.5;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

struct BucketStudy {
  BucketStudySpec spec;
  std::uint64_t hash = 0;
  std::vector<BucketRow> rows;
};

BucketStudy run_bucket_study(const BucketStudySpec& spec, int jobs);
std::string bucket_study_to_csv(const BucketStudy& study);

std::string training_report_json(const TrainingReport& report, const TrainConfig& cfg);

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace rankserve::tools
