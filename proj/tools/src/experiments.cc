// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rankserve/errors.h"
#include "rankserve/ranking_metrics.h"

namespace rankserve::tools {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v, std::string_view key) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw InvalidArgument("bad boolean for " + std::string(key) + ": '" + v + "'");
}

std::int64_t parse_int(const std::string& v, std::string_view key) {
  try {
    std::size_t used = 0;
    const auto x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw InvalidArgument("bad integer for " + std::string(key) + ": '" + v + "'");
}

double parse_double(const std::string& v, std::string_view key) {
  try {
    std::size_t used = 0;
    const auto x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::logic_error&) {
  }
  throw InvalidArgument("bad number for " + std::string(key) + ": '" + v + "'");
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string csv_optional(const std::optional<double>& v) {
  return v ? csv_number(*v) : std::string();
}

json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2}, {"adam_epsilon", c.adam_epsilon},
          {"bucket_width", c.bucket_width}, {"seed", c.seed},
          {"hidden_units", c.hidden_units}, {"checkpoint_every", c.checkpoint_every}};
}

json source_json(const TraceSource& s) {
  return {{"path", s.path}, {"generator", s.generator}};
}

bool is_learned(const ScorerSpec& s) {
  return s.kind == ScorerSpec::Kind::kTrained || s.kind == ScorerSpec::Kind::kClassifier;
}

double mean_latency(const SimResult& r) { return r.metrics.mean_per_token_latency; }

}  // namespace

Trace TraceSource::load(std::optional<std::uint64_t> seed,
                        std::optional<double> rate) const {
  if (!path.empty()) {
    if (rate) throw InvalidArgument("a rate axis needs a poisson generator, not a trace file");
    return load_trace(path, seed.value_or(0));
  }
  if (generator.empty()) throw InvalidArgument("no trace or generator given");
  auto spec = parse_generator_spec(generator);
  if (seed) spec.seed = *seed;
  if (rate) {
    if (spec.kind != GeneratorSpec::Kind::kPoisson) {
      throw InvalidArgument("a rate axis needs a poisson generator");
    }
    spec.rate = *rate;
  }
  return generate(spec);
}

std::string TraceSource::describe() const { return path.empty() ? generator : path; }

ScorerSpec parse_scorer_spec(std::string_view text) {
  ScorerSpec s;
  const std::string t = trim(text);
  const auto colon = t.find(':');
  const std::string head = t.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : t.substr(colon + 1);
  using K = ScorerSpec::Kind;
  if (t.empty() || t == "none") {
    s.kind = K::kNone;
  } else if (t == "oracle") {
    s.kind = K::kOracle;
  } else if (head == "noisy") {
    s.kind = K::kNoisy;
    s.sigma = parse_double(arg, "noisy sigma");
    if (s.sigma < 0.0) throw InvalidArgument("noisy sigma must be >= 0");
  } else if (head == "po") {
    s.kind = K::kPerception;
    s.sigma = kDefaultPerceptionSigma;
    s.warmup_tokens = perception_only_warmup_tokens(
        arg.empty() ? std::nullopt : std::optional(parse_int(arg, "po warmup tokens")));
  } else if (t == "trained") {
    s.kind = K::kTrained;
  } else if (head == "classifier") {
    s.kind = K::kClassifier;
    if (!arg.empty()) {
      if (arg.rfind("bucket=", 0) != 0) {
        throw InvalidArgument("classifier option must be bucket=<size>");
      }
      s.bucket_size = parse_int(arg.substr(7), "bucket size");
      if (s.bucket_size < 1) throw InvalidArgument("bucket size must be >= 1");
    }
  } else if (head == "cross-seed") {
    s.kind = K::kCrossSeed;
    s.path = arg;
  } else {
    s.kind = K::kFile;
    s.path = t;
  }
  return s;
}

SchedulerEntry parse_scheduler_entry(std::string_view text) {
  SchedulerEntry e;
  e.label = trim(text);
  std::vector<std::string> parts;
  std::stringstream ss(e.label);
  for (std::string p; std::getline(ss, p, '@');) parts.push_back(trim(p));
  if (parts.empty() || parts[0].empty()) throw InvalidArgument("empty scheduler entry");
  const auto colon = parts[0].find(':');
  e.policy = parse_policy(parts[0].substr(0, colon));
  if (colon != std::string::npos) e.scorer = parts[0].substr(colon + 1);
  if (e.policy == Policy::kRanking) {
    if (e.scorer.empty()) e.scorer = "oracle";
    parse_scorer_spec(e.scorer);
  } else if (!e.scorer.empty()) {
    throw InvalidArgument("scheduler '" + e.label + "': only ranking takes a scorer");
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("scheduler option '" + parts[i] + "' needs key=value");
    }
    const auto key = parts[i].substr(0, eq);
    const auto value = parts[i].substr(eq + 1);
    if (key == "threshold") {
      e.threshold = parse_int(value, key);
    } else if (key == "quantum") {
      e.quantum = parse_int(value, key);
    } else if (key == "rescore") {
      e.rescore = parse_bool(value, key);
    } else if (key == "preemption") {
      e.preemption = parse_bool(value, key);
    } else {
      throw InvalidArgument("unknown scheduler option '" + key + "'");
    }
  }
  return e;
}

TrainConfig ExperimentSpec::desk_train_config() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.hidden_units = 32;
  return c;
}

RunConfig ExperimentSpec::run_config(const SchedulerEntry& e) const {
  RunConfig c;
  c.cost = rankserve::cost_preset(cost_preset);
  if (kv_budget) c.cost.kv_token_budget = *kv_budget;
  c.scheduler = scheduler;
  if (max_batch) {
    c.cost.max_batch_requests = *max_batch;
    c.scheduler.max_batch_requests = *max_batch;
  }
  c.options = options;
  c.scheduler.policy = e.policy;
  if (e.threshold) c.scheduler.starvation_threshold = *e.threshold;
  if (e.quantum) c.scheduler.priority_quantum = *e.quantum;
  if (e.preemption) c.scheduler.preemption = *e.preemption;
  if (e.rescore) c.options.rescore = *e.rescore;
  c.scheduler.validate();
  c.cost.validate();
  return c;
}

void ExperimentSpec::validate() const {
  if (schedulers.empty()) throw InvalidArgument("no schedulers to compare");
  if (trace.empty()) throw InvalidArgument("no trace or generator given");
  for (const auto& s : schedulers) run_config(parse_scheduler_entry(s));
  for (auto r : rates) {
    if (!(r > 0.0)) throw InvalidArgument("rates must be > 0");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InvalidArgument("seeds must be unique");
  }
  train_config.validate(true);
  if (max_length < 10) throw InvalidArgument("max_length must be >= 10");
}

std::string ExperimentSpec::to_json() const {
  json j;
  j["name"] = name;
  j["trace"] = source_json(trace);
  j["train"] = source_json(train);
  j["heldout"] = source_json(heldout);
  j["schedulers"] = schedulers;
  j["cost_preset"] = cost_preset;
  j["kv_budget"] = kv_budget ? json(*kv_budget) : json(nullptr);
  j["max_batch"] = max_batch ? json(*max_batch) : json(nullptr);
  RunConfig base;
  base.scheduler = scheduler;
  base.options = options;
  j["base"] = json::parse(config_to_json(base));
  j["rates"] = rates;
  j["seeds"] = seeds;
  j["train_config"] = train_config_json(train_config);
  j["max_length"] = max_length;
  j["cross_seed_sigma"] = cross_seed_sigma;
  return j.dump();
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "fig1", "burst-desk", "rate-sweep-desk", "sdg-desk", "bucket-study-desk",
      "starvation-desk"};
  return names;
}

ExperimentSpec experiment_preset(std::string_view name) {
  ExperimentSpec s;
  s.name = std::string(name);
  if (name == "fig1") {
    s.trace.generator = "burst:n=3,dist=fixed(10,2,1),seed=0";
    s.cost_preset = "fig1";
    s.schedulers = {"fcfs", "ranking:oracle@threshold=0"};
  } else if (name == "burst-desk") {
    s.trace.generator = "burst:n=200,dist=lmsys-like,seed=13";
    s.schedulers = {"fcfs", "mlfq", "ranking:trained", "ranking:classifier",
                    "ranking:po", "ranking:oracle"};
  } else if (name == "rate-sweep-desk") {
    s.trace.generator = "poisson:rate=2,n=500,dist=lmsys-like,seed=31";
    s.rates = {2.0, 4.0, 6.0, 8.0};
    s.schedulers = {"fcfs", "mlfq", "ranking:trained", "ranking:po", "ranking:oracle"};
  } else if (name == "sdg-desk") {
    s.trace.generator = "burst:n=1000,dist=lmsys-like,seed=14";
    s.options.stop = parse_stop_condition("finished=100");
    s.schedulers = {"fcfs", "ranking:oracle", "ranking:trained"};
  } else if (name == "bucket-study-desk") {
    s.trace.generator = "burst:n=200,dist=lmsys-like,seed=13";
    s.schedulers = {"fcfs",
                    "ranking:cross-seed",
                    "ranking:trained",
                    "ranking:classifier",
                    "ranking:classifier:bucket=100",
                    "ranking:classifier:bucket=10",
                    "ranking:classifier:bucket=1",
                    "ranking:po"};
  } else if (name == "starvation-desk") {
    s.trace.generator = "poisson:rate=7,n=1000,dist=lmsys-like,seed=21";
    s.schedulers = {"ranking:oracle@threshold=0", "ranking:oracle"};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (known: " + known + ")");
  }
  return s;
}

ScorerCache::ScorerCache(const ExperimentSpec& spec) : spec_(spec) {}

std::int64_t ScorerCache::resolve_bucket(std::int64_t bucket_size) const {
  if (bucket_size > 0) return bucket_size;
  return (spec_.max_length + 9) / 10;
}

void ScorerCache::prepare(const std::vector<std::string>& scorer_specs) {
  std::vector<ScorerSpec> parsed;
  for (const auto& t : scorer_specs) parsed.push_back(parse_scorer_spec(t));
  const bool learned = std::any_of(parsed.begin(), parsed.end(), is_learned);
  if (!learned) return;
  if (!train_) {
    train_ = spec_.train.load();
    heldout_ = spec_.heldout.load();
  }
  for (const auto& p : parsed) {
    if (p.kind == ScorerSpec::Kind::kTrained && !ranking_) {
      ranking_ = train_ranking(*train_, spec_.train_config, &*heldout_);
    }
    if (p.kind == ScorerSpec::Kind::kClassifier) {
      const auto size = resolve_bucket(p.bucket_size);
      if (classifier(size) != nullptr) continue;
      const auto n = std::max<std::int64_t>(2, (spec_.max_length + size - 1) / size);
      classifiers_.emplace_back(
          size, train_classifier(*train_, spec_.train_config, n, size, &*heldout_));
    }
  }
}

const TrainResult* ScorerCache::classifier(std::int64_t bucket_size) const {
  for (const auto& [size, result] : classifiers_) {
    if (size == bucket_size) return &result;
  }
  return nullptr;
}

const TrainResult& ScorerCache::classifier_or_throw(std::int64_t bucket_size) const {
  const auto* r = classifier(resolve_bucket(bucket_size));
  if (r == nullptr) throw std::logic_error("classifier was not prepared");
  return *r;
}

void ScorerCache::merge(ScorerCache&& other) {
  if (!train_ && other.train_) {
    train_ = std::move(other.train_);
    heldout_ = std::move(other.heldout_);
  }
  if (!ranking_ && other.ranking_) ranking_ = std::move(other.ranking_);
  for (auto& entry : other.classifiers_) {
    if (classifier(entry.first) == nullptr) classifiers_.push_back(std::move(entry));
  }
}

const Trace& ScorerCache::heldout() const {
  if (!heldout_) throw std::logic_error("no held-out trace was loaded");
  return *heldout_;
}

ScorerCache::Bound ScorerCache::bind(std::string_view spec_text, const Trace& trace,
                                     std::uint64_t seed) const {
  const auto s = parse_scorer_spec(spec_text);
  Bound b;
  b.executed = trace;
  using K = ScorerSpec::Kind;
  switch (s.kind) {
    case K::kNone:
      break;
    case K::kOracle:
      b.scorer = Scorer::oracle();
      break;
    case K::kNoisy:
      b.scorer = Scorer::noisy_oracle(s.sigma, seed);
      break;
    case K::kPerception:
      b.scorer = Scorer::perception_only(s.warmup_tokens, s.sigma, seed);
      break;
    case K::kTrained:
      if (!ranking_) throw std::logic_error("ranking scorer was not prepared");
      b.scorer = ranking_->scorer;
      break;
    case K::kClassifier:
      b.scorer = classifier_or_throw(s.bucket_size).scorer;
      break;
    case K::kCrossSeed:
      if (s.path.empty()) {
        b.executed = resample_output_lengths(trace, spec_.cross_seed_sigma, seed + 1);
        b.scorer = cross_seed_oracle(trace, b.executed);
      } else {
        b.scorer = cross_seed_oracle(load_trace(s.path), trace);
      }
      break;
    case K::kFile:
      b.scorer = load_scorer(s.path);
      break;
  }
  return b;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SweepResult run_sweep(const ExperimentSpec& spec, int jobs) {
  spec.validate();
  std::vector<SchedulerEntry> entries;
  std::vector<std::string> scorer_specs;
  for (const auto& s : spec.schedulers) {
    entries.push_back(parse_scheduler_entry(s));
    scorer_specs.push_back(entries.back().scorer);
  }
  ScorerCache cache(spec);
  cache.prepare(scorer_specs);

  std::vector<std::optional<double>> rates;
  for (auto r : spec.rates) rates.emplace_back(r);
  if (rates.empty()) rates.emplace_back();
  std::vector<std::optional<std::uint64_t>> seeds;
  for (auto s : spec.seeds) seeds.emplace_back(s);
  if (seeds.empty()) seeds.emplace_back();

  struct Cell {
    const SchedulerEntry* entry;
    std::optional<double> rate;
    std::optional<std::uint64_t> seed;
  };
  std::vector<Cell> cells;
  for (const auto& e : entries) {
    for (const auto& r : rates) {
      for (const auto& s : seeds) cells.push_back({&e, r, s});
    }
  }

  SweepResult out;
  out.spec = spec;
  out.hash = fnv1a(spec.to_json());
  out.rows.resize(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto& c = cells[i];
    const Trace trace = spec.trace.load(c.seed, c.rate);
    const std::uint64_t seed = trace.metadata().seed;
    auto bound = cache.bind(c.entry->scorer, trace, seed);
    auto cfg = spec.run_config(*c.entry);
    cfg.options.seed = seed;
    const auto result =
        run(bound.executed, bound.scorer ? &*bound.scorer : nullptr, cfg);
    auto& row = out.rows[i];
    row.scheduler = c.entry->label;
    row.scorer = result.scorer;
    row.rate = c.rate;
    row.seed = seed;
    row.metrics = result.metrics;
  });
  return out;
}

std::string sweep_to_csv(const SweepResult& r) {
  std::ostringstream out;
  std::string seeds;
  for (auto s : r.spec.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
  out << "# rankserve " << kVersion << " config_hash=" << hex64(r.hash)
      << " seed=" << (seeds.empty() ? "trace" : seeds) << " experiment=" << r.spec.name
      << "\n";
  out << "scheduler,scorer,rate,seed,requests,finished,dropped,mean_latency,p90_latency,"
         "throughput,mean_max_waiting_time,max_max_waiting_time,mean_ttft,schedule_tau,"
         "scorer_tau,end_time,preemptions,prediction_overhead\n";
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    out << row.scheduler << ',' << row.scorer << ','
        << (row.rate ? csv_number(*row.rate) : "") << ',' << row.seed << ','
        << m.requests << ',' << m.finished << ',' << m.dropped << ','
        << csv_number(m.mean_per_token_latency) << ','
        << csv_number(m.p90_per_token_latency) << ',' << csv_number(m.throughput) << ','
        << csv_number(m.mean_max_waiting_time) << ','
        << csv_number(m.max_max_waiting_time) << ',' << csv_number(m.mean_ttft) << ','
        << csv_optional(m.schedule_tau) << ',' << csv_optional(m.scorer_tau) << ','
        << csv_number(m.end_time) << ',' << m.preemptions << ','
        << csv_number(m.prediction_overhead_seconds) << '\n';
  }
  return out.str();
}

std::string BucketStudySpec::to_json() const {
  json j;
  j["train"] = source_json(train);
  j["heldout"] = source_json(heldout);
  j["burst"] = source_json(burst);
  j["sdg"] = source_json(sdg);
  j["sdg_finished"] = sdg_finished;
  j["cost_preset"] = cost_preset;
  j["train_config"] = train_config_json(train_config);
  j["max_length"] = max_length;
  j["bucket_sizes"] = bucket_sizes;
  j["cross_seed_sigma"] = cross_seed_sigma;
  j["seed"] = seed;
  return j.dump();
}

BucketStudy run_bucket_study(const BucketStudySpec& spec, int jobs) {
  ExperimentSpec exp;
  exp.train = spec.train;
  exp.heldout = spec.heldout;
  exp.train_config = spec.train_config;
  exp.max_length = spec.max_length;
  exp.cross_seed_sigma = spec.cross_seed_sigma;
  exp.cost_preset = spec.cost_preset;

  std::vector<std::string> methods = {"cross-seed", "trained", "classifier"};
  for (auto size : spec.bucket_sizes) {
    methods.push_back("classifier:bucket=" + std::to_string(size));
  }
  methods.push_back("po");

  // Trainings are independent; run them concurrently, then assemble.
  ScorerCache cache(exp);
  {
    const std::vector<std::string> learned(methods.begin() + 1, methods.end() - 1);
    std::vector<ScorerCache> parts(learned.size(), ScorerCache(exp));
    parallel_for(learned.size(), jobs,
                 [&](std::size_t i) { parts[i].prepare({learned[i]}); });
    for (auto& p : parts) cache.merge(std::move(p));
  }

  const Trace heldout = cache.heldout();
  const Trace burst = spec.burst.load();
  const Trace sdg = spec.sdg.load();

  RunConfig burst_cfg = exp.run_config(parse_scheduler_entry("ranking"));
  RunConfig sdg_cfg = burst_cfg;
  sdg_cfg.options.stop.kind = StopCondition::Kind::kFinishedCount;
  sdg_cfg.options.stop.count = spec.sdg_finished;

  BucketStudy out;
  out.spec = spec;
  out.hash = fnv1a(spec.to_json());
  out.rows.resize(methods.size() + 1);

  parallel_for(methods.size() + 1, jobs, [&](std::size_t i) {
    auto& row = out.rows[i];
    if (i == methods.size()) {
      row.method = "fcfs";
      RunConfig b = burst_cfg;
      b.scheduler.policy = Policy::kFcfs;
      RunConfig s = sdg_cfg;
      s.scheduler.policy = Policy::kFcfs;
      row.burst_latency = mean_latency(run(burst, nullptr, b));
      row.sdg_time = run(sdg, nullptr, s).metrics.end_time;
      return;
    }
    const auto& m = methods[i];
    const auto parsed = parse_scorer_spec(m);
    const auto eval = cache.bind(m, heldout, spec.seed);
    row.tau = evaluate_tau(*eval.scorer, eval.executed);
    if (parsed.kind == ScorerSpec::Kind::kClassifier) {
      row.accuracy = classifier_accuracy(*eval.scorer, heldout);
      row.n_buckets = eval.scorer->n_buckets;
      row.bucket_size = eval.scorer->bucket_size;
      row.method = parsed.bucket_size == 0 ? "classifier-10-buckets"
                                           : "classifier-bucket-" +
                                                 std::to_string(parsed.bucket_size);
    } else if (parsed.kind == ScorerSpec::Kind::kTrained) {
      row.method = "ranking";
    } else if (parsed.kind == ScorerSpec::Kind::kCrossSeed) {
      row.method = "optimal-prediction";
    } else {
      row.method = "perception-only";
    }
    const auto b = cache.bind(m, burst, spec.seed);
    row.burst_latency = mean_latency(run(b.executed, &*b.scorer, burst_cfg));
    const auto s = cache.bind(m, sdg, spec.seed);
    row.sdg_time = run(s.executed, &*s.scorer, sdg_cfg).metrics.end_time;
  });
  return out;
}

std::string bucket_study_to_csv(const BucketStudy& study) {
  std::ostringstream out;
  out << "# rankserve " << kVersion << " config_hash=" << hex64(study.hash)
      << " seed=" << study.spec.seed << " experiment=bucket-study\n";
  out << "method,n_buckets,bucket_size,accuracy,tau,burst_mean_latency,sdg_time\n";
  for (const auto& r : study.rows) {
    out << r.method << ',' << (r.n_buckets ? std::to_string(*r.n_buckets) : "") << ','
        << (r.bucket_size ? std::to_string(*r.bucket_size) : "") << ','
        << csv_optional(r.accuracy) << ',' << csv_optional(r.tau) << ','
        << csv_number(r.burst_latency) << ',' << csv_number(r.sdg_time) << '\n';
  }
  return out.str();
}

std::string training_report_json(const TrainingReport& report, const TrainConfig& cfg) {
  json j;
  j["method"] = report.method;
  j["config"] = train_config_json(cfg);
  j["train_tau"] = optional_json(report.train_tau);
  j["heldout_tau"] = optional_json(report.heldout_tau);
  j["heldout_accuracy"] = optional_json(report.heldout_accuracy);
  j["loss_tau_pearson"] = optional_json(report.loss_tau_pearson);
  json cps = json::array();
  for (const auto& c : report.checkpoints) {
    cps.push_back({{"step", c.step},
                   {"loss", c.loss},
                   {"heldout_tau", optional_json(c.heldout_tau)},
                   {"heldout_accuracy", optional_json(c.heldout_accuracy)}});
  }
  j["checkpoints"] = std::move(cps);
  j["step_loss"] = report.step_loss;
  return j.dump(2) + "\n";
}

}  // namespace rankserve::tools
