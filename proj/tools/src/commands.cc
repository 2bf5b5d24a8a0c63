// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "experiments.h"
#include "rankserve/errors.h"

namespace rankserve::tools {

namespace {

namespace fs = std::filesystem;

// Flags shared by simulate, sweep and replay. Unset optionals keep the
// preset (or library) value.
struct RunFlags {
  std::string preset;
  std::string trace;
  std::string generator;
  std::string scorer;
  std::vector<std::string> policies;
  std::optional<std::int64_t> starvation_threshold;
  std::optional<std::int64_t> priority_quantum;
  std::optional<double> mlfq_base_quantum;
  std::optional<double> mlfq_growth;
  std::optional<std::int64_t> max_batch;
  std::optional<std::int64_t> kv_budget;
  std::string cost_preset;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rates;
  std::string stop;
  bool rescore = false;
  bool no_preemption = false;
  bool po_discard = false;
  int jobs = 1;
  std::string out;
};

struct TrainFlags {
  std::string train_trace;
  std::string train_generator;
  std::string heldout_trace;
  std::string heldout_generator;
  std::optional<std::int64_t> epochs;
  std::optional<std::int64_t> batch_size;
  std::optional<double> lr;
  std::optional<std::int64_t> hidden;
  std::optional<std::int64_t> bucket_width;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::int64_t> max_length;
};

void add_trace_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--trace", f.trace, "JSONL trace file");
  app->add_option("--generator", f.generator,
                  "Synthetic trace, e.g. poisson:rate=2,n=1000,dist=lmsys-like,seed=7");
}

void add_run_flags(CLI::App* app, RunFlags& f, bool many) {
  add_trace_flags(app, f);
  app->add_option("--preset", f.preset, "Experiment preset")
      ->check(CLI::IsMember(preset_names()));
  app->add_option("--scorer", f.scorer,
                  "oracle | noisy:<sigma> | po[:k] | trained | classifier[:bucket=N] | "
                  "cross-seed[:trace] | <weights.json>");
  app->add_option("--policy", f.policies,
                  "Scheduler entries policy[:scorer][@key=value...]; fcfs, sjf, srtf, "
                  "mlfq, ranking")
      ->delimiter(',');
  app->add_option("--starvation-threshold", f.starvation_threshold,
                  "Unscheduled steps before promotion; 0 disables");
  app->add_option("--priority-quantum", f.priority_quantum,
                  "Scheduled steps a promoted request keeps priority");
  app->add_option("--mlfq-base-quantum", f.mlfq_base_quantum, "Seconds at level 0");
  app->add_option("--mlfq-growth", f.mlfq_growth, "Quantum growth per level");
  app->add_option("--max-batch", f.max_batch, "Requests per iteration");
  app->add_option("--kv-budget", f.kv_budget, "KV cache tokens");
  app->add_option("--cost-preset", f.cost_preset, "fig1 or desk");
  app->add_option("--seed", f.seed, "Trace and scorer seed");
  app->add_option("--stop", f.stop, "all | finished=K | time=T");
  app->add_flag("--rescore", f.rescore, "Re-score running requests every iteration");
  app->add_flag("--no-preemption", f.no_preemption, "Never evict running requests");
  app->add_flag("--po-discard", f.po_discard,
                "Drop perception-only warmup tokens instead of reusing them");
  app->add_option("--out", f.out, many ? "Output CSV" : "Output path prefix");
  if (many) {
    app->add_option("--seeds", f.seeds, "Seed axis")->delimiter(',');
    app->add_option("--rates", f.rates, "Arrival-rate axis (poisson generators)")
        ->delimiter(',');
    app->add_option("--jobs", f.jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  }
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--train-trace", f.train_trace, "Training trace for learned scorers");
  app->add_option("--train-generator", f.train_generator, "Training trace generator");
  app->add_option("--heldout-trace", f.heldout_trace, "Held-out trace");
  app->add_option("--heldout-generator", f.heldout_generator, "Held-out trace generator");
  app->add_option("--epochs", f.epochs, "Training epochs");
  app->add_option("--batch-size", f.batch_size, "Training minibatch size");
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--hidden", f.hidden, "Hidden units; 0 for a linear scorer");
  app->add_option("--bucket-width", f.bucket_width, "ListMLE label bucket width");
  app->add_option("--train-seed", f.train_seed, "Training seed");
  app->add_option("--max-length", f.max_length, "Longest output the classifier covers");
}

TraceSource source(const std::string& path, const std::string& generator,
                   const TraceSource& fallback, const char* what) {
  if (!path.empty() && !generator.empty()) {
    throw InvalidArgument(std::string("give either a ") + what + " trace or a generator");
  }
  if (!path.empty()) return {path, ""};
  if (!generator.empty()) return {"", generator};
  return fallback;
}

void apply_train_flags(const TrainFlags& f, TraceSource& train, TraceSource& heldout,
                       TrainConfig& cfg, std::int64_t& max_length) {
  train = source(f.train_trace, f.train_generator, train, "training");
  heldout = source(f.heldout_trace, f.heldout_generator, heldout, "held-out");
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.hidden) cfg.hidden_units = *f.hidden;
  if (f.bucket_width) cfg.bucket_width = *f.bucket_width;
  if (f.train_seed) cfg.seed = *f.train_seed;
  if (f.max_length) max_length = *f.max_length;
}

// `ranking` or `ranking@...` picks up the --scorer value.
std::string with_scorer(const std::string& entry, const std::string& scorer) {
  if (scorer.empty()) return entry;
  const auto at = entry.find('@');
  const auto head = entry.substr(0, at);
  if (head.find(':') != std::string::npos) return entry;
  if (parse_policy(head) != Policy::kRanking) return entry;
  return head + ":" + scorer + (at == std::string::npos ? "" : entry.substr(at));
}

ExperimentSpec build_spec(const RunFlags& f, const TrainFlags& t) {
  ExperimentSpec spec = f.preset.empty() ? ExperimentSpec{} : experiment_preset(f.preset);
  spec.trace = source(f.trace, f.generator, spec.trace, "");
  if (!f.policies.empty()) {
    spec.schedulers.clear();
    for (const auto& p : f.policies) spec.schedulers.push_back(with_scorer(p, f.scorer));
  } else if (spec.schedulers.empty()) {
    spec.schedulers = {with_scorer("ranking", f.scorer.empty() ? "oracle" : f.scorer)};
  }
  auto& s = spec.scheduler;
  if (f.starvation_threshold) s.starvation_threshold = *f.starvation_threshold;
  if (f.priority_quantum) s.priority_quantum = *f.priority_quantum;
  if (f.mlfq_base_quantum) s.mlfq_base_quantum = *f.mlfq_base_quantum;
  if (f.mlfq_growth) s.mlfq_growth_rate = *f.mlfq_growth;
  if (f.no_preemption) s.preemption = false;
  if (f.max_batch) spec.max_batch = *f.max_batch;
  if (f.kv_budget) spec.kv_budget = *f.kv_budget;
  if (!f.cost_preset.empty()) spec.cost_preset = f.cost_preset;
  if (!f.stop.empty()) spec.options.stop = parse_stop_condition(f.stop);
  if (f.rescore) spec.options.rescore = true;
  if (f.po_discard) spec.options.po_reuse_warmup_tokens = false;
  if (!f.seeds.empty()) {
    spec.seeds = f.seeds;
  } else if (f.seed) {
    spec.seeds = {*f.seed};
  }
  if (!f.rates.empty()) spec.rates = f.rates;
  apply_train_flags(t, spec.train, spec.heldout, spec.train_config, spec.max_length);
  spec.validate();
  return spec;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string slug(const std::string& label) {
  std::string s;
  for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

std::string summary_line(const std::string& label, const SimResult& r) {
  const auto& m = r.metrics;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s: mean per-token latency %.3f s/token, p90 %.3f, finished %zu/%zu, "
                "end %.3f s, mean max wait %.3f s",
                label.c_str(), m.mean_per_token_latency, m.p90_per_token_latency,
                m.finished, m.requests, m.end_time, m.mean_max_waiting_time);
  return buf;
}

void write_result(const fs::path& prefix, const SimResult& r) {
  write_file(prefix.string() + ".json", result_to_json(r));
  write_file(prefix.string() + ".csv", result_to_csv(r));
  write_file(prefix.string() + ".events.jsonl", event_log_text(r));
}

int cmd_simulate(const RunFlags& f, const TrainFlags& t, std::ostream& out) {
  const auto spec = build_spec(f, t);
  if (!spec.rates.empty()) throw InvalidArgument("simulate has no rate axis; use sweep");
  std::vector<SchedulerEntry> entries;
  std::vector<std::string> scorers;
  for (const auto& s : spec.schedulers) {
    entries.push_back(parse_scheduler_entry(s));
    scorers.push_back(entries.back().scorer);
  }
  ScorerCache cache(spec);
  cache.prepare(scorers);
  std::vector<std::optional<std::uint64_t>> seeds(spec.seeds.begin(), spec.seeds.end());
  if (seeds.empty()) seeds.emplace_back();
  const bool many = entries.size() * seeds.size() > 1;
  for (const auto& seed : seeds) {
    const Trace trace = spec.trace.load(seed);
    const auto trace_seed = trace.metadata().seed;
    for (const auto& e : entries) {
      auto bound = cache.bind(e.scorer, trace, trace_seed);
      auto cfg = spec.run_config(e);
      cfg.options.seed = trace_seed;
      const auto r = run(bound.executed, bound.scorer ? &*bound.scorer : nullptr, cfg);
      std::string label = e.label;
      if (seeds.size() > 1) label += " seed=" + std::to_string(trace_seed);
      out << summary_line(label, r) << "\n";
      if (!f.out.empty()) {
        std::string prefix = f.out;
        if (many) {
          prefix += "." + slug(e.label);
          if (seeds.size() > 1) prefix += ".s" + std::to_string(trace_seed);
        }
        write_result(prefix, r);
      }
    }
  }
  return kExitOk;
}

int cmd_sweep(const RunFlags& f, const TrainFlags& t, std::ostream& out) {
  const auto spec = build_spec(f, t);
  const auto result = run_sweep(spec, f.jobs);
  const auto csv = sweep_to_csv(result);
  if (f.out.empty()) {
    out << csv;
  } else {
    write_file(f.out, csv);
    for (const auto& row : result.rows) {
      out << row.scheduler;
      if (row.rate) out << " rate=" << *row.rate;
      out << " seed=" << row.seed << ": mean " << row.metrics.mean_per_token_latency
          << " p90 " << row.metrics.p90_per_token_latency << " end "
          << row.metrics.end_time << "\n";
    }
  }
  return kExitOk;
}

struct TrainCmd {
  std::string method = "ranking";
  std::int64_t buckets = 10;
  std::optional<std::int64_t> bucket_size;
  std::string report;
};

int cmd_train(const RunFlags& f, const TrainFlags& tf, const TrainCmd& c,
              std::ostream& out) {
  ExperimentSpec defaults;
  TraceSource train = source(f.trace, f.generator, defaults.train, "training");
  TraceSource heldout = defaults.heldout;
  TrainConfig cfg = defaults.train_config;
  std::int64_t max_length = defaults.max_length;
  apply_train_flags(tf, train, heldout, cfg, max_length);
  if (f.seed) cfg.seed = *f.seed;
  // A trace given positionally replaces the default held-out set only when
  // one was asked for.
  const bool own_heldout = !tf.heldout_trace.empty() || !tf.heldout_generator.empty();
  const bool default_data = f.trace.empty() && f.generator.empty();

  const Trace train_trace = train.load();
  std::optional<Trace> heldout_trace;
  if (own_heldout || default_data) heldout_trace = heldout.load();
  const Trace* held = heldout_trace ? &*heldout_trace : nullptr;

  TrainResult result;
  if (c.method == "ranking") {
    result = train_ranking(train_trace, cfg, held);
  } else {
    std::int64_t n = c.buckets;
    std::int64_t size = c.bucket_size.value_or((max_length + n - 1) / n);
    if (c.bucket_size) n = std::max<std::int64_t>(2, (max_length + size - 1) / size);
    result = train_classifier(train_trace, cfg, n, size, held);
  }
  const fs::path weights = f.out.empty() ? fs::path("scorer.json") : fs::path(f.out);
  save_scorer(result.scorer, weights);
  fs::path report = c.report;
  if (report.empty()) report = fs::path(weights).replace_extension(".report.json");
  write_file(report, training_report_json(result.report, cfg));

  const auto& r = result.report;
  out << "wrote " << weights.string() << " and " << report.string() << "\n";
  if (r.heldout_tau) out << "held-out tau " << *r.heldout_tau << "\n";
  if (r.heldout_accuracy) out << "held-out accuracy " << *r.heldout_accuracy << "\n";
  if (r.loss_tau_pearson) out << "loss/tau pearson " << *r.loss_tau_pearson << "\n";
  return kExitOk;
}

struct BucketCmd {
  std::string burst;
  std::string sdg;
  std::optional<std::int64_t> sdg_finished;
  std::vector<std::int64_t> bucket_sizes;
};

int cmd_bucket_study(const RunFlags& f, const TrainFlags& tf, const BucketCmd& c,
                     std::ostream& out) {
  BucketStudySpec spec;
  apply_train_flags(tf, spec.train, spec.heldout, spec.train_config, spec.max_length);
  if (!c.burst.empty()) spec.burst = {"", c.burst};
  if (!c.sdg.empty()) spec.sdg = {"", c.sdg};
  if (c.sdg_finished) spec.sdg_finished = *c.sdg_finished;
  if (!c.bucket_sizes.empty()) spec.bucket_sizes = c.bucket_sizes;
  if (!f.cost_preset.empty()) spec.cost_preset = f.cost_preset;
  if (f.seed) spec.seed = *f.seed;
  for (auto s : spec.bucket_sizes) {
    if (s < 1) throw InvalidArgument("bucket sizes must be >= 1");
  }
  if (spec.sdg_finished < 1) throw InvalidArgument("sdg-finished must be >= 1");
  const auto study = run_bucket_study(spec, f.jobs);
  const auto csv = bucket_study_to_csv(study);
  if (!f.out.empty()) write_file(f.out, csv);
  out << csv;
  return kExitOk;
}

int cmd_replay(const RunFlags& f, const TrainFlags& t, const std::string& events,
               std::ostream& out) {
  const auto log = parse_event_log(read_file(events));
  const RunConfig cfg = config_from_json(log.config_json);
  ExperimentSpec spec;
  spec.trace = source(f.trace, f.generator, spec.trace, "");
  if (spec.trace.empty()) throw InvalidArgument("replay needs --trace or --generator");
  apply_train_flags(t, spec.train, spec.heldout, spec.train_config, spec.max_length);
  const std::string scorer = cfg.scheduler.policy == Policy::kRanking
                                 ? (f.scorer.empty() ? "oracle" : f.scorer)
                                 : "none";
  ScorerCache cache(spec);
  cache.prepare({scorer});
  const Trace trace = spec.trace.load(f.seed);
  const auto bound = cache.bind(scorer, trace, cfg.options.seed);
  const auto r = replay(log, bound.executed, bound.scorer ? &*bound.scorer : nullptr, cfg);
  out << "replay matched " << r.iterations.size() << " iterations\n"
      << summary_line(to_string(cfg.scheduler.policy), r) << "\n";
  if (!f.out.empty()) write_result(f.out, r);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rankserve: LLM serving scheduler simulator with learned ranking"};
  app.name("rankserve");
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "INI/TOML file; sections name subcommands");
  app.require_subcommand(1);

  RunFlags run_flags;
  TrainFlags train_flags;
  TrainCmd train_cmd;
  BucketCmd bucket_cmd;
  std::string events;

  auto* train = app.add_subcommand("train", "Train a ranking or classification scorer");
  add_trace_flags(train, run_flags);
  add_train_flags(train, train_flags);
  train->add_option("--method", train_cmd.method, "ranking or classifier")
      ->check(CLI::IsMember({"ranking", "classifier"}));
  train->add_option("--buckets", train_cmd.buckets, "Classifier bucket count")
      ->check(CLI::Range(2, 100000));
  train->add_option("--bucket-size", train_cmd.bucket_size,
                    "Classifier bucket width; overrides --buckets");
  train->add_option("--seed", run_flags.seed, "Training seed");
  train->add_option("--out", run_flags.out, "Weight file (default scorer.json)");
  train->add_option("--report", train_cmd.report, "Training report JSON");

  auto* simulate = app.add_subcommand("simulate", "Run one trace through the schedulers");
  add_run_flags(simulate, run_flags, false);
  add_train_flags(simulate, train_flags);

  auto* sweep = app.add_subcommand("sweep", "Schedulers x rates x seeds comparison table");
  add_run_flags(sweep, run_flags, true);
  add_train_flags(sweep, train_flags);

  auto* bucket = app.add_subcommand("bucket-study",
                                    "Ranking versus classification at several bucket sizes");
  add_train_flags(bucket, train_flags);
  bucket->add_option("--burst-generator", bucket_cmd.burst, "Burst latency trace");
  bucket->add_option("--sdg-generator", bucket_cmd.sdg, "Synthetic data generation trace");
  bucket->add_option("--sdg-finished", bucket_cmd.sdg_finished, "Requests to finish");
  bucket->add_option("--bucket-sizes", bucket_cmd.bucket_sizes, "Classifier bucket widths")
      ->delimiter(',');
  bucket->add_option("--cost-preset", run_flags.cost_preset, "fig1 or desk");
  bucket->add_option("--seed", run_flags.seed, "Scorer seed");
  bucket->add_option("--jobs", run_flags.jobs, "Concurrent trainings and runs")
      ->check(CLI::PositiveNumber);
  bucket->add_option("--out", run_flags.out, "Output CSV");

  auto* replay_cmd = app.add_subcommand("replay", "Re-execute a logged run and verify it");
  add_trace_flags(replay_cmd, run_flags);
  add_train_flags(replay_cmd, train_flags);
  replay_cmd->add_option("--events", events, "Event log from simulate")->required();
  replay_cmd->add_option("--scorer", run_flags.scorer, "Scorer the run used");
  replay_cmd->add_option("--seed", run_flags.seed, "Trace seed");
  replay_cmd->add_option("--out", run_flags.out, "Output path prefix");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(run_flags, train_flags, train_cmd, out);
    if (*simulate) return cmd_simulate(run_flags, train_flags, out);
    if (*sweep) return cmd_sweep(run_flags, train_flags, out);
    if (*bucket) return cmd_bucket_study(run_flags, train_flags, bucket_cmd, out);
    if (*replay_cmd) return cmd_replay(run_flags, train_flags, events, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ReplayMismatch& e) {
    err << "replay mismatch: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rankserve::tools
