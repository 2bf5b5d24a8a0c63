// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rankserve/engine.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "rankserve/errors.h"
#include "rankserve/ranking_metrics.h"
#include "util.h"

namespace rankserve {

namespace {

std::int64_t to_ns(double seconds) { return std::llround(seconds * 1e9); }
double to_s(std::int64_t ns) { return static_cast<double>(ns) / 1e9; }

bool is_learned(const Scorer* s) {
  return s != nullptr &&
         (s->kind == ScorerKind::kRankingModel || s->kind == ScorerKind::kClassifier);
}

class Simulation {
 public:
  Simulation(const Trace& trace, const Scorer* scorer, const RunConfig& cfg,
             const EventLog* log)
      : trace_(trace), scorer_(scorer), cfg_(cfg), log_(log), scheduler_(cfg.scheduler) {
    cfg_.cost.validate();
    if (trace.empty()) throw InvalidArgument("cannot simulate an empty trace");
    const auto& stop = cfg_.options.stop;
    if (stop.kind == StopCondition::Kind::kFinishedCount &&
        (stop.count < 1 || stop.count > static_cast<std::int64_t>(trace.size()))) {
      throw InvalidArgument("finished-count stop must be in [1, trace size]");
    }
    if (stop.kind == StopCondition::Kind::kTimeLimit && !(stop.seconds > 0.0)) {
      throw InvalidArgument("time-limit stop must be > 0 seconds");
    }
    ranking_ = cfg_.scheduler.policy == Policy::kRanking;
    if (ranking_ && scorer_ == nullptr) {
      throw InvalidArgument("the ranking policy needs a scorer");
    }
    warmup_ = ranking_ && scorer_->needs_warmup();
    scheduler_.set_warmup_mode(warmup_);
    mode_ = cfg_.options.rescore ? ScoreMode::kRemaining : ScoreMode::kAdmission;

    reqs_ = trace.requests();
    records_.resize(reqs_.size());
    for (std::size_t i = 0; i < reqs_.size(); ++i) {
      const auto& r = reqs_[i];
      index_[r.id] = i;
      auto& rec = records_[i];
      rec.id = r.id;
      rec.arrival_time = r.arrival_time;
      rec.arrival_ns = to_ns(r.arrival_time);
      rec.prompt_tokens = r.prompt_tokens;
      rec.output_tokens = r.true_output_tokens;
    }
  }

  SimResult execute() {
    std::int64_t now = 0;
    std::size_t next = 0;
    std::size_t finished = 0;
    std::size_t handled = 0;  // finished or dropped
    std::vector<Request*> queue;
    std::vector<Request*> fresh;
    const auto& stop = cfg_.options.stop;
    const BatchLimits limits{cfg_.cost.max_batch_requests, cfg_.cost.kv_token_budget};

    while (handled < reqs_.size()) {
      if (stop.kind == StopCondition::Kind::kFinishedCount &&
          static_cast<std::int64_t>(finished) >= stop.count) {
        break;
      }
      if (stop.kind == StopCondition::Kind::kTimeLimit && now >= to_ns(stop.seconds)) {
        break;
      }

      fresh.clear();
      while (next < reqs_.size() && records_[next].arrival_ns <= now) {
        auto& r = reqs_[next];
        if (r.prompt_tokens + r.true_output_tokens > cfg_.cost.kv_token_budget) {
          records_[next].dropped = true;
          ++handled;
        } else {
          queue.push_back(&r);
          fresh.push_back(&r);
        }
        ++next;
      }
      if (queue.empty()) {
        if (next < reqs_.size()) now = std::max(now, records_[next].arrival_ns);
        continue;
      }

      const std::int64_t start = now;
      now += score(queue, fresh);

      BatchDecision decision = decide(queue, now, limits);
      std::vector<Request*> batch;
      batch.reserve(decision.run.size());
      for (auto id : decision.run) batch.push_back(&reqs_[index_.at(id)]);
      for (auto id : decision.preempted) {
        auto& r = reqs_[index_.at(id)];
        r.state = RequestState::kPreempted;
        ++records_[index_.at(id)].preemptions;
      }

      std::int64_t prefill = 0;
      std::size_t warming = 0;
      for (auto* r : batch) {
        if (r->state == RequestState::kWaiting) {
          prefill += to_ns(static_cast<double>(r->prompt_tokens) *
                           cfg_.cost.prefill_seconds_per_prompt_token);
        } else if (r->state == RequestState::kPreempted) {
          prefill += to_ns(static_cast<double>(r->prompt_tokens + r->generated_tokens) *
                           cfg_.cost.prefill_seconds_per_prompt_token);
        }
        if (warmup_ && !r->scored) ++warming;
      }
      const std::int64_t decode = cfg_.cost.decode_ns(batch.size());
      now += prefill + decode;
      prefill_ns_ += prefill;
      decode_ns_ += decode;
      if (warming > 0) {
        po_overhead_ns_ += static_cast<double>(prefill + decode) *
                           static_cast<double>(warming) / static_cast<double>(batch.size());
      }

      for (auto* r : batch) {
        auto& rec = records_[index_.at(r->id)];
        if (rec.first_scheduled_iteration < 0) {
          rec.first_scheduled_iteration = static_cast<std::int64_t>(iterations_.size());
        }
        r->state = RequestState::kRunning;
        const bool in_warmup = warmup_ && !r->scored;
        if (in_warmup) ++r->warmup_tokens;
        if (in_warmup && !cfg_.options.po_reuse_warmup_tokens) continue;
        ++r->generated_tokens;
        rec.token_times_ns.push_back(now);
        if (r->generated_tokens == r->true_output_tokens) {
          r->state = RequestState::kFinished;
          ++finished;
          ++handled;
        }
      }
      scheduler_.on_iteration(batch, now - start);
      std::erase_if(queue, [](const Request* r) { return r->finished(); });

      if (log_ != nullptr) check_logged_times(start, now);
      iterations_.push_back({start, now, std::move(decision)});
    }

    if (log_ != nullptr && iterations_.size() != log_->iterations.size()) {
      throw ReplayMismatch("replay finished after " + std::to_string(iterations_.size()) +
                           " iterations, log has " +
                           std::to_string(log_->iterations.size()));
    }
    return finish(now);
  }

 private:
  // Assigns scores for this iteration and returns the predictor time charged.
  std::int64_t score(const std::vector<Request*>& queue,
                     const std::vector<Request*>& fresh) {
    if (!ranking_) return 0;
    double charged = 0.0;
    const double per_request =
        is_learned(scorer_) ? cfg_.cost.predictor_seconds_per_request : 0.0;
    if (cfg_.options.rescore) {
      // One batched incremental pass of the predictor over the running
      // requests, priced like a decode step: a token's share of an admission
      // call, scaled by the decode cost's batch-size growth.
      std::int64_t n = 0;
      double prompt_sum = 0.0;
      for (auto* r : queue) {
        if (r->state != RequestState::kRunning || !r->scored) continue;
        assign(*r);
        ++n;
        prompt_sum += static_cast<double>(std::max<std::int64_t>(1, r->prompt_tokens));
      }
      if (n > 0) {
        const auto& cost = cfg_.cost;
        const double extra = static_cast<double>(n - 1);
        const double growth =
            cost.decode_seconds > 0.0
                ? 1.0 + cost.decode_seconds_per_extra_request / cost.decode_seconds * extra
                : 1.0 + (cost.decode_seconds_per_extra_request > 0.0 ? extra : 0.0);
        charged += per_request / (prompt_sum / static_cast<double>(n)) * growth;
      }
    }
    for (auto* r : fresh) {
      if (assign(*r)) charged += per_request;
    }
    if (warmup_) {
      for (auto* r : queue) {
        if (!r->scored) assign(*r);
      }
    }
    const std::int64_t ns = to_ns(charged);
    predictor_ns_ += ns;
    return ns;
  }

  bool assign(Request& r) {
    const auto s = score_request(*scorer_, r, mode_);
    if (!s) return false;
    r.score = *s;
    r.scored = true;
    records_[index_.at(r.id)].score = *s;
    return true;
  }

  BatchDecision decide(const std::vector<Request*>& queue, std::int64_t now,
                       const BatchLimits& limits) {
    if (log_ == nullptr) {
      auto d = scheduler_.schedule_step(queue, now, limits);
      if (d.run.empty()) {
        throw std::logic_error("scheduler produced an empty batch with work queued");
      }
      return d;
    }
    const std::size_t it = iterations_.size();
    if (it >= log_->iterations.size()) {
      throw ReplayMismatch("log ends at iteration " + std::to_string(it) +
                           " but the simulation has work left");
    }
    const auto& d = log_->iterations[it].decision;
    std::unordered_set<RequestId> queued;
    for (const auto* r : queue) queued.insert(r->id);
    std::unordered_set<RequestId> seen;
    std::int64_t used = 0;
    const bool reserve_full = !scheduler_.preemptive();
    for (auto id : d.run) {
      if (queued.count(id) == 0 || !seen.insert(id).second) {
        throw ReplayMismatch("iteration " + std::to_string(it) +
                             " runs request " + std::to_string(id) +
                             " which is not schedulable");
      }
      used += kv_footprint(reqs_[index_.at(id)], reserve_full);
    }
    if (d.run.empty() ||
        static_cast<std::int64_t>(d.run.size()) >
            std::min(limits.max_batch, cfg_.scheduler.max_batch_requests) ||
        used > limits.kv_budget) {
      throw ReplayMismatch("iteration " + std::to_string(it) + " violates batch limits");
    }
    for (auto id : d.preempted) {
      if (queued.count(id) == 0 || seen.count(id) != 0) {
        throw ReplayMismatch("iteration " + std::to_string(it) +
                             " preempts an unknown or running request");
      }
    }
    return d;
  }

  void check_logged_times(std::int64_t start, std::int64_t end) const {
    const auto& logged = log_->iterations[iterations_.size()];
    if (logged.start_ns != start || logged.end_ns != end) {
      throw ReplayMismatch("iteration " + std::to_string(iterations_.size()) +
                           " timing differs from the log");
    }
  }

  SimResult finish(std::int64_t now) {
    SimResult out;
    out.config = cfg_;
    out.scorer = scorer_ != nullptr ? to_string(scorer_->kind) : "none";
    out.config_hash = config_hash(cfg_, scorer_);
    out.trace_hash = content_hash(trace_);
    out.iterations = std::move(iterations_);

    auto& m = out.metrics;
    m.requests = records_.size();
    m.end_time = to_s(now);
    m.iterations = static_cast<std::int64_t>(out.iterations.size());
    m.prefill_seconds = to_s(prefill_ns_);
    m.decode_seconds = to_s(decode_ns_);
    m.prediction_overhead_seconds =
        warmup_ ? po_overhead_ns_ / 1e9 : to_s(predictor_ns_);

    std::vector<LatencyRecord> latency;
    double ttft_sum = 0.0;
    double wait_sum = 0.0;
    std::vector<double> sched_x;
    std::vector<double> sched_y;
    for (const auto& rec : records_) {
      m.preemptions += rec.preemptions;
      if (rec.dropped) ++m.dropped;
      if (rec.first_scheduled_iteration >= 0) {
        sched_x.push_back(static_cast<double>(rec.first_scheduled_iteration));
        sched_y.push_back(static_cast<double>(rec.output_tokens));
      }
      if (!rec.finished()) continue;
      ++m.finished;
      latency.push_back({rec.id, rec.arrival_time, rec.finish_time(),
                         rec.output_tokens, true});
      ttft_sum += rec.ttft();
      const double w = rec.max_waiting_time();
      wait_sum += w;
      m.max_max_waiting_time = std::max(m.max_max_waiting_time, w);
    }
    if (!latency.empty()) {
      const auto stats = latency_stats(latency);
      const double n = static_cast<double>(latency.size());
      m.mean_per_token_latency = stats.mean_per_token_latency;
      m.p90_per_token_latency = stats.p90_per_token_latency;
      m.mean_ttft = ttft_sum / n;
      m.mean_max_waiting_time = wait_sum / n;
    }
    const double span = m.end_time - records_.front().arrival_time;
    m.throughput = span > 0.0 ? static_cast<double>(m.finished) / span : 0.0;
    if (sched_x.size() >= 2) m.schedule_tau = try_kendall_tau_b(sched_x, sched_y);
    if (ranking_) m.scorer_tau = evaluate_tau(*scorer_, trace_);

    out.requests = std::move(records_);
    return out;
  }

  const Trace& trace_;
  const Scorer* scorer_;
  RunConfig cfg_;
  const EventLog* log_;
  Scheduler scheduler_;
  bool ranking_ = false;
  bool warmup_ = false;
  ScoreMode mode_ = ScoreMode::kAdmission;
  std::vector<Request> reqs_;
  std::vector<RequestRecord> records_;
  std::unordered_map<RequestId, std::size_t> index_;
  std::vector<IterationRecord> iterations_;
  std::int64_t prefill_ns_ = 0;
  std::int64_t decode_ns_ = 0;
  std::int64_t predictor_ns_ = 0;
  double po_overhead_ns_ = 0.0;
};

}  // namespace

std::int64_t CostModel::decode_ns(std::size_t batch_size) const {
  const double extra = batch_size > 0 ? static_cast<double>(batch_size - 1) : 0.0;
  return to_ns(decode_seconds + decode_seconds_per_extra_request * extra);
}

void CostModel::validate() const {
  for (double v : {decode_seconds, decode_seconds_per_extra_request,
                   prefill_seconds_per_prompt_token, predictor_seconds_per_request}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("cost model values must be finite and >= 0");
    }
  }
  if (kv_token_budget < 1) throw InvalidArgument("kv_token_budget must be >= 1");
  if (max_batch_requests < 1) throw InvalidArgument("max_batch_requests must be >= 1");
}

CostModel cost_preset(std::string_view name) {
  CostModel c;
  if (name == "fig1") {
    c.decode_seconds = 1.0;
    c.max_batch_requests = 1;
    return c;
  }
  if (name == "desk") {
    c.decode_seconds = 0.025;
    c.decode_seconds_per_extra_request = 0.0;
    c.prefill_seconds_per_prompt_token = 1e-4;
    c.predictor_seconds_per_request = 2e-3;
    c.kv_token_budget = 16384;
    c.max_batch_requests = 32;
    return c;
  }
  throw InvalidArgument("unknown cost preset '" + std::string(name) +
                        "' (expected fig1 or desk)");
}

StopCondition parse_stop_condition(std::string_view text) {
  StopCondition s;
  const auto t = util::trim(text);
  if (t == "all" || t.empty()) return s;
  const auto eq = t.find('=');
  if (eq != std::string_view::npos) {
    const std::string key(util::trim(t.substr(0, eq)));
    const std::string value(util::trim(t.substr(eq + 1)));
    try {
      std::size_t used = 0;
      if (key == "finished") {
        s.kind = StopCondition::Kind::kFinishedCount;
        s.count = std::stoll(value, &used);
        if (used == value.size() && s.count >= 1) return s;
      } else if (key == "time") {
        s.kind = StopCondition::Kind::kTimeLimit;
        s.seconds = std::stod(value, &used);
        if (used == value.size() && s.seconds > 0.0 && std::isfinite(s.seconds)) return s;
      }
    } catch (const std::logic_error&) {
    }
  }
  throw InvalidArgument("bad stop condition '" + std::string(text) +
                        "' (expected all, finished=K or time=T)");
}

std::string to_string(const StopCondition& stop) {
  switch (stop.kind) {
    case StopCondition::Kind::kAllFinished:
      return "all";
    case StopCondition::Kind::kFinishedCount:
      return "finished=" + std::to_string(stop.count);
    case StopCondition::Kind::kTimeLimit: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "time=%.17g", stop.seconds);
      return buf;
    }
  }
  return "all";
}

double RequestRecord::ttft() const {
  return to_s(token_times_ns.front() - arrival_ns);
}

std::vector<double> RequestRecord::tpot() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < token_times_ns.size(); ++k) {
    out.push_back(to_s(token_times_ns[k] - token_times_ns[k - 1]));
  }
  return out;
}

double RequestRecord::finish_time() const { return to_s(token_times_ns.back()); }

double RequestRecord::max_waiting_time() const {
  return rankserve::max_waiting_time(ttft(), tpot());
}

double RequestRecord::per_token_latency() const {
  return (finish_time() - arrival_time) / static_cast<double>(output_tokens);
}

SimResult run(const Trace& trace, const Scorer* scorer, const RunConfig& config) {
  return Simulation(trace, scorer, config, nullptr).execute();
}

SimResult replay(const EventLog& log, const Trace& trace, const Scorer* scorer,
                 const RunConfig& config) {
  if (log.config_hash != config_hash(config, scorer)) {
    throw ReplayMismatch("event log config hash " + util::hex64(log.config_hash) +
                         " does not match the replay configuration " +
                         util::hex64(config_hash(config, scorer)));
  }
  if (log.trace_hash != content_hash(trace)) {
    throw ReplayMismatch("event log was recorded on a different trace");
  }
  return Simulation(trace, scorer, config, &log).execute();
}

}  // namespace rankserve
