// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "rankserve/engine.h"
#include "rankserve/errors.h"
#include "util.h"

namespace rankserve {

namespace {

using nlohmann::json;

constexpr std::string_view kLogMagic = "# rankserve-event-log v1";

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t parse_hex(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  if (text.size() != 16) throw ParseError("bad " + std::string(what) + " in event log");
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw ParseError("bad " + std::string(what) + " in event log");
    }
  }
  return v;
}

// Value of `key=` in a space separated header line.
std::string header_field(std::string_view line, std::string_view key) {
  const std::string needle = " " + std::string(key) + "=";
  const auto pos = line.find(needle);
  if (pos == std::string_view::npos) {
    throw ParseError("event log header lacks " + std::string(key));
  }
  const auto start = pos + needle.size();
  const auto end = line.find(' ', start);
  return std::string(line.substr(start, end == std::string_view::npos ? end : end - start));
}

json ids(const std::vector<RequestId>& v) { return json(v); }

}  // namespace

std::string config_to_json(const RunConfig& c) {
  const auto& s = c.scheduler;
  const auto& k = c.cost;
  const auto& o = c.options;
  json j;
  j["scheduler"] = {{"policy", to_string(s.policy)},
                    {"starvation_threshold", s.starvation_threshold},
                    {"priority_quantum", s.priority_quantum},
                    {"mlfq_base_quantum", s.mlfq_base_quantum},
                    {"mlfq_growth_rate", s.mlfq_growth_rate},
                    {"mlfq_num_queues", s.mlfq_num_queues},
                    {"max_batch_requests", s.max_batch_requests},
                    {"preemption", s.preemption}};
  j["cost"] = {{"decode_seconds", k.decode_seconds},
               {"decode_seconds_per_extra_request", k.decode_seconds_per_extra_request},
               {"prefill_seconds_per_prompt_token", k.prefill_seconds_per_prompt_token},
               {"predictor_seconds_per_request", k.predictor_seconds_per_request},
               {"kv_token_budget", k.kv_token_budget},
               {"max_batch_requests", k.max_batch_requests}};
  j["options"] = {{"rescore", o.rescore},
                  {"po_reuse_warmup_tokens", o.po_reuse_warmup_tokens},
                  {"stop", to_string(o.stop)},
                  {"seed", o.seed}};
  return j.dump();
}

RunConfig config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    RunConfig c;
    const auto& s = j.at("scheduler");
    c.scheduler.policy = parse_policy(s.at("policy").get<std::string>());
    c.scheduler.starvation_threshold = s.at("starvation_threshold").get<std::int64_t>();
    c.scheduler.priority_quantum = s.at("priority_quantum").get<std::int64_t>();
    c.scheduler.mlfq_base_quantum = s.at("mlfq_base_quantum").get<double>();
    c.scheduler.mlfq_growth_rate = s.at("mlfq_growth_rate").get<double>();
    c.scheduler.mlfq_num_queues = s.at("mlfq_num_queues").get<int>();
    c.scheduler.max_batch_requests = s.at("max_batch_requests").get<std::int64_t>();
    c.scheduler.preemption = s.at("preemption").get<bool>();
    const auto& k = j.at("cost");
    c.cost.decode_seconds = k.at("decode_seconds").get<double>();
    c.cost.decode_seconds_per_extra_request =
        k.at("decode_seconds_per_extra_request").get<double>();
    c.cost.prefill_seconds_per_prompt_token =
        k.at("prefill_seconds_per_prompt_token").get<double>();
    c.cost.predictor_seconds_per_request =
        k.at("predictor_seconds_per_request").get<double>();
    c.cost.kv_token_budget = k.at("kv_token_budget").get<std::int64_t>();
    c.cost.max_batch_requests = k.at("max_batch_requests").get<std::int64_t>();
    const auto& o = j.at("options");
    c.options.rescore = o.at("rescore").get<bool>();
    c.options.po_reuse_warmup_tokens = o.at("po_reuse_warmup_tokens").get<bool>();
    c.options.stop = parse_stop_condition(o.at("stop").get<std::string>());
    c.options.seed = o.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad run configuration: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("bad run configuration: ") + e.what());
  }
}

std::uint64_t config_hash(const RunConfig& config, const Scorer* scorer) {
  const std::string scorer_part =
      scorer != nullptr ? util::hex64(scorer_hash(*scorer)) : "none";
  return util::fnv1a(config_to_json(config) + "|" + scorer_part);
}

std::string event_log_text(const SimResult& r) {
  std::string out(kLogMagic);
  out += " config_hash=" + util::hex64(r.config_hash) +
         " trace_hash=" + util::hex64(r.trace_hash) +
         " iterations=" + std::to_string(r.iterations.size()) + "\n";
  out += "# config " + config_to_json(r.config) + "\n";
  for (const auto& it : r.iterations) {
    json j = {{"t", it.start_ns},
              {"e", it.end_ns},
              {"run", ids(it.decision.run)},
              {"pre", ids(it.decision.preempted)},
              {"pro", ids(it.decision.promoted)},
              {"dem", ids(it.decision.demoted)}};
    out += j.dump();
    out += '\n';
  }
  out += "# end\n";
  return out;
}

EventLog parse_event_log(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.size() < 3 || lines[0].substr(0, kLogMagic.size()) != kLogMagic) {
    throw ParseError("not a rankserve event log");
  }
  EventLog log;
  log.config_hash = parse_hex(header_field(lines[0], "config_hash"), "config hash");
  log.trace_hash = parse_hex(header_field(lines[0], "trace_hash"), "trace hash");
  std::size_t expected = 0;
  try {
    expected = std::stoull(header_field(lines[0], "iterations"));
  } catch (const std::logic_error&) {
    throw ParseError("bad iteration count in event log header");
  }
  constexpr std::string_view kConfig = "# config ";
  if (lines[1].substr(0, kConfig.size()) != kConfig) {
    throw ParseError("event log line 2: missing configuration");
  }
  log.config_json = std::string(lines[1].substr(kConfig.size()));

  std::size_t i = 2;
  for (; i < lines.size() && lines[i] != "# end"; ++i) {
    try {
      const json j = json::parse(lines[i]);
      IterationRecord it;
      it.start_ns = j.at("t").get<std::int64_t>();
      it.end_ns = j.at("e").get<std::int64_t>();
      it.decision.run = j.at("run").get<std::vector<RequestId>>();
      it.decision.preempted = j.at("pre").get<std::vector<RequestId>>();
      it.decision.promoted = j.at("pro").get<std::vector<RequestId>>();
      it.decision.demoted = j.at("dem").get<std::vector<RequestId>>();
      log.iterations.push_back(std::move(it));
    } catch (const json::exception& e) {
      throw ParseError("event log line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (i >= lines.size()) throw ParseError("event log is truncated (no end marker)");
  if (log.iterations.size() != expected) {
    throw ParseError("event log is truncated: header promises " +
                     std::to_string(expected) + " iterations, found " +
                     std::to_string(log.iterations.size()));
  }
  return log;
}

std::string result_to_json(const SimResult& r) {
  const auto& m = r.metrics;
  json j;
  j["version"] = kVersion;
  j["config_hash"] = util::hex64(r.config_hash);
  j["trace_hash"] = util::hex64(r.trace_hash);
  j["seed"] = r.config.options.seed;
  j["scorer"] = r.scorer;
  j["config"] = json::parse(config_to_json(r.config));
  j["metrics"] = {{"requests", m.requests},
                  {"finished", m.finished},
                  {"dropped", m.dropped},
                  {"mean_per_token_latency", m.mean_per_token_latency},
                  {"p90_per_token_latency", m.p90_per_token_latency},
                  {"mean_ttft", m.mean_ttft},
                  {"mean_max_waiting_time", m.mean_max_waiting_time},
                  {"max_max_waiting_time", m.max_max_waiting_time},
                  {"throughput", m.throughput},
                  {"end_time", m.end_time},
                  {"iterations", m.iterations},
                  {"preemptions", m.preemptions},
                  {"prefill_seconds", m.prefill_seconds},
                  {"decode_seconds", m.decode_seconds},
                  {"prediction_overhead_seconds", m.prediction_overhead_seconds},
                  {"schedule_tau", optional_json(m.schedule_tau)},
                  {"scorer_tau", optional_json(m.scorer_tau)}};
  json reqs = json::array();
  for (const auto& rec : r.requests) {
    json q = {{"id", rec.id},
              {"arrival_time", rec.arrival_time},
              {"prompt_tokens", rec.prompt_tokens},
              {"output_tokens", rec.output_tokens},
              {"generated_tokens", rec.token_times_ns.size()},
              {"status", rec.dropped ? "dropped" : rec.finished() ? "finished" : "unfinished"},
              {"preemptions", rec.preemptions},
              {"first_scheduled_iteration", rec.first_scheduled_iteration},
              {"score", optional_json(rec.score)}};
    if (!rec.token_times_ns.empty()) q["ttft"] = rec.ttft();
    if (rec.finished()) {
      q["finish_time"] = rec.finish_time();
      q["per_token_latency"] = rec.per_token_latency();
      q["max_waiting_time"] = rec.max_waiting_time();
    }
    reqs.push_back(std::move(q));
  }
  j["requests"] = std::move(reqs);
  return j.dump(2) + "\n";
}

std::string result_to_csv(const SimResult& r) {
  std::ostringstream out;
  out << "# rankserve " << kVersion << " config_hash=" << util::hex64(r.config_hash)
      << " trace_hash=" << util::hex64(r.trace_hash)
      << " seed=" << r.config.options.seed
      << " policy=" << to_string(r.config.scheduler.policy)
      << " scorer=" << r.scorer << "\n";
  out << "id,arrival,ttft,finish,per_token_latency,max_waiting_time,preemptions,"
         "output_tokens,status\n";
  for (const auto& rec : r.requests) {
    out << rec.id << ',' << fixed9(rec.arrival_time) << ',';
    if (!rec.token_times_ns.empty()) out << fixed9(rec.ttft());
    out << ',';
    if (rec.finished()) {
      out << fixed9(rec.finish_time()) << ',' << general(rec.per_token_latency()) << ','
          << fixed9(rec.max_waiting_time());
    } else {
      out << ",,";
    }
    out << ',' << rec.preemptions << ',' << rec.output_tokens << ','
        << (rec.dropped ? "dropped" : rec.finished() ? "finished" : "unfinished") << '\n';
  }
  return out.str();
}

}  // namespace rankserve
