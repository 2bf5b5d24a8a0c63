// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "oracles.h"
#include "rankserve/engine.h"
#include "rankserve/errors.h"

namespace rankserve {
namespace {

RunConfig fig1_config(Policy p) {
  RunConfig c;
  c.cost = cost_preset("fig1");
  c.scheduler.policy = p;
  c.scheduler.starvation_threshold = 0;
  return c;
}

RunConfig desk_config(Policy p) {
  RunConfig c;
  c.cost = cost_preset("desk");
  c.scheduler.policy = p;
  return c;
}

Trace lmsys_poisson(double rate, std::int64_t n, std::uint64_t seed) {
  auto pre = workload_preset("lmsys-like");
  return generate_poisson(rate, n, pre.dist, seed, pre.prompt);
}

Trace lmsys_burst(std::int64_t n, std::uint64_t seed) {
  auto pre = workload_preset("lmsys-like");
  return generate_burst(n, pre.dist, seed, pre.prompt);
}

std::vector<double> latencies(const SimResult& r) {
  std::vector<double> v;
  for (const auto& rec : r.requests) v.push_back(rec.per_token_latency());
  return v;
}

TEST(Fig1, FcfsAndRankingLatencies) {
  const auto t = testing::burst_of({10, 2, 1});
  const auto fcfs = run(t, nullptr, fig1_config(Policy::kFcfs));
  EXPECT_EQ(latencies(fcfs), (std::vector<double>{1.0, 6.0, 13.0}));
  EXPECT_NEAR(fcfs.metrics.mean_per_token_latency, 20.0 / 3.0, 1e-12);

  const auto oracle = Scorer::oracle();
  const auto ranked = run(t, &oracle, fig1_config(Policy::kRanking));
  EXPECT_EQ(latencies(ranked), (std::vector<double>{1.3, 1.5, 1.0}));
  EXPECT_NEAR(ranked.metrics.mean_per_token_latency, 3.8 / 3.0, 1e-12);
  EXPECT_EQ(*ranked.metrics.schedule_tau, 1.0);
  EXPECT_EQ(fcfs.requests[0].ttft(), 1.0);
}

TEST(Timing, PrefillDecodeAndSlope) {
  RunConfig c = desk_config(Policy::kFcfs);
  c.cost.decode_seconds_per_extra_request = 0.005;
  std::vector<Request> reqs(2);
  for (int i = 0; i < 2; ++i) {
    reqs[i].id = i;
    reqs[i].prompt_tokens = 10;
    reqs[i].true_output_tokens = 2;
  }
  const Trace t(reqs, {});
  const auto r = run(t, nullptr, c);
  // First iteration: prefill 2 x 10 x 0.1 ms, decode 25 + 5 ms.
  EXPECT_NEAR(r.requests[0].ttft(), 0.002 + 0.030, 1e-12);
  EXPECT_NEAR(r.requests[0].finish_time(), 0.002 + 0.060, 1e-12);
  EXPECT_EQ(r.metrics.iterations, 2);
  EXPECT_NEAR(r.metrics.prefill_seconds, 0.002, 1e-12);
}

TEST(Timing, IdleGapsJumpToNextArrival) {
  std::vector<Request> reqs(2);
  reqs[0].id = 0;
  reqs[1].id = 1;
  reqs[1].arrival_time = 100.0;
  const auto r = run(Trace(reqs, {}), nullptr, fig1_config(Policy::kFcfs));
  ASSERT_EQ(r.iterations.size(), 2u);
  EXPECT_EQ(r.iterations[1].start_ns, 100'000'000'000);
  EXPECT_EQ(r.requests[1].ttft(), 1.0);
}

TEST(Admission, OversizedRequestsAreDropped) {
  std::vector<Request> reqs(2);
  reqs[0].id = 0;
  reqs[0].prompt_tokens = 5;
  reqs[0].true_output_tokens = 10;
  reqs[1].id = 1;
  RunConfig c = fig1_config(Policy::kFcfs);
  c.cost.kv_token_budget = 12;
  const auto r = run(Trace(reqs, {}), nullptr, c);
  EXPECT_TRUE(r.requests[0].dropped);
  EXPECT_TRUE(r.requests[1].finished());
  EXPECT_EQ(r.metrics.dropped, 1u);
  EXPECT_EQ(r.metrics.finished, 1u);
}

TEST(Admission, KvPressurePreemptsAndRecomputes) {
  const auto t = lmsys_burst(300, 8);
  RunConfig c = desk_config(Policy::kRanking);
  c.cost.kv_token_budget = 4096;
  const auto oracle = Scorer::oracle();
  const auto r = run(t, &oracle, c);
  EXPECT_EQ(r.metrics.finished + r.metrics.dropped, t.size());
  EXPECT_GT(r.metrics.preemptions, 0);
  for (const auto& rec : r.requests) {
    EXPECT_TRUE(rec.finished() || rec.dropped);
  }
}

TEST(Stop, FinishedCountAndTimeLimit) {
  const auto t = lmsys_burst(200, 3);
  RunConfig c = desk_config(Policy::kFcfs);
  c.options.stop = parse_stop_condition("finished=20");
  auto r = run(t, nullptr, c);
  EXPECT_GE(r.metrics.finished, 20u);
  EXPECT_LT(r.metrics.finished, 200u);

  c.options.stop = parse_stop_condition("time=2.5");
  r = run(t, nullptr, c);
  EXPECT_GE(r.metrics.end_time, 2.5);
  EXPECT_LT(r.metrics.end_time, 2.5 + 0.2);

  EXPECT_THROW(parse_stop_condition("finished=0"), InvalidArgument);
  EXPECT_THROW(parse_stop_condition("time=-1"), InvalidArgument);
  EXPECT_THROW(parse_stop_condition("forever"), InvalidArgument);
  c.options.stop = parse_stop_condition("finished=201");
  EXPECT_THROW(run(t, nullptr, c), InvalidArgument);
  EXPECT_EQ(to_string(parse_stop_condition("finished=7")), "finished=7");
}

TEST(Config, ValidationAndHashing) {
  const auto t = testing::burst_of({3});
  EXPECT_THROW(run(t, nullptr, fig1_config(Policy::kRanking)), InvalidArgument);
  EXPECT_THROW(cost_preset("datacenter"), InvalidArgument);
  RunConfig bad = fig1_config(Policy::kFcfs);
  bad.cost.decode_seconds = -1.0;
  EXPECT_THROW(run(t, nullptr, bad), InvalidArgument);
  EXPECT_THROW(run(Trace{}, nullptr, fig1_config(Policy::kFcfs)), InvalidArgument);

  const auto c = desk_config(Policy::kRanking);
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  const auto a = Scorer::noisy_oracle(0.5, 1);
  const auto b = Scorer::noisy_oracle(0.5, 2);
  EXPECT_NE(config_hash(c, &a), config_hash(c, &b));
  EXPECT_EQ(config_hash(c, &a), config_hash(c, &a));
  EXPECT_THROW(config_from_json("{\"cost\":1}"), ParseError);
}

TEST(Determinism, RepeatedRunsAreByteIdentical) {
  const auto t = lmsys_poisson(6.0, 300, 4);
  const auto noisy = Scorer::noisy_oracle(0.7, 3);
  const auto c = desk_config(Policy::kRanking);
  const auto a = run(t, &noisy, c);
  const auto b = run(t, &noisy, c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(result_to_csv(a), result_to_csv(b));
  EXPECT_EQ(result_to_json(a), result_to_json(b));
  EXPECT_EQ(result_to_csv(a).rfind("# rankserve 0.1.0 config_hash=", 0), 0u);
}

class ReplayTest : public ::testing::TestWithParam<int> {};

TEST_P(ReplayTest, ReproducesResultExactly) {
  const auto t = lmsys_poisson(7.0, 250, 10 + GetParam());
  const auto po = Scorer::perception_only(15, 0.35, 1);
  const auto noisy = Scorer::noisy_oracle(0.5, 1);
  RunConfig c = desk_config(Policy::kRanking);
  const Scorer* s = &noisy;
  switch (GetParam()) {
    case 0: c.scheduler.policy = Policy::kFcfs; s = nullptr; break;
    case 1: c.scheduler.policy = Policy::kMlfq; c.scheduler.mlfq_base_quantum = 0.5; s = nullptr; break;
    case 2: s = &po; break;
    case 3: c.options.rescore = true; break;
    case 4: c.scheduler.starvation_threshold = 5; c.scheduler.priority_quantum = 3; break;
    case 5: c.cost.kv_token_budget = 3000; break;
    case 6: c.scheduler.policy = Policy::kSjf; s = nullptr; break;
  }
  const auto r = run(t, s, c);
  const auto log = parse_event_log(event_log_text(r));
  EXPECT_EQ(replay(log, t, s, c), r);
}

INSTANTIATE_TEST_SUITE_P(Policies, ReplayTest, ::testing::Range(0, 7));

TEST(Replay, DetectsForeignOrTamperedLogs) {
  const auto t = lmsys_poisson(7.0, 100, 2);
  const auto c = desk_config(Policy::kFcfs);
  const auto r = run(t, nullptr, c);
  const auto text = event_log_text(r);
  const auto log = parse_event_log(text);

  EXPECT_THROW(replay(log, lmsys_poisson(7.0, 100, 3), nullptr, c), ReplayMismatch);
  auto other = c;
  other.cost.decode_seconds = 0.03;
  EXPECT_THROW(replay(log, t, nullptr, other), ReplayMismatch);

  auto tampered = log;
  tampered.iterations[3].end_ns += 1;
  EXPECT_THROW(replay(tampered, t, nullptr, c), ReplayMismatch);
  tampered = log;
  std::swap(tampered.iterations[5].decision.run, tampered.iterations[9].decision.run);
  EXPECT_THROW(replay(tampered, t, nullptr, c), ReplayMismatch);
  tampered = log;
  tampered.iterations.pop_back();
  EXPECT_THROW(replay(tampered, t, nullptr, c), ReplayMismatch);

  EXPECT_THROW(parse_event_log(text.substr(0, text.size() / 2)), ParseError);
  EXPECT_THROW(parse_event_log("garbage"), ParseError);
}

// Ordering by total length equals ordering by remaining length whenever the
// started requests are exactly the shortest ones, as in a burst.
TEST(Reduction, RankingOracleMatchesSrtfOnBursts) {
  std::mt19937_64 rng(99);
  const auto oracle = Scorer::oracle();
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::int64_t> n(2, 60), len(1, 80), batch(1, 8);
    std::vector<std::int64_t> lengths(static_cast<std::size_t>(n(rng)));
    for (auto& l : lengths) l = len(rng);
    const auto t = testing::burst_of(lengths);
    RunConfig a = fig1_config(Policy::kRanking);
    a.cost.max_batch_requests = batch(rng);
    RunConfig b = a;
    b.scheduler.policy = Policy::kSrtf;
    const auto ra = run(t, &oracle, a);
    const auto rb = run(t, nullptr, b);
    ASSERT_EQ(ra.iterations, rb.iterations) << "trial " << trial;
  }
}

TEST(Reduction, RescoredOracleMatchesSrtfUnderArrivals) {
  const auto oracle = Scorer::oracle();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = lmsys_poisson(9.0, 150, 200 + seed);
    RunConfig a = desk_config(Policy::kRanking);
    a.scheduler.starvation_threshold = 0;
    a.cost.predictor_seconds_per_request = 0.0;
    a.options.rescore = true;
    RunConfig b = a;
    b.scheduler.policy = Policy::kSrtf;
    b.options.rescore = false;
    const auto ra = run(t, &oracle, a);
    const auto rb = run(t, nullptr, b);
    ASSERT_EQ(ra.iterations.size(), rb.iterations.size()) << seed;
    for (std::size_t i = 0; i < ra.iterations.size(); ++i) {
      ASSERT_EQ(ra.iterations[i].decision.run, rb.iterations[i].decision.run)
          << "seed " << seed << " iteration " << i;
    }
  }
}

TEST(PerceptionOnly, WarmupCostsMoreThanAFeatureScorer) {
  const auto t = lmsys_burst(200, 5);
  const auto po = Scorer::perception_only(15, 0.35, 1);
  const auto oracle = Scorer::oracle();
  const auto c = desk_config(Policy::kRanking);
  const auto with_po = run(t, &po, c);
  EXPECT_GT(with_po.metrics.prediction_overhead_seconds, 200 * 2e-3);
  EXPECT_EQ(run(t, &oracle, c).metrics.prediction_overhead_seconds, 0.0);

  auto discard = c;
  discard.options.po_reuse_warmup_tokens = false;
  const auto dropped = run(t, &po, discard);
  EXPECT_GT(dropped.metrics.end_time, with_po.metrics.end_time);
  for (const auto& rec : dropped.requests) {
    EXPECT_EQ(static_cast<std::int64_t>(rec.token_times_ns.size()), rec.output_tokens);
  }
}

TEST(Metrics, WaitingTimeAndTauFields) {
  const auto t = lmsys_burst(100, 6);
  const auto oracle = Scorer::oracle();
  auto c = desk_config(Policy::kRanking);
  c.scheduler.starvation_threshold = 0;
  const auto r = run(t, &oracle, c);
  EXPECT_EQ(*r.metrics.scorer_tau, 1.0);
  EXPECT_GT(*r.metrics.schedule_tau, 0.9);
  double worst = 0.0;
  for (const auto& rec : r.requests) {
    EXPECT_GE(rec.max_waiting_time(), rec.ttft());
    worst = std::max(worst, rec.max_waiting_time());
  }
  EXPECT_EQ(worst, r.metrics.max_max_waiting_time);
  EXPECT_FALSE(run(t, nullptr, desk_config(Policy::kFcfs)).metrics.scorer_tau);
}

}  // namespace
}  // namespace rankserve
