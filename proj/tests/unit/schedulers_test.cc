// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <deque>

#include "rankserve/errors.h"
#include "rankserve/schedulers.h"

namespace rankserve {
namespace {

using Ids = std::vector<RequestId>;

// Owns requests and replays the state changes the engine would make.
struct Pool {
  std::deque<Request> reqs;

  Request& add(RequestId id, double arrival, std::int64_t prompt, std::int64_t out,
               std::optional<double> score = std::nullopt) {
    Request r;
    r.id = id;
    r.arrival_time = arrival;
    r.prompt_tokens = prompt;
    r.true_output_tokens = out;
    if (score) {
      r.score = *score;
      r.scored = true;
    }
    reqs.push_back(r);
    return reqs.back();
  }

  std::vector<Request*> queue() {
    std::vector<Request*> q;
    for (auto& r : reqs) {
      if (!r.finished()) q.push_back(&r);
    }
    return q;
  }

  Request& get(RequestId id) {
    for (auto& r : reqs) {
      if (r.id == id) return r;
    }
    throw std::out_of_range("no request");
  }

  BatchDecision step(Scheduler& s, const BatchLimits& limits = {}) {
    const auto q = queue();
    auto d = s.schedule_step(q, 0, limits);
    for (auto id : d.preempted) get(id).state = RequestState::kPreempted;
    std::vector<Request*> batch;
    for (auto id : d.run) {
      auto& r = get(id);
      r.state = RequestState::kRunning;
      if (++r.generated_tokens == r.true_output_tokens) r.state = RequestState::kFinished;
      batch.push_back(&r);
    }
    s.on_iteration(batch, 1'000'000'000);
    return d;
  }
};

SchedulerConfig config(Policy p, std::int64_t max_batch = 256) {
  SchedulerConfig c;
  c.policy = p;
  c.starvation_threshold = 0;
  c.max_batch_requests = max_batch;
  return c;
}

TEST(Config, ParsingAndValidation) {
  EXPECT_EQ(parse_policy("srtf"), Policy::kSrtf);
  EXPECT_STREQ(to_string(Policy::kMlfq), "mlfq");
  EXPECT_THROW(parse_policy("lottery"), InvalidArgument);
  SchedulerConfig c;
  c.starvation_threshold = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SchedulerConfig{};
  c.priority_quantum = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.starvation_threshold = 0;  // quantum unused once disabled
  EXPECT_NO_THROW(c.validate());
  c = SchedulerConfig{};
  c.mlfq_growth_rate = 1.0;
  EXPECT_THROW(Scheduler{c}, InvalidArgument);
}

TEST(Memory, FootprintAndQuantum) {
  Request r;
  r.prompt_tokens = 10;
  r.true_output_tokens = 50;
  r.generated_tokens = 7;
  EXPECT_EQ(kv_footprint(r, false), 18);
  EXPECT_EQ(kv_footprint(r, true), 60);
  SchedulerConfig c;
  EXPECT_EQ(mlfq_quantum_ns(c, 0), 16'000'000'000);
  EXPECT_EQ(mlfq_quantum_ns(c, 3), 128'000'000'000);
}

TEST(Fcfs, ArrivalOrderUnderBatchLimit) {
  Pool p;
  p.add(2, 0.5, 1, 5);
  p.add(0, 0.0, 1, 5);
  p.add(1, 0.0, 1, 5);
  Scheduler s(config(Policy::kFcfs, 2));
  EXPECT_EQ(p.step(s).run, (Ids{0, 1}));
}

TEST(Fcfs, KvFirstFitSkipsWhatDoesNotFit) {
  Pool p;
  p.add(0, 0.0, 5, 10);   // needs 6
  p.add(1, 0.1, 15, 10);  // needs 16
  p.add(2, 0.2, 3, 10);   // needs 4
  Scheduler s(config(Policy::kFcfs));
  EXPECT_EQ(p.step(s, {100, 20}).run, (Ids{0, 2}));
}

TEST(Ranking, PreemptsForShorterArrival) {
  Pool p;
  p.add(0, 0.0, 1, 100, 10.0);
  Scheduler s(config(Policy::kRanking, 1));
  EXPECT_EQ(p.step(s).run, (Ids{0}));
  p.add(1, 1.0, 1, 5, 2.0);
  const auto d = p.step(s);
  EXPECT_EQ(d.run, (Ids{1}));
  EXPECT_EQ(d.preempted, (Ids{0}));
  EXPECT_EQ(p.get(0).state, RequestState::kPreempted);
}

TEST(Ranking, WithoutPreemptionRunningRequestsStay) {
  Pool p;
  p.add(0, 0.0, 1, 100, 10.0);
  auto cfg = config(Policy::kRanking, 1);
  cfg.preemption = false;
  Scheduler s(cfg);
  p.step(s);
  p.add(1, 1.0, 1, 5, 2.0);
  const auto d = p.step(s);
  EXPECT_EQ(d.run, (Ids{0}));
  EXPECT_TRUE(d.preempted.empty());
}

TEST(Ranking, TiesBreakByArrivalThenId) {
  Pool p;
  p.add(5, 0.0, 1, 9, 3.0);
  p.add(4, 0.0, 1, 9, 3.0);
  p.add(1, 0.5, 1, 9, 3.0);
  p.add(9, 0.0, 1, 9, 1.0);
  Scheduler s(config(Policy::kRanking));
  EXPECT_EQ(p.step(s).run, (Ids{9, 4, 5, 1}));
}

TEST(Ranking, UnscoredRequestsNeedWarmupMode) {
  Pool p;
  p.add(0, 0.0, 1, 9, 1.0);
  p.add(1, 0.1, 1, 9);
  Scheduler s(config(Policy::kRanking));
  EXPECT_THROW(p.step(s), InvalidArgument);
  s.set_warmup_mode(true);
  EXPECT_EQ(p.step(s).run, (Ids{1, 0}));
}

TEST(Starvation, PromoteAfterThresholdDemoteAfterQuantum) {
  Pool p;
  p.add(0, 0.0, 1, 100, 1.0);
  p.add(1, 0.0, 1, 100, 5.0);
  auto cfg = config(Policy::kRanking, 1);
  cfg.starvation_threshold = 3;
  cfg.priority_quantum = 2;
  Scheduler s(cfg);
  EXPECT_EQ(p.step(s).run, (Ids{0}));
  EXPECT_EQ(p.step(s).run, (Ids{0}));
  auto d = p.step(s);
  EXPECT_EQ(d.run, (Ids{0}));
  EXPECT_EQ(d.promoted, (Ids{1}));
  EXPECT_TRUE(p.get(1).priority);

  d = p.step(s);
  EXPECT_EQ(d.run, (Ids{1}));
  EXPECT_EQ(d.preempted, (Ids{0}));
  EXPECT_EQ(p.get(1).quantum, 1);
  d = p.step(s);
  EXPECT_EQ(d.run, (Ids{1}));
  EXPECT_EQ(d.demoted, (Ids{1}));
  EXPECT_FALSE(p.get(1).priority);
  EXPECT_EQ(p.step(s).run, (Ids{0}));
}

TEST(Starvation, ThresholdZeroNeverPromotes) {
  Pool p;
  p.add(0, 0.0, 1, 1000, 1.0);
  p.add(1, 0.0, 1, 1000, 5.0);
  Scheduler s(config(Policy::kRanking, 1));
  for (int i = 0; i < 500; ++i) {
    const auto d = p.step(s);
    ASSERT_EQ(d.run, (Ids{0}));
    ASSERT_TRUE(d.promoted.empty());
  }
  EXPECT_EQ(p.get(1).starvation_count, 500);
}

TEST(Sjf, NonPreemptiveByTotalLength) {
  Pool p;
  p.add(0, 0.0, 1, 50);
  Scheduler s(config(Policy::kSjf, 1));
  EXPECT_FALSE(s.preemptive());
  p.step(s);
  p.add(1, 1.0, 1, 2);
  const auto d = p.step(s);
  EXPECT_EQ(d.run, (Ids{0}));
  EXPECT_TRUE(d.preempted.empty());
}

TEST(Sjf, ReservesFullFootprint) {
  Pool p;
  p.add(0, 0.0, 10, 50);  // 60 reserved
  p.add(1, 0.0, 10, 20);  // 30 reserved
  Scheduler s(config(Policy::kSjf));
  EXPECT_EQ(p.step(s, {100, 70}).run, (Ids{1}));
}

TEST(Srtf, OrdersByRemainingTokens) {
  Pool p;
  auto& a = p.add(0, 0.0, 1, 10);
  a.generated_tokens = 8;
  a.state = RequestState::kRunning;
  p.add(1, 0.0, 1, 5);
  Scheduler s(config(Policy::kSrtf, 1));
  EXPECT_EQ(p.step(s).run, (Ids{0}));
}

TEST(Mlfq, CohortDemotesTogetherAfterQuantum) {
  Pool p;
  for (RequestId i = 0; i < 4; ++i) p.add(i, 0.0, 1, 1000);
  auto cfg = config(Policy::kMlfq);
  cfg.mlfq_base_quantum = 3.0;
  Scheduler s(cfg);
  // One-second iterations: level 0 lasts 3 of them.
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(p.step(s).demoted.empty());
  const auto d = p.step(s);
  EXPECT_EQ(d.demoted, (Ids{0, 1, 2, 3}));
  for (auto& r : p.reqs) EXPECT_EQ(r.mlfq_level, 1);
  // Level 1 lasts six.
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(p.step(s).demoted.empty());
  EXPECT_EQ(p.step(s).demoted.size(), 4u);
}

TEST(Mlfq, NewArrivalsOutrankDemoted) {
  Pool p;
  p.add(0, 0.0, 1, 1000);
  auto cfg = config(Policy::kMlfq, 1);
  cfg.mlfq_base_quantum = 2.0;
  Scheduler s(cfg);
  p.step(s);
  p.step(s);
  p.add(1, 5.0, 1, 1000);
  const auto d = p.step(s);
  EXPECT_EQ(d.demoted, (Ids{0}));
  EXPECT_EQ(d.run, (Ids{1}));
}

}  // namespace
}  // namespace rankserve
