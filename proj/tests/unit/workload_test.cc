// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.h"
#include "rankserve/errors.h"
#include "rankserve/workload.h"

namespace rankserve {
namespace {

TEST(Generators, PoissonInterarrivalsAreExponential) {
  const double rate = 3.0;
  const auto t = generate_poisson(rate, 4000, UniformLength{1, 10}, 5);
  std::vector<double> gaps;
  double prev = 0.0;
  for (const auto& r : t.requests()) {
    gaps.push_back(r.arrival_time - prev);
    prev = r.arrival_time;
  }
  const double d = testing::ks_statistic(
      gaps, [rate](double x) { return 1.0 - std::exp(-rate * x); });
  // 1% critical value of the one-sample KS test.
  EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST(Generators, LogNormalLengthsFollowTruncatedCeilLaw) {
  const LogNormalLength dist{4.8, 1.0, 2048};
  const auto t = generate_burst(5000, dist, 9);
  const auto lengths = t.output_lengths();
  auto cdf = [&](double x) {
    return 0.5 * std::erfc(-(std::log(x) - dist.mu) / (dist.sigma * std::sqrt(2.0)));
  };
  const double mass = cdf(static_cast<double>(dist.max_len));
  for (std::int64_t k : {5, 20, 60, 121, 300, 800, 2000}) {
    const auto below = std::count_if(lengths.begin(), lengths.end(),
                                     [k](std::int64_t l) { return l <= k; });
    const double empirical = static_cast<double>(below) / 5000.0;
    // DKW: exceeding 0.03 has probability below 3e-4.
    EXPECT_NEAR(empirical, cdf(static_cast<double>(k)) / mass, 0.03) << "k=" << k;
  }
  for (auto l : lengths) {
    EXPECT_GE(l, 1);
    EXPECT_LE(l, 2048);
  }
}

TEST(Generators, BurstArrivesAtZeroWithUniqueIds) {
  const auto t = generate_burst(50, GeometricLength{0.1}, 2);
  ASSERT_EQ(t.size(), 50u);
  std::set<RequestId> ids;
  for (const auto& r : t.requests()) {
    EXPECT_EQ(r.arrival_time, 0.0);
    ids.insert(r.id);
  }
  EXPECT_EQ(ids.size(), 50u);
}

TEST(Generators, FixedLengthsCycle) {
  const auto t = generate_burst(5, FixedLengths{{10, 2, 1}}, 0);
  EXPECT_EQ(t.output_lengths(), (std::vector<std::int64_t>{10, 2, 1, 10, 2}));
}

TEST(Generators, SeedDeterminesTrace) {
  const auto spec = parse_generator_spec("poisson:rate=2,n=100,dist=lmsys-like,seed=7");
  EXPECT_TRUE(generate(spec).same_content(generate(spec)));
  auto other = spec;
  other.seed = 8;
  EXPECT_FALSE(generate(spec).same_content(generate(other)));
  EXPECT_EQ(content_hash(generate(spec)), content_hash(generate(spec)));
}

TEST(Generators, SpecParsing) {
  const auto s = parse_generator_spec("poisson:rate=2,n=1000,dist=lognormal(5.0,1.0),seed=7");
  EXPECT_EQ(s.kind, GeneratorSpec::Kind::kPoisson);
  EXPECT_EQ(s.rate, 2.0);
  EXPECT_EQ(s.n, 1000);
  EXPECT_EQ(s.seed, 7u);
  ASSERT_TRUE(std::holds_alternative<LogNormalLength>(s.dist));
  EXPECT_EQ(std::get<LogNormalLength>(s.dist).mu, 5.0);

  EXPECT_THROW(parse_generator_spec("uniform:n=3"), InvalidArgument);
  EXPECT_THROW(parse_generator_spec("burst:dist=lmsys-like"), InvalidArgument);
  EXPECT_THROW(parse_generator_spec("burst:n=3,colour=red"), InvalidArgument);
  EXPECT_THROW(parse_generator_spec("poisson:n=3,rate=0"), InvalidArgument);
  EXPECT_THROW(parse_length_dist("uniform(5,2)"), InvalidArgument);
  EXPECT_THROW(workload_preset("imagenet-like"), InvalidArgument);
}

TEST(Trace, RejectsBadOrderingAndDuplicates) {
  Request a;
  a.id = 1;
  a.arrival_time = 2.0;
  Request b;
  b.id = 2;
  b.arrival_time = 1.0;
  EXPECT_THROW(Trace({a, b}, {}), InvalidArgument);
  b.arrival_time = 3.0;
  b.id = 1;
  EXPECT_THROW(Trace({a, b}, {}), InvalidArgument);
}

TEST(Trace, JsonlRoundTrip) {
  const auto t = generate_poisson(1.5, 40, parse_length_dist("sharegpt-like"), 3);
  const auto path = std::filesystem::temp_directory_path() / "rankserve_roundtrip.jsonl";
  save_trace(t, path);
  const auto back = load_trace(path);
  EXPECT_TRUE(back.same_content(t));
  EXPECT_EQ(content_hash(back), content_hash(t));
  std::filesystem::remove(path);
}

TEST(Trace, ParseErrorsNameTheLine) {
  const std::string good = R"({"prompt": "hi there", "output_tokens_length": 4})";
  const auto t = parse_trace(good + "\n", "mem");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].arrival_time, 0.0);
  EXPECT_EQ(t[0].prompt_tokens, 2);

  try {
    parse_trace(good + "\n{\"prompt\": \"x\"}\n", "mem");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_trace("{not json\n", "mem"), ParseError);
  EXPECT_THROW(parse_trace(R"({"prompt": "x", "output_tokens_length": 0})", "mem"),
               ParseError);
  EXPECT_THROW(load_trace("/definitely/not/here.jsonl"), ParseError);
}

TEST(Trace, ResampleKeepsPromptsAndIds) {
  const auto t = generate_burst(200, parse_length_dist("lmsys-like"), 4);
  const auto same = resample_output_lengths(t, 0.0, 1);
  EXPECT_EQ(same.output_lengths(), t.output_lengths());
  const auto moved = resample_output_lengths(t, 0.5, 1);
  EXPECT_NE(moved.output_lengths(), t.output_lengths());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(moved[i].id, t[i].id);
    EXPECT_EQ(moved[i].prompt, t[i].prompt);
    EXPECT_GE(moved[i].true_output_tokens, 1);
  }
}

TEST(Features, FixedDimensionAndDeterministic) {
  const auto a = featurize("please write a long story about a dragon");
  EXPECT_EQ(a.size(), FeatureLayout::dimension());
  EXPECT_EQ(a, featurize("please write a long story about a dragon"));
  EXPECT_EQ(a[FeatureLayout::kTokenCount], 8.0);
  EXPECT_NE(a, featurize("translate: hello"));
  EXPECT_EQ(featurize("").size(), FeatureLayout::dimension());
  EXPECT_EQ(count_prompt_tokens("  a  b\tc\n"), 3);
}

}  // namespace
}  // namespace rankserve
