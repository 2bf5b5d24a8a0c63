// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rankserve {

using RequestId = std::int64_t;

enum class RequestState { kWaiting, kRunning, kPreempted, kFinished };

const char* to_string(RequestState state);

// One serving request. The static part (id .. features) comes from a trace;
// the runtime part is owned by whichever simulation copied the request.
struct Request {
  RequestId id = 0;
  double arrival_time = 0.0;  // seconds
  std::int64_t prompt_tokens = 1;
  // Hidden from every predictor except the oracles.
  std::int64_t true_output_tokens = 1;
  std::string prompt;
  std::vector<double> features;

  RequestState state = RequestState::kWaiting;
  std::int64_t generated_tokens = 0;
  // Lower score = predicted shorter generation. Only meaningful if `scored`.
  double score = 0.0;
  bool scored = false;
  bool priority = false;
  std::int64_t starvation_count = 0;
  std::int64_t quantum = 0;
  // Tokens produced while obtaining a perception-only self report. Equal to
  // generated_tokens when warmup tokens are reused.
  std::int64_t warmup_tokens = 0;
  int mlfq_level = 0;
  std::int64_t mlfq_level_runtime_ns = 0;

  std::int64_t remaining_tokens() const {
    return true_output_tokens - generated_tokens;
  }
  bool finished() const { return state == RequestState::kFinished; }
};

struct TraceMetadata {
  std::string name;
  // Generator spec string or source path.
  std::string source;
  std::uint64_t seed = 0;
};

// Requests ordered by arrival time with unique ids. Immutable once built.
class Trace {
 public:
  Trace() = default;
  // Throws InvalidArgument if arrivals decrease or ids repeat.
  Trace(std::vector<Request> requests, TraceMetadata metadata);

  const std::vector<Request>& requests() const { return requests_; }
  const TraceMetadata& metadata() const { return metadata_; }
  std::size_t size() const { return requests_.size(); }
  bool empty() const { return requests_.empty(); }
  const Request& operator[](std::size_t i) const { return requests_[i]; }

  std::vector<std::int64_t> output_lengths() const;

  // Static content only; runtime fields are ignored.
  bool same_content(const Trace& other) const;

 private:
  std::vector<Request> requests_;
  TraceMetadata metadata_;
};

// Output-length distributions. All produce integers >= 1.
struct UniformLength {
  std::int64_t lo = 1;
  std::int64_t hi = 1;
};
// Number of trials until first success, support {1, 2, ...}.
struct GeometricLength {
  double p = 0.5;
};
// ceil(X) with X ~ LogNormal(mu, sigma) conditioned on X <= max_len.
struct LogNormalLength {
  double mu = 5.0;
  double sigma = 1.0;
  std::int64_t max_len = 2048;
};
// Cycles through the given lengths in order.
struct FixedLengths {
  std::vector<std::int64_t> lengths;
};

using LengthDist =
    std::variant<UniformLength, GeometricLength, LogNormalLength, FixedLengths>;

void validate(const LengthDist& dist);
std::string to_string(const LengthDist& dist);
// Accepts uniform(a,b), geometric(p), lognormal(mu,sigma[,max]),
// fixed(l1,l2,...), sharegpt-like, lmsys-like.
LengthDist parse_length_dist(std::string_view text);

// Controls synthetic prompt text. `signal` in [0, 1] is the correlation
// between the prompt's task category and the log output length; 0 makes
// the prompt carry no information about length.
struct PromptOptions {
  double mean_prompt_tokens = 85.0;
  double signal = 0.8;
};

struct WorkloadPreset {
  LengthDist dist;
  PromptOptions prompt;
};
// `sharegpt-like` and `lmsys-like`. Throws InvalidArgument otherwise.
WorkloadPreset workload_preset(std::string_view name);

struct GeneratorSpec {
  enum class Kind { kPoisson, kBurst };
  Kind kind = Kind::kBurst;
  double rate = 0.0;  // requests / second, Poisson only
  std::int64_t n = 0;
  LengthDist dist = LogNormalLength{};
  std::uint64_t seed = 0;
  PromptOptions prompt;
};

// `poisson:rate=2,n=1000,dist=lognormal(5.0,1.0),seed=7`
// `burst:n=200,dist=lmsys-like,seed=3,signal=0.8,prompt=85`
GeneratorSpec parse_generator_spec(std::string_view text);
std::string to_string(const GeneratorSpec& spec);

Trace generate(const GeneratorSpec& spec);
Trace generate_poisson(double rate, std::int64_t n, const LengthDist& dist,
                       std::uint64_t seed, const PromptOptions& prompt = {});
Trace generate_burst(std::int64_t n, const LengthDist& dist,
                     std::uint64_t seed, const PromptOptions& prompt = {});

// Same requests with output lengths re-drawn as l * exp(N(0, sigma^2)),
// rounded and floored at 1. Models sampling the target LLM with another seed.
Trace resample_output_lengths(const Trace& trace, double sigma,
                              std::uint64_t seed);

// JSONL with `prompt` and `output_tokens_length` per line, optional
// `arrival_time`. Missing arrival times mean t = 0. Throws ParseError with
// the offending line number.
Trace load_trace(const std::filesystem::path& path, std::uint64_t seed = 0);
Trace parse_trace(std::string_view jsonl, std::string_view source,
                  std::uint64_t seed = 0);
void save_trace(const Trace& trace, const std::filesystem::path& path);
std::string trace_to_jsonl(const Trace& trace);

// Stable 64-bit digest of a trace's static content.
std::uint64_t content_hash(const Trace& trace);

// ---------------------------------------------------------------------------
// Prompt features.

inline constexpr std::size_t kMaxPromptTokens = 2048;
inline constexpr std::size_t kHashBuckets = 64;
inline constexpr std::uint64_t kFeatureHashSeed = 0x9e3779b97f4a7c15ULL;

// Keywords counted individually, in feature order.
const std::vector<std::string>& feature_keywords();

// Layout of the vector returned by featurize().
struct FeatureLayout {
  static constexpr std::size_t kTokenCount = 0;
  static constexpr std::size_t kLogTokenCount = 1;
  static constexpr std::size_t kCharCount = 2;
  static constexpr std::size_t kQuestionMark = 3;
  static constexpr std::size_t kKeywordBegin = 4;
  static std::size_t keyword_index(std::string_view keyword);
  static std::size_t hash_begin();
  static std::size_t dimension();
};

// Whitespace tokens of the prompt (no truncation).
std::int64_t count_prompt_tokens(std::string_view prompt);

// Deterministic fixed-length vector computed on the first kMaxPromptTokens
// whitespace tokens.
std::vector<double> featurize(std::string_view prompt);

}  // namespace rankserve
