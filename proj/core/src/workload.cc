// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rankserve/workload.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rankserve/errors.h"
#include "util.h"

namespace rankserve {

namespace {

using nlohmann::json;

// Task categories ordered by typical output length. The first word of each
// vocabulary opens the prompt.
const std::vector<std::vector<std::string>>& category_vocab() {
  static const std::vector<std::vector<std::string>> vocab = {
      {"yes", "no", "true", "false", "quick", "check"},
      {"summarize", "brief", "tldr", "sentence", "gist", "short"},
      {"list", "items", "names", "top", "examples", "bullet"},
      {"explain", "describe", "why", "how", "concept", "reason"},
      {"write", "story", "essay", "article", "letter", "poem"},
      {"code", "function", "implement", "program", "class", "step", "detail"},
  };
  return vocab;
}

const std::vector<std::string>& filler_vocab() {
  static const std::vector<std::string> words = {
      "the",   "a",     "of",    "to",    "and",   "in",    "for",
      "on",    "with",  "about", "please", "me",   "my",    "this",
      "that",  "it",    "can",   "you",   "i",     "we",    "would",
      "like",  "some",  "what",  "data",  "people", "time", "world",
      "new",   "good",  "make",  "help",  "using", "from",  "into",
      "more",  "any",   "our",   "your",  "know",  "need",  "want",
      "think", "thing", "work",  "day",   "year",  "way"};
  return words;
}

// Equiprobable cut points of N(0, 1) into six categories.
constexpr double kCategoryCuts[] = {-0.967421566101701, -0.430727299295457,
                                    0.0, 0.430727299295457,
                                    0.967421566101701};

constexpr double kPromptSigma = 0.8;
constexpr std::int64_t kMinPromptTokens = 4;
constexpr std::int64_t kMaxSyntheticPromptTokens = 4096;

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

std::int64_t sample_length(const LengthDist& dist, std::mt19937_64& rng,
                           std::size_t index) {
  return std::visit(
      [&](const auto& d) -> std::int64_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformLength>) {
          return std::uniform_int_distribution<std::int64_t>(d.lo, d.hi)(rng);
        } else if constexpr (std::is_same_v<T, GeometricLength>) {
          return std::geometric_distribution<std::int64_t>(d.p)(rng) + 1;
        } else if constexpr (std::is_same_v<T, LogNormalLength>) {
          std::lognormal_distribution<double> ln(d.mu, d.sigma);
          double x = 0.0;
          do {
            x = ln(rng);
          } while (x > static_cast<double>(d.max_len));
          return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x)));
        } else {
          return d.lengths[index % d.lengths.size()];
        }
      },
      dist);
}

std::string synthesize_prompt(std::int64_t category, std::int64_t tokens,
                              std::mt19937_64& rng) {
  const auto& vocab = category_vocab()[static_cast<std::size_t>(category)];
  const auto& filler = filler_vocab();
  std::bernoulli_distribution topical(0.3);
  std::uniform_int_distribution<std::size_t> pick_topic(0, vocab.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, filler.size() - 1);

  std::string out = vocab.front();
  for (std::int64_t i = 1; i < tokens; ++i) {
    out += ' ';
    out += topical(rng) ? vocab[pick_topic(rng)] : filler[pick_filler(rng)];
  }
  const double question_p = category <= 3 ? 0.7 : 0.1;
  out += std::bernoulli_distribution(question_p)(rng) ? '?' : '.';
  return out;
}

// Builds requests from lengths and arrival times, synthesizing prompts whose
// task category tracks log length with correlation `prompt.signal`.
Trace build_trace(const std::vector<std::int64_t>& lengths,
                  const std::vector<double>& arrivals,
                  const PromptOptions& prompt, std::uint64_t seed,
                  TraceMetadata metadata) {
  const std::size_t n = lengths.size();
  double mean_log = 0.0;
  for (auto l : lengths) mean_log += std::log(static_cast<double>(l));
  mean_log /= static_cast<double>(std::max<std::size_t>(n, 1));
  double var_log = 0.0;
  for (auto l : lengths) {
    const double d = std::log(static_cast<double>(l)) - mean_log;
    var_log += d * d;
  }
  const double sd_log =
      n > 1 ? std::sqrt(var_log / static_cast<double>(n - 1)) : 0.0;

  auto rng = stream_rng(seed, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double mean_prompt = std::max(prompt.mean_prompt_tokens, 1.0);
  std::lognormal_distribution<double> prompt_len(
      std::log(mean_prompt) - kPromptSigma * kPromptSigma / 2.0, kPromptSigma);
  const double signal = std::clamp(prompt.signal, 0.0, 1.0);
  const double residual = std::sqrt(1.0 - signal * signal);

  std::vector<Request> requests;
  requests.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z =
        sd_log > 0.0
            ? (std::log(static_cast<double>(lengths[i])) - mean_log) / sd_log
            : 0.0;
    const double v = signal * z + residual * noise(rng);
    const std::int64_t category =
        std::upper_bound(std::begin(kCategoryCuts), std::end(kCategoryCuts), v) -
        std::begin(kCategoryCuts);
    const std::int64_t tokens = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(prompt_len(rng))), kMinPromptTokens,
        kMaxSyntheticPromptTokens);

    Request r;
    r.id = static_cast<RequestId>(i);
    r.arrival_time = arrivals[i];
    r.true_output_tokens = lengths[i];
    r.prompt = synthesize_prompt(category, tokens, rng);
    r.prompt_tokens = count_prompt_tokens(r.prompt);
    r.features = featurize(r.prompt);
    requests.push_back(std::move(r));
  }
  metadata.seed = seed;
  return Trace(std::move(requests), std::move(metadata));
}

std::vector<std::int64_t> draw_lengths(std::int64_t n, const LengthDist& dist,
                                       std::uint64_t seed) {
  auto rng = stream_rng(seed, 1);
  std::vector<std::int64_t> lengths(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    lengths[i] = sample_length(dist, rng, i);
  }
  return lengths;
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string s(util::trim(text));
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("invalid number for " + std::string(what) + ": '" +
                          s + "'");
  }
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
  const auto s = util::trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("invalid integer for " + std::string(what) + ": '" +
                          std::string(s) + "'");
  }
  return v;
}

}  // namespace

const char* to_string(RequestState state) {
  switch (state) {
    case RequestState::kWaiting:
      return "waiting";
    case RequestState::kRunning:
      return "running";
    case RequestState::kPreempted:
      return "preempted";
    case RequestState::kFinished:
      return "finished";
  }
  return "?";
}

Trace::Trace(std::vector<Request> requests, TraceMetadata metadata)
    : requests_(std::move(requests)), metadata_(std::move(metadata)) {
  std::set<RequestId> ids;
  for (std::size_t i = 0; i < requests_.size(); ++i) {
    const auto& r = requests_[i];
    if (!ids.insert(r.id).second) {
      throw InvalidArgument("duplicate request id " + std::to_string(r.id));
    }
    if (i > 0 && r.arrival_time < requests_[i - 1].arrival_time) {
      throw InvalidArgument("arrival times must be non-decreasing");
    }
    if (r.arrival_time < 0.0 || !std::isfinite(r.arrival_time)) {
      throw InvalidArgument("arrival time must be finite and non-negative");
    }
    if (r.true_output_tokens < 1 || r.prompt_tokens < 0) {
      throw InvalidArgument("request " + std::to_string(r.id) +
                            " has a non-positive length");
    }
  }
}

std::vector<std::int64_t> Trace::output_lengths() const {
  std::vector<std::int64_t> out;
  out.reserve(requests_.size());
  for (const auto& r : requests_) out.push_back(r.true_output_tokens);
  return out;
}

bool Trace::same_content(const Trace& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = requests_[i];
    const auto& b = other.requests_[i];
    if (a.id != b.id || a.arrival_time != b.arrival_time ||
        a.prompt_tokens != b.prompt_tokens ||
        a.true_output_tokens != b.true_output_tokens || a.prompt != b.prompt ||
        a.features != b.features) {
      return false;
    }
  }
  return true;
}

void validate(const LengthDist& dist) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformLength>) {
          if (d.lo < 1 || d.hi < d.lo) {
            throw InvalidArgument("uniform(a,b) needs 1 <= a <= b");
          }
        } else if constexpr (std::is_same_v<T, GeometricLength>) {
          if (!(d.p > 0.0 && d.p <= 1.0)) {
            throw InvalidArgument("geometric(p) needs 0 < p <= 1");
          }
        } else if constexpr (std::is_same_v<T, LogNormalLength>) {
          if (!std::isfinite(d.mu) || !(d.sigma > 0.0) || d.max_len < 1) {
            throw InvalidArgument(
                "lognormal(mu,sigma,max) needs finite mu, sigma > 0, max >= 1");
          }
          // Rejection sampling needs non-negligible mass below max_len.
          const double z = (std::log(static_cast<double>(d.max_len)) - d.mu) / d.sigma;
          if (z < -6.0) {
            throw InvalidArgument("lognormal mass below max_len is negligible");
          }
        } else {
          if (d.lengths.empty()) throw InvalidArgument("fixed() needs lengths");
          for (auto l : d.lengths) {
            if (l < 1) throw InvalidArgument("fixed lengths must be positive");
          }
        }
      },
      dist);
}

std::string to_string(const LengthDist& dist) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        std::ostringstream os;
        os.precision(17);
        if constexpr (std::is_same_v<T, UniformLength>) {
          os << "uniform(" << d.lo << "," << d.hi << ")";
        } else if constexpr (std::is_same_v<T, GeometricLength>) {
          os << "geometric(" << d.p << ")";
        } else if constexpr (std::is_same_v<T, LogNormalLength>) {
          os << "lognormal(" << d.mu << "," << d.sigma << "," << d.max_len << ")";
        } else {
          os << "fixed(";
          for (std::size_t i = 0; i < d.lengths.size(); ++i) {
            os << (i ? "," : "") << d.lengths[i];
          }
          os << ")";
        }
        return os.str();
      },
      dist);
}

LengthDist parse_length_dist(std::string_view text) {
  const auto t = util::trim(text);
  if (t == "sharegpt-like" || t == "lmsys-like") return workload_preset(t).dist;

  const auto open = t.find('(');
  if (open == std::string_view::npos || t.back() != ')') {
    throw InvalidArgument("unknown length distribution '" + std::string(t) + "'");
  }
  const auto name = util::trim(t.substr(0, open));
  const auto args = util::split(t.substr(open + 1, t.size() - open - 2), ',');

  LengthDist dist;
  if (name == "uniform" && args.size() == 2) {
    dist = UniformLength{parse_int(args[0], "uniform a"),
                         parse_int(args[1], "uniform b")};
  } else if (name == "geometric" && args.size() == 1) {
    dist = GeometricLength{parse_double(args[0], "geometric p")};
  } else if (name == "lognormal" && (args.size() == 2 || args.size() == 3)) {
    LogNormalLength d{parse_double(args[0], "lognormal mu"),
                      parse_double(args[1], "lognormal sigma"), 2048};
    if (args.size() == 3) d.max_len = parse_int(args[2], "lognormal max");
    dist = d;
  } else if (name == "fixed" && !args.empty()) {
    FixedLengths d;
    for (const auto& a : args) d.lengths.push_back(parse_int(a, "fixed length"));
    dist = d;
  } else {
    throw InvalidArgument("unknown length distribution '" + std::string(t) + "'");
  }
  validate(dist);
  return dist;
}

WorkloadPreset workload_preset(std::string_view name) {
  // Output means differ by ~100 tokens; prompt means 240 vs 85.
  if (name == "sharegpt-like") {
    return {LogNormalLength{5.3, 0.9, 2048}, PromptOptions{240.0, 0.8}};
  }
  if (name == "lmsys-like") {
    return {LogNormalLength{4.8, 1.0, 2048}, PromptOptions{85.0, 0.8}};
  }
  throw InvalidArgument("unknown workload preset '" + std::string(name) + "'");
}

GeneratorSpec parse_generator_spec(std::string_view text) {
  const auto t = util::trim(text);
  const auto colon = t.find(':');
  const auto kind = util::trim(t.substr(0, colon));
  GeneratorSpec spec;
  if (kind == "poisson") {
    spec.kind = GeneratorSpec::Kind::kPoisson;
  } else if (kind == "burst") {
    spec.kind = GeneratorSpec::Kind::kBurst;
  } else {
    throw InvalidArgument("generator must start with poisson: or burst:");
  }

  bool have_n = false;
  bool have_rate = false;
  bool have_prompt = false;
  bool have_signal = false;
  std::optional<WorkloadPreset> preset;
  PromptOptions prompt;
  if (colon != std::string_view::npos) {
    for (const auto& item : util::split(t.substr(colon + 1), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw InvalidArgument("generator option needs key=value: '" + item + "'");
      }
      const auto key = util::trim(std::string_view(item).substr(0, eq));
      const auto value = util::trim(std::string_view(item).substr(eq + 1));
      if (key == "rate") {
        spec.rate = parse_double(value, "rate");
        have_rate = true;
      } else if (key == "n") {
        spec.n = parse_int(value, "n");
        have_n = true;
      } else if (key == "dist") {
        if (value == "sharegpt-like" || value == "lmsys-like") {
          preset = workload_preset(value);
          spec.dist = preset->dist;
        } else {
          spec.dist = parse_length_dist(value);
        }
      } else if (key == "seed") {
        spec.seed = static_cast<std::uint64_t>(parse_int(value, "seed"));
      } else if (key == "signal") {
        prompt.signal = parse_double(value, "signal");
        have_signal = true;
      } else if (key == "prompt") {
        prompt.mean_prompt_tokens = parse_double(value, "prompt");
        have_prompt = true;
      } else {
        throw InvalidArgument("unknown generator option '" + std::string(key) + "'");
      }
    }
  }
  spec.prompt = preset ? preset->prompt : PromptOptions{};
  if (have_prompt) spec.prompt.mean_prompt_tokens = prompt.mean_prompt_tokens;
  if (have_signal) spec.prompt.signal = prompt.signal;

  if (!have_n || spec.n <= 0) throw InvalidArgument("generator needs n > 0");
  if (spec.kind == GeneratorSpec::Kind::kPoisson &&
      (!have_rate || !(spec.rate > 0.0))) {
    throw InvalidArgument("poisson generator needs rate > 0");
  }
  validate(spec.dist);
  return spec;
}

std::string to_string(const GeneratorSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  if (spec.kind == GeneratorSpec::Kind::kPoisson) {
    os << "poisson:rate=" << spec.rate << ",";
  } else {
    os << "burst:";
  }
  os << "n=" << spec.n << ",dist=" << to_string(spec.dist)
     << ",seed=" << spec.seed << ",signal=" << spec.prompt.signal
     << ",prompt=" << spec.prompt.mean_prompt_tokens;
  return os.str();
}

Trace generate(const GeneratorSpec& spec) {
  if (spec.kind == GeneratorSpec::Kind::kPoisson) {
    return generate_poisson(spec.rate, spec.n, spec.dist, spec.seed, spec.prompt);
  }
  return generate_burst(spec.n, spec.dist, spec.seed, spec.prompt);
}

Trace generate_poisson(double rate, std::int64_t n, const LengthDist& dist,
                       std::uint64_t seed, const PromptOptions& prompt) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidArgument("poisson rate must be positive");
  }
  if (n <= 0) throw InvalidArgument("n must be positive");
  validate(dist);

  auto rng = stream_rng(seed, 2);
  std::exponential_distribution<double> gap(rate);
  std::vector<double> arrivals(static_cast<std::size_t>(n));
  double t = 0.0;
  for (auto& a : arrivals) {
    t += gap(rng);
    a = t;
  }
  GeneratorSpec spec{GeneratorSpec::Kind::kPoisson, rate, n, dist, seed, prompt};
  return build_trace(draw_lengths(n, dist, seed), arrivals, prompt, seed,
                     {"poisson", to_string(spec), seed});
}

Trace generate_burst(std::int64_t n, const LengthDist& dist, std::uint64_t seed,
                     const PromptOptions& prompt) {
  if (n <= 0) throw InvalidArgument("n must be positive");
  validate(dist);
  GeneratorSpec spec{GeneratorSpec::Kind::kBurst, 0.0, n, dist, seed, prompt};
  return build_trace(draw_lengths(n, dist, seed),
                     std::vector<double>(static_cast<std::size_t>(n), 0.0),
                     prompt, seed, {"burst", to_string(spec), seed});
}

Trace resample_output_lengths(const Trace& trace, double sigma,
                              std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be non-negative");
  std::vector<Request> out = trace.requests();
  for (auto& r : out) {
    auto rng = stream_rng(seed, 0x100000000ULL + static_cast<std::uint64_t>(r.id));
    const double eps = sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
    r.true_output_tokens = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(r.true_output_tokens) * std::exp(eps)));
  }
  auto meta = trace.metadata();
  meta.name += "+resampled";
  meta.seed = seed;
  return Trace(std::move(out), std::move(meta));
}

Trace parse_trace(std::string_view jsonl, std::string_view source,
                  std::uint64_t seed) {
  std::vector<Request> requests;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = util::trim(jsonl.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto fail = [&](const std::string& why) {
      return ParseError(std::string(source) + ":" + std::to_string(line_no) +
                        ": " + why);
    };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw fail("expected a JSON object");
    if (!obj.contains("prompt") || !obj["prompt"].is_string()) {
      throw fail("missing string field 'prompt'");
    }
    if (!obj.contains("output_tokens_length") ||
        !obj["output_tokens_length"].is_number_integer()) {
      throw fail("missing integer field 'output_tokens_length'");
    }
    const auto length = obj["output_tokens_length"].get<std::int64_t>();
    if (length <= 0) throw fail("output_tokens_length must be positive");

    Request r;
    r.id = static_cast<RequestId>(requests.size());
    if (obj.contains("id")) {
      if (!obj["id"].is_number_integer()) throw fail("id must be an integer");
      r.id = obj["id"].get<RequestId>();
    }
    r.prompt = obj["prompt"].get<std::string>();
    r.true_output_tokens = length;
    if (obj.contains("arrival_time")) {
      if (!obj["arrival_time"].is_number()) throw fail("arrival_time must be a number");
      r.arrival_time = obj["arrival_time"].get<double>();
      if (r.arrival_time < 0.0 || !std::isfinite(r.arrival_time)) {
        throw fail("arrival_time must be finite and non-negative");
      }
    }
    r.prompt_tokens = count_prompt_tokens(r.prompt);
    r.features = featurize(r.prompt);
    requests.push_back(std::move(r));
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_time < b.arrival_time;
                   });
  return Trace(std::move(requests), {"file", std::string(source), seed});
}

Trace load_trace(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trace file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str(), path.string(), seed);
}

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  for (const auto& r : trace.requests()) {
    json obj;
    obj["id"] = r.id;
    obj["prompt"] = r.prompt;
    obj["output_tokens_length"] = r.true_output_tokens;
    obj["arrival_time"] = r.arrival_time;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write trace file " + path.string());
  out << trace_to_jsonl(trace);
}

std::uint64_t content_hash(const Trace& trace) {
  return util::fnv1a(trace_to_jsonl(trace));
}

}  // namespace rankserve
