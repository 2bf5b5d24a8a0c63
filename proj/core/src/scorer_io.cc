// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rankserve/errors.h"
#include "rankserve/predictors.h"
#include "util.h"

namespace rankserve {

namespace {

using nlohmann::json;

constexpr int kScorerFormatVersion = 1;

ScorerKind parse_kind(const std::string& name) {
  for (auto k : {ScorerKind::kOracle, ScorerKind::kCrossSeedOracle,
                 ScorerKind::kNoisyOracle, ScorerKind::kRankingModel,
                 ScorerKind::kClassifier, ScorerKind::kPerceptionOnly}) {
    if (name == to_string(k)) return k;
  }
  throw ParseError("unknown scorer kind '" + name + "'");
}

void check_net(const FeatureNet& n) {
  const std::size_t top = n.hidden > 0 ? n.hidden : n.input_dim;
  const bool ok = n.mean.size() == n.input_dim && n.inv_scale.size() == n.input_dim &&
                  n.w1.size() == n.hidden * n.input_dim && n.b1.size() == n.hidden &&
                  n.w2.size() == n.outputs * top && n.b2.size() == n.outputs;
  if (!ok) throw ParseError("scorer weight shapes are inconsistent");
}

}  // namespace

std::string scorer_to_json(const Scorer& s) {
  json j;
  j["format"] = "rankserve-scorer";
  j["version"] = kScorerFormatVersion;
  j["kind"] = to_string(s.kind);
  j["sigma"] = s.sigma;
  j["seed"] = s.seed;
  j["warmup_tokens"] = s.warmup_tokens;
  json refs = json::array();
  for (const auto& [id, len] : s.reference_lengths) refs.push_back({id, len});
  j["reference_lengths"] = refs;
  j["n_buckets"] = s.n_buckets;
  j["bucket_size"] = s.bucket_size;
  j["net"] = {{"input_dim", s.net.input_dim}, {"hidden", s.net.hidden},
              {"outputs", s.net.outputs},     {"mean", s.net.mean},
              {"inv_scale", s.net.inv_scale}, {"w1", s.net.w1},
              {"b1", s.net.b1},               {"w2", s.net.w2},
              {"b2", s.net.b2}};
  j["calibration"] = {{"score_quantiles", s.calibration.score_quantiles},
                      {"length_quantiles", s.calibration.length_quantiles},
                      {"log_residual_quantiles", s.calibration.log_residual_quantiles}};
  return j.dump() + "\n";
}

Scorer scorer_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "rankserve-scorer") throw ParseError("not a scorer file");
    if (j.at("version").get<int>() != kScorerFormatVersion) {
      throw ParseError("unsupported scorer format version " + j.at("version").dump());
    }
    Scorer s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.sigma = j.at("sigma").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.warmup_tokens = j.at("warmup_tokens").get<std::int64_t>();
    for (const auto& pair : j.at("reference_lengths")) {
      s.reference_lengths[pair.at(0).get<RequestId>()] = pair.at(1).get<std::int64_t>();
    }
    s.n_buckets = j.at("n_buckets").get<std::int64_t>();
    s.bucket_size = j.at("bucket_size").get<std::int64_t>();
    const auto& n = j.at("net");
    s.net.input_dim = n.at("input_dim").get<std::size_t>();
    s.net.hidden = n.at("hidden").get<std::size_t>();
    s.net.outputs = n.at("outputs").get<std::size_t>();
    s.net.mean = n.at("mean").get<std::vector<double>>();
    s.net.inv_scale = n.at("inv_scale").get<std::vector<double>>();
    s.net.w1 = n.at("w1").get<std::vector<double>>();
    s.net.b1 = n.at("b1").get<std::vector<double>>();
    s.net.w2 = n.at("w2").get<std::vector<double>>();
    s.net.b2 = n.at("b2").get<std::vector<double>>();
    const auto& c = j.at("calibration");
    s.calibration.score_quantiles = c.at("score_quantiles").get<std::vector<double>>();
    s.calibration.length_quantiles = c.at("length_quantiles").get<std::vector<double>>();
    s.calibration.log_residual_quantiles =
        c.at("log_residual_quantiles").get<std::vector<double>>();
    if (s.kind == ScorerKind::kRankingModel || s.kind == ScorerKind::kClassifier) {
      check_net(s.net);
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad scorer file: ") + e.what());
  }
}

void save_scorer(const Scorer& scorer, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scorer_to_json(scorer);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Scorer load_scorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open scorer file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return scorer_from_json(buf.str());
}

std::uint64_t scorer_hash(const Scorer& scorer) {
  return util::fnv1a(scorer_to_json(scorer));
}

}  // namespace rankserve
