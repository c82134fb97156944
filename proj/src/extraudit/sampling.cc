// Copyright 2026 The extraudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "extraudit/sampling.h"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace extraudit {
namespace {

using Kind = SamplingScheme::Kind;

[[noreturn]] void ThrowCoverage(const SamplingScheme& scheme,
                                const std::string& detail) {
  throw Error(ErrorCode::kInsufficientCoverage,
              "distribution is truncated and cannot support '" +
                  scheme.ToString() + "': " + detail +
                  "; the model source must supply more of the vocabulary");
}

// Number of leading (descending) entries the scheme keeps.
std::size_t RetainedCount(const NextTokenDistribution& dist,
                          const SamplingScheme& scheme) {
  const std::span<const TokenProb> entries = dist.entries();
  const bool truncated = dist.tail_mass() > 0.0;
  switch (scheme.kind) {
    case Kind::kGreedy:
      if (entries.empty()) ThrowCoverage(scheme, "no listed entries");
      return 1;
    case Kind::kTopK:
      if (entries.size() < scheme.k && truncated) {
        ThrowCoverage(scheme, std::to_string(entries.size()) +
                                  " listed entries < k");
      }
      return std::min<std::size_t>(scheme.k, entries.size());
    case Kind::kTopQ: {
      double cumulative = 0.0;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        cumulative += entries[i].prob;
        if (cumulative >= scheme.q - kNucleusSlack) return i + 1;
      }
      if (truncated) {
        ThrowCoverage(scheme, "listed mass " + FormatShortest(cumulative) +
                                  " < q");
      }
      return entries.size();
    }
    case Kind::kTemperature:
      if (dist.tail_mass() > kFullTailTolerance) {
        ThrowCoverage(scheme, "temperature sampling needs every token");
      }
      return entries.size();
  }
  return entries.size();
}

}  // namespace

NextTokenDistribution TransformDistribution(const NextTokenDistribution& dist,
                                            const SamplingScheme& scheme) {
  scheme.Validate();
  const std::size_t kept = RetainedCount(dist, scheme);
  const std::span<const TokenProb> entries = dist.entries().first(kept);

  std::vector<TokenProb> out;
  out.reserve(kept);
  if (scheme.kind == Kind::kGreedy) {
    out.push_back({entries.front().token, 0.0, 1.0});
    return NextTokenDistribution::FromLogProbs(std::move(out), std::nullopt,
                                               dist.vocab_size());
  }

  // Renormalizing and then dividing the log by T is the same as dividing
  // the original logs by T and normalizing once: the constant cancels.
  const double inv_t = 1.0 / scheme.temperature;
  double max_scaled = -INFINITY;
  for (const TokenProb& e : entries) {
    max_scaled = std::max(max_scaled, e.logprob * inv_t);
  }
  double sum = 0.0;
  for (const TokenProb& e : entries) {
    sum += std::exp(e.logprob * inv_t - max_scaled);
  }
  const double log_norm = max_scaled + std::log(sum);
  for (const TokenProb& e : entries) {
    out.push_back({e.token, e.logprob * inv_t - log_norm, 0.0});
  }
  return NextTokenDistribution::FromLogProbs(std::move(out), std::nullopt,
                                             dist.vocab_size());
}

std::optional<double> TokenLogProbability(const NextTokenDistribution& dist,
                                          const SamplingScheme& scheme,
                                          TokenId token) {
  if (token >= dist.vocab_size()) {
    throw Error(ErrorCode::kTokenOutOfRange,
                "token " + std::to_string(token) + " >= vocab_size " +
                    std::to_string(dist.vocab_size()));
  }
  if (scheme.kind == Kind::kTemperature && dist.tail_mass() > 0.0 &&
      dist.Find(token) == nullptr) {
    throw Error(ErrorCode::kAmbiguousZero,
                "token " + std::to_string(token) +
                    " is not listed and the tail mass is nonzero; its "
                    "temperature-scaled probability is unknown");
  }
  const NextTokenDistribution transformed = TransformDistribution(dist, scheme);
  const TokenProb* entry = transformed.Find(token);
  if (entry == nullptr) return std::nullopt;
  return entry->logprob;
}

double TokenProbability(const NextTokenDistribution& dist,
                        const SamplingScheme& scheme, TokenId token) {
  const std::optional<double> logprob =
      TokenLogProbability(dist, scheme, token);
  return logprob.has_value() ? std::exp(*logprob) : 0.0;
}

TokenId SampleFromTransformed(const NextTokenDistribution& transformed,
                              RngStream& stream) {
  const std::span<const TokenProb> entries = transformed.entries();
  const double u = stream.NextUniform();
  double cumulative = 0.0;
  for (const TokenProb& e : entries) {
    cumulative += e.prob;
    if (u < cumulative) return e.token;
  }
  // Rounding left the cumulative sum just below 1.
  return entries.back().token;
}

TokenId SampleToken(const NextTokenDistribution& dist,
                    const SamplingScheme& scheme, RngStream& stream) {
  return SampleFromTransformed(TransformDistribution(dist, scheme), stream);
}

}  // namespace extraudit
