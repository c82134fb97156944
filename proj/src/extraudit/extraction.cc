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

#include "extraudit/extraction.h"

#include <cmath>
#include <limits>

#include "extraudit/sampling.h"

namespace extraudit {
namespace {

// 1 - p_z is exact from here up, so the direct power form keeps full
// precision (and gives exact answers like 1 - 0.5^2).
constexpr double kDirectFormMinPz = 0.5;
constexpr std::size_t kSamplerCacheLimit = 4096;

void CheckProbability(double p_z) {
  if (!(p_z >= 0.0 && p_z <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "p_z must lie in [0, 1], got " + FormatShortest(p_z));
  }
}

double UnionBound(double p_z, std::uint64_t n) {
  if (n == 0 || p_z == 0.0) return 0.0;
  if (p_z == 1.0) return 1.0;
  if (p_z < kDirectFormMinPz) {
    return -std::expm1(static_cast<double>(n) * std::log1p(-p_z));
  }
  return 1.0 - std::pow(1.0 - p_z, static_cast<double>(n));
}

}  // namespace

SuffixProbability SuffixFromDistributions(
    const std::string& example_id, const SamplingScheme& scheme,
    std::span<const NextTokenDistribution> dists,
    std::span<const TokenId> targets) {
  if (dists.size() != targets.size()) {
    throw Error(ErrorCode::kInternal, "distribution/target count mismatch");
  }
  SuffixProbability sp;
  sp.example_id = example_id;
  sp.scheme = scheme;
  sp.per_token_logprob.reserve(targets.size());
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::optional<double> lp =
        TokenLogProbability(dists[i], scheme, targets[i]);
    if (!lp.has_value()) {
      sp.per_token_logprob.push_back(-INFINITY);
      if (!sp.blocked_index) sp.blocked_index = i;
      continue;
    }
    sp.per_token_logprob.push_back(*lp);
    total += *lp;
  }
  if (sp.blocked_index) {
    sp.total_logprob = -INFINITY;
    sp.p_z = 0.0;
  } else {
    sp.total_logprob = total;
    sp.p_z = std::exp(total);
  }
  return sp;
}

SuffixProbability SuffixLogProb(const ModelSource& source,
                                const TargetExample& example,
                                const SamplingScheme& scheme) {
  example.Validate();
  example.CheckVocabulary(source.vocab_size());
  scheme.Validate();
  const std::vector<NextTokenDistribution> dists =
      source.ScoreContinuation(example.prefix(), example.suffix());
  return SuffixFromDistributions(example.id, scheme, dists, example.suffix());
}

double PForN(double p_z, std::uint64_t n) {
  CheckProbability(p_z);
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  return UnionBound(p_z, n);
}

std::optional<std::uint64_t> NForP(double p_z, double p) {
  CheckProbability(p_z);
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "p must lie in (0, 1), got " + FormatShortest(p));
  }
  if (p_z == 0.0) return std::nullopt;
  if (p_z == 1.0) return 1;
  const double ratio = std::log1p(-p) / std::log1p(-p_z);
  if (!(ratio < 1.8e19)) return std::nullopt;  // beyond any query budget
  std::uint64_t n =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(ratio)));
  // The closed form can land one step off after rounding; settle on the
  // minimal n as judged by the same evaluation PForN uses.
  while (UnionBound(p_z, n) < p) ++n;
  while (n > 1 && UnionBound(p_z, n - 1) >= p) --n;
  return n;
}

std::uint64_t ExpectedQueries(double p_z) {
  CheckProbability(p_z);
  if (p_z == 0.0) {
    throw Error(ErrorCode::kNotExtractable,
                "p_z = 0: the suffix is never generated");
  }
  const double n = std::ceil(1.0 / p_z);
  if (!(n < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(n);
}

bool IsNpExtractable(double p_z, const NpPoint& point) {
  return PForN(p_z, point.n) >= point.p;
}

std::size_t HammingDistance(std::span<const TokenId> a,
                            std::span<const TokenId> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "Hamming distance needs equal-length sequences");
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::vector<TokenId> GreedyDecode(const ModelSource& source,
                                  std::span<const TokenId> prefix,
                                  std::size_t length) {
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  std::vector<TokenId> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const NextTokenDistribution dist = source.NextDistribution(context);
    if (dist.entries().empty()) {
      throw Error(ErrorCode::kInsufficientCoverage, "no listed tokens");
    }
    out.push_back(dist.entries().front().token);
    context.push_back(out.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling-based estimates

ContinuationSampler::ContinuationSampler(const ModelSource& source,
                                         const TargetExample& example,
                                         const SamplingScheme& scheme,
                                         std::uint64_t seed)
    : source_(source), example_(example), scheme_(scheme), seed_(seed) {
  example_.Validate();
  example_.CheckVocabulary(source_.vocab_size());
  scheme_.Validate();
}

const NextTokenDistribution& ContinuationSampler::Transformed(
    const std::vector<TokenId>& context) {
  if (auto it = cache_.find(context); it != cache_.end()) return it->second;
  NextTokenDistribution dist =
      TransformDistribution(source_.NextDistribution(context), scheme_);
  if (cache_.size() >= kSamplerCacheLimit) cache_.clear();
  return cache_.emplace(context, std::move(dist)).first->second;
}

std::vector<TokenId> ContinuationSampler::Sample(std::uint64_t trial) {
  RngStream stream = DeriveStream(seed_, example_.id, trial);
  if (source_.HasNativeSampler()) {
    return source_
        .Generate(example_.prefix(), example_.suffix_len, 1, scheme_,
                  stream.key())
        .front();
  }
  std::vector<TokenId> context(example_.prefix().begin(),
                               example_.prefix().end());
  for (std::size_t i = 0; i < example_.suffix_len; ++i) {
    context.push_back(SampleFromTransformed(Transformed(context), stream));
  }
  return std::vector<TokenId>(context.end() - static_cast<std::ptrdiff_t>(
                                                  example_.suffix_len),
                              context.end());
}

std::vector<std::vector<TokenId>> ContinuationSampler::SampleAll(
    std::uint64_t trials) {
  if (source_.HasNativeSampler()) {
    return source_.Generate(example_.prefix(), example_.suffix_len, trials,
                            scheme_, DeriveStream(seed_, example_.id, 0).key());
  }
  std::vector<std::vector<TokenId>> out;
  out.reserve(trials);
  for (std::uint64_t w = 0; w < trials; ++w) out.push_back(Sample(w));
  return out;
}

std::vector<EmpiricalEstimate> EstimateExtractionRadii(
    const ModelSource& source, const TargetExample& example,
    const SamplingScheme& scheme, std::uint64_t trials,
    std::span<const std::size_t> epsilons, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  for (std::size_t eps : epsilons) {
    if (eps > example.suffix_len) {
      throw Error(ErrorCode::kInvalidArgument,
                  "epsilon " + std::to_string(eps) + " exceeds suffix_len " +
                      std::to_string(example.suffix_len));
    }
  }
  ContinuationSampler sampler(source, example, scheme, seed);
  std::vector<std::uint64_t> matches(epsilons.size(), 0);
  auto tally = [&](std::span<const TokenId> generated) {
    const std::size_t d = HammingDistance(generated, example.suffix());
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      matches[i] += d <= epsilons[i];
    }
  };
  if (source.HasNativeSampler()) {
    for (const auto& seq : sampler.SampleAll(trials)) tally(seq);
  } else {
    for (std::uint64_t w = 0; w < trials; ++w) tally(sampler.Sample(w));
  }
  std::vector<EmpiricalEstimate> out;
  out.reserve(epsilons.size());
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    out.push_back({example.id, scheme, trials, matches[i],
                   static_cast<double>(matches[i]) / static_cast<double>(trials),
                   epsilons[i], seed});
  }
  return out;
}

EmpiricalEstimate EstimateExtraction(const ModelSource& source,
                                     const TargetExample& example,
                                     const SamplingScheme& scheme,
                                     std::uint64_t trials,
                                     std::size_t epsilon, std::uint64_t seed) {
  const std::size_t eps[] = {epsilon};
  return EstimateExtractionRadii(source, example, scheme, trials, eps, seed)
      .front();
}

double EstimateToP(const EmpiricalEstimate& estimate, std::uint64_t n) {
  return PForN(estimate.hat_p_z, n);
}

boost::multiprecision::cpp_int HammingBallSize(std::uint64_t suffix_len,
                                               std::uint64_t vocab_size,
                                               std::uint64_t epsilon) {
  if (epsilon > suffix_len) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon exceeds suffix_len");
  }
  if (vocab_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size must be >= 1");
  }
  using boost::multiprecision::cpp_int;
  cpp_int binom = 1;
  for (std::uint64_t i = 0; i < epsilon; ++i) {
    binom *= suffix_len - i;
    binom /= i + 1;
  }
  return binom * boost::multiprecision::pow(cpp_int(vocab_size),
                                            static_cast<unsigned>(epsilon));
}

// ---------------------------------------------------------------------------
// Enumeration oracle

namespace {

struct Enumerator {
  const ModelSource& source;
  const SamplingScheme& scheme;
  std::span<const TokenId> target;
  std::size_t epsilon;
  std::vector<TokenId> context;

  // Mass of continuations from this depth on that stay within the radius.
  double Visit(std::size_t depth, std::size_t mismatches) {
    if (depth == target.size()) return 1.0;
    const NextTokenDistribution step =
        TransformDistribution(source.NextDistribution(context), scheme);
    double mass = 0.0;
    for (TokenId t = 0; t < step.vocab_size(); ++t) {
      const TokenProb* e = step.Find(t);
      if (e == nullptr) continue;  // probability 0
      const std::size_t m = mismatches + (t != target[depth]);
      if (m > epsilon) continue;
      context.push_back(t);
      mass += e->prob * Visit(depth + 1, m);
      context.pop_back();
    }
    return mass;
  }
};

}  // namespace

double ExactExtractionProb(const ModelSource& source,
                           const TargetExample& example,
                           const SamplingScheme& scheme, std::size_t epsilon) {
  example.Validate();
  example.CheckVocabulary(source.vocab_size());
  scheme.Validate();
  if (epsilon > example.suffix_len) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon exceeds suffix_len");
  }
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < example.suffix_len; ++i) {
    space *= source.vocab_size();
    if (space > kMaxEnumeration) {
      throw Error(ErrorCode::kInstanceTooLarge,
                  "vocab_size^suffix_len exceeds " +
                      std::to_string(kMaxEnumeration) + " sequences");
    }
  }
  Enumerator e{source, scheme, example.suffix(), epsilon,
               std::vector<TokenId>(example.prefix().begin(),
                                    example.prefix().end())};
  return e.Visit(0, 0);
}

// ---------------------------------------------------------------------------
// Split sweeps and perplexity

SplitSweepResult SplitSweep(
    const ModelSource& source, const TargetExample& example,
    const SamplingScheme& scheme,
    std::span<const std::pair<std::size_t, std::size_t>> splits) {
  example.Validate();
  example.CheckVocabulary(source.vocab_size());
  scheme.Validate();
  const std::size_t length = example.tokens.size();
  for (const auto& [a, k] : splits) {
    if (a < 1 || k < 1 || a + k > length) {
      throw Error(ErrorCode::kInvalidArgument,
                  "split (prefix=" + std::to_string(a) + ", suffix=" +
                      std::to_string(k) + ") does not fit example '" +
                      example.id + "' of length " + std::to_string(length));
    }
  }
  const std::span<const TokenId> all(example.tokens);
  const std::vector<NextTokenDistribution> dists =
      source.ScoreContinuation(all.first(1), all.subspan(1));

  SplitSweepResult result;
  result.example_id = example.id;
  result.scheme = scheme;
  result.per_token_logprob.reserve(length - 1);
  for (std::size_t j = 0; j + 1 < length; ++j) {
    const std::optional<double> lp =
        TokenLogProbability(dists[j], scheme, all[j + 1]);
    result.per_token_logprob.push_back(lp.value_or(-INFINITY));
  }
  for (const auto& [a, k] : splits) {
    SplitProbability split{a, k, 0.0, std::nullopt, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double lp = result.per_token_logprob[a - 1 + i];
      if (lp == -INFINITY) {
        if (!split.blocked_index) split.blocked_index = i;
        continue;
      }
      total += lp;
    }
    if (split.blocked_index) {
      split.total_logprob = -INFINITY;
    } else {
      split.total_logprob = total;
      split.p_z = std::exp(total);
    }
    result.splits.push_back(split);
  }
  return result;
}

double SuffixPerplexity(const SuffixProbability& sp) {
  if (sp.blocked()) {
    throw Error(ErrorCode::kUndefinedPerplexity,
                "suffix of '" + sp.example_id +
                    "' has probability 0 under the scheme");
  }
  if (sp.per_token_logprob.empty()) {
    throw Error(ErrorCode::kUndefinedPerplexity, "empty suffix");
  }
  return std::exp(-sp.total_logprob /
                  static_cast<double>(sp.per_token_logprob.size()));
}

}  // namespace extraudit
