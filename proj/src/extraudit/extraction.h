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

// Extraction probabilities for a single target example.
//
// A target z = prefix || suffix has generation probability p_z under a
// (model, sampling scheme) pair: the product of the scheme-transformed
// conditional probabilities of every suffix token, obtained from one scoring
// pass over the example. The chance of producing the suffix at least once in
// n independent generations is 1 - (1 - p_z)^n, so an example is
// (n, p)-extractable iff n >= log(1 - p) / log(1 - p_z).
//
// Sampling-based estimates (exact or within a Hamming radius) and a
// brute-force enumeration oracle for tiny vocabularies live here as well.

#ifndef EXTRAUDIT_EXTRACTION_H_
#define EXTRAUDIT_EXTRACTION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "extraudit/core.h"
#include "extraudit/model_sources.h"

namespace extraudit {

// Per-position scheme log-probabilities of `targets`, one distribution each.
SuffixProbability SuffixFromDistributions(
    const std::string& example_id, const SamplingScheme& scheme,
    std::span<const NextTokenDistribution> dists,
    std::span<const TokenId> targets);

// One scoring pass over prefix || suffix.
SuffixProbability SuffixLogProb(const ModelSource& source,
                                const TargetExample& example,
                                const SamplingScheme& scheme);

// Smallest n >= 1 with 1 - (1 - p_z)^n >= p; nullopt when p_z == 0.
std::optional<std::uint64_t> NForP(double p_z, double p);

// 1 - (1 - p_z)^n. Uses the log1p/expm1 form when p_z < 1e-6 or n > 1e6.
double PForN(double p_z, std::uint64_t n);

// ceil(1 / p_z); throws kNotExtractable for p_z == 0.
std::uint64_t ExpectedQueries(double p_z);

bool IsNpExtractable(double p_z, const NpPoint& point);

std::size_t HammingDistance(std::span<const TokenId> a,
                            std::span<const TokenId> b);

// Autoregressive argmax decode of `length` tokens after `prefix`.
std::vector<TokenId> GreedyDecode(const ModelSource& source,
                                  std::span<const TokenId> prefix,
                                  std::size_t length);

// Draws suffix-length continuations of an example's prefix. Trial w uses
// the stream DeriveStream(seed, example_id, w), so any trial can be
// regenerated on its own. Sources with a native sampler are asked for all
// trials in one request instead.
class ContinuationSampler {
 public:
  ContinuationSampler(const ModelSource& source, const TargetExample& example,
                      const SamplingScheme& scheme, std::uint64_t seed);

  std::vector<TokenId> Sample(std::uint64_t trial);
  std::vector<std::vector<TokenId>> SampleAll(std::uint64_t trials);

 private:
  const NextTokenDistribution& Transformed(const std::vector<TokenId>& context);

  const ModelSource& source_;
  const TargetExample& example_;
  SamplingScheme scheme_;
  std::uint64_t seed_;
  std::map<std::vector<TokenId>, NextTokenDistribution> cache_;
};

struct EmpiricalEstimate {
  std::string example_id;
  SamplingScheme scheme;
  std::uint64_t trials = 0;
  std::uint64_t matches = 0;
  double hat_p_z = 0.0;
  std::size_t epsilon = 0;  // 0 = verbatim
  std::uint64_t seed = 0;
};

EmpiricalEstimate EstimateExtraction(const ModelSource& source,
                                     const TargetExample& example,
                                     const SamplingScheme& scheme,
                                     std::uint64_t trials,
                                     std::size_t epsilon, std::uint64_t seed);

// Counts for several radii over one shared sample set.
std::vector<EmpiricalEstimate> EstimateExtractionRadii(
    const ModelSource& source, const TargetExample& example,
    const SamplingScheme& scheme, std::uint64_t trials,
    std::span<const std::size_t> epsilons, std::uint64_t seed);

double EstimateToP(const EmpiricalEstimate& estimate, std::uint64_t n);

// Number of suffixes at exactly `epsilon` substitutions from a fixed one:
// C(suffix_len, epsilon) * vocab_size^epsilon.
boost::multiprecision::cpp_int HammingBallSize(std::uint64_t suffix_len,
                                               std::uint64_t vocab_size,
                                               std::uint64_t epsilon);

inline constexpr std::uint64_t kMaxEnumeration = 1'000'000;

// Sum of generation probabilities of every suffix within Hamming distance
// epsilon of the target, by full enumeration. Requires
// vocab_size^suffix_len <= kMaxEnumeration.
double ExactExtractionProb(const ModelSource& source,
                           const TargetExample& example,
                           const SamplingScheme& scheme, std::size_t epsilon);

struct SplitProbability {
  std::size_t prefix_len = 0;
  std::size_t suffix_len = 0;
  double total_logprob = 0.0;  // -inf when blocked
  std::optional<std::size_t> blocked_index;  // relative to the split suffix
  double p_z = 0.0;
};

struct SplitSweepResult {
  std::string example_id;
  SamplingScheme scheme;
  // Entry j is the log-probability of token j + 1 given tokens [0, j].
  std::vector<double> per_token_logprob;
  std::vector<SplitProbability> splits;
};

// Scores the whole example once and derives every split from the window
// sums of the per-token log-probabilities.
SplitSweepResult SplitSweep(
    const ModelSource& source, const TargetExample& example,
    const SamplingScheme& scheme,
    std::span<const std::pair<std::size_t, std::size_t>> splits);

// exp(-total_logprob / suffix_len); throws kUndefinedPerplexity if blocked.
double SuffixPerplexity(const SuffixProbability& sp);

}  // namespace extraudit

#endif  // EXTRAUDIT_EXTRACTION_H_
