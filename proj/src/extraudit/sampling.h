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

// Sampling-scheme transforms applied on top of a model's next-token
// distribution.
//
// Order of operations for truncating schemes: keep the top-k entries (or the
// smallest descending prefix whose cumulative mass reaches q), renormalize,
// then re-weight the retained natural-log probabilities with temperature T.
// Plain temperature sampling re-weights every nonzero token. Greedy keeps the
// argmax, ties resolved toward the smaller token id.
//
// A truncated input (tail_mass > 0) is accepted only when the listed entries
// determine the result: at least k entries for top-k, at least q listed mass
// for top-q, at least one entry for greedy. Temperature needs the full
// vocabulary.

#ifndef EXTRAUDIT_SAMPLING_H_
#define EXTRAUDIT_SAMPLING_H_

#include <optional>

#include "extraudit/core.h"

namespace extraudit {

// Slack on the cumulative-mass comparison that decides nucleus membership.
inline constexpr double kNucleusSlack = 1e-12;
// Tail mass tolerated by schemes that need the full vocabulary.
inline constexpr double kFullTailTolerance = 1e-9;

NextTokenDistribution TransformDistribution(const NextTokenDistribution& dist,
                                            const SamplingScheme& scheme);

// Probability of `token` under the scheme; 0 when truncation excludes it.
double TokenProbability(const NextTokenDistribution& dist,
                        const SamplingScheme& scheme, TokenId token);

// Natural-log variant; nullopt when the probability is exactly 0.
std::optional<double> TokenLogProbability(const NextTokenDistribution& dist,
                                          const SamplingScheme& scheme,
                                          TokenId token);

// Inverse-CDF draw over the descending-sorted transformed entries.
TokenId SampleToken(const NextTokenDistribution& dist,
                    const SamplingScheme& scheme, RngStream& stream);

// Same draw on an already transformed distribution.
TokenId SampleFromTransformed(const NextTokenDistribution& transformed,
                              RngStream& stream);

}  // namespace extraudit

#endif  // EXTRAUDIT_SAMPLING_H_
