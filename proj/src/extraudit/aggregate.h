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

// Dataset-level extraction rates: rate-vs-n curves at fixed p, the greedy
// baseline, the worst-case (n -> infinity) rate, repetition groups and
// train/test comparisons.

#ifndef EXTRAUDIT_AGGREGATE_H_
#define EXTRAUDIT_AGGREGATE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "extraudit/core.h"
#include "extraudit/model_sources.h"

namespace extraudit {

struct GreedyOutcome {
  std::string example_id;
  bool match = false;
};

struct ExtractionCurve {
  SamplingScheme scheme;
  std::vector<double> p_values;      // ascending
  std::vector<std::uint64_t> n_grid;  // ascending
  std::vector<std::vector<double>> rates;  // rates[p index][n index]
  double greedy_rate = 0.0;
  double max_rate = 0.0;  // fraction with p_z > 0
  std::size_t dataset_size = 0;

  double rate(std::size_t p_index, std::size_t n_index) const {
    return rates[p_index][n_index];
  }
};

inline constexpr double kDefaultPValues[] = {0.1, 0.5, 0.9, 0.999};
inline constexpr std::string_view kDefaultNGrid = "log:1:1000000:30";

// "log:<lo>:<hi>:<count>" (rounded log spacing, duplicates dropped) or a
// comma-separated list of positive integers.
std::vector<std::uint64_t> ParseNGrid(std::string_view spec);

double ExtractionRate(std::span<const SuffixProbability> results,
                      const NpPoint& point);

ExtractionCurve BuildCurve(std::span<const SuffixProbability> results,
                           std::span<const double> p_values,
                           std::span<const std::uint64_t> n_grid,
                           std::span<const GreedyOutcome> greedy);

// Smallest grid n whose rate at p reaches the greedy rate.
std::optional<std::uint64_t> CrossoverN(const ExtractionCurve& curve,
                                        double p);

// Throws kInvariantViolation naming the first violated monotonicity.
void CheckCurveInvariants(const ExtractionCurve& curve);

struct GroupCurve {
  std::optional<std::int64_t> repetitions;  // nullopt = default group
  ExtractionCurve curve;
  double gap = 0.0;  // max_rate - greedy_rate
};

struct GroupReport {
  std::vector<GroupCurve> groups;  // ascending repetitions, default last
  std::size_t missing_metadata = 0;
};

GroupReport BuildGroupReport(std::span<const SuffixProbability> results,
                             std::span<const GreedyOutcome> greedy,
                             std::span<const TargetExample> examples,
                             std::span<const double> p_values,
                             std::span<const std::uint64_t> n_grid);

struct ComparisonCell {
  double p = 0.0;
  std::uint64_t n = 0;
  double train_rate = 0.0;
  double test_rate = 0.0;
  // train/test; +inf when only test is 0, nullopt when both are 0.
  std::optional<double> ratio;
  bool test_at_least_train = false;
};

std::vector<ComparisonCell> CompareDatasets(const ExtractionCurve& train,
                                            const ExtractionCurve& test);

struct TheoryCheck {
  double p = 0.0;
  double empirical_fraction = 0.0;
  std::size_t examples = 0;
  std::size_t skipped_zero = 0;  // examples with p_z == 0 are not checked
  std::size_t skipped_budget = 0;  // n_for_p above max_samples
  double sigma = 0.0;            // sqrt(p(1-p)/examples)
  bool within_band = false;      // empirical >= p - 3 sigma
};

inline constexpr std::uint64_t kDefaultVerifyBudget = 1000000;

// For every example draws n_for_p(p_z, p) continuations and records whether
// the target suffix appeared at least once. Examples needing more than
// max_samples draws are skipped; selection depends only on p_z, so the
// remaining fraction is still an unbiased check.
TheoryCheck VerifyTheory(const ModelSource& source,
                         std::span<const TargetExample> examples,
                         const SamplingScheme& scheme, double p,
                         std::uint64_t seed,
                         std::uint64_t max_samples = kDefaultVerifyBudget);

// Curve CSV: header "p,n,rate,greedy_rate,max_rate,dataset_size,scheme".
std::string CurveToCsv(const ExtractionCurve& curve);

}  // namespace extraudit

#endif  // EXTRAUDIT_AGGREGATE_H_
