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

#include "extraudit/aggregate.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "extraudit/extraction.h"

namespace extraudit {
namespace {

std::uint64_t ParseCount(std::string_view text, std::string_view spec) {
  std::uint64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() ||
      value < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad n-grid '" + std::string(spec) + "': '" +
                    std::string(text) + "' is not a positive integer");
  }
  return value;
}

std::vector<double> CheckedPValues(std::span<const double> p_values) {
  if (p_values.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "p grid is empty");
  }
  std::vector<double> ps(p_values.begin(), p_values.end());
  for (double p : ps) NpPoint::Make(1, p);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  return ps;
}

std::vector<std::uint64_t> CheckedNGrid(std::span<const std::uint64_t> grid) {
  if (grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "n grid is empty");
  }
  std::vector<std::uint64_t> ns(grid.begin(), grid.end());
  for (std::uint64_t n : ns) NpPoint::Make(n, 0.5);
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  return ns;
}

std::string Fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::uint64_t> ParseNGrid(std::string_view spec) {
  std::vector<std::uint64_t> grid;
  if (spec.rfind("log:", 0) == 0) {
    std::vector<std::string_view> parts;
    std::string_view rest = spec.substr(4);
    while (true) {
      const std::size_t colon = rest.find(':');
      parts.push_back(rest.substr(0, colon));
      if (colon == std::string_view::npos) break;
      rest = rest.substr(colon + 1);
    }
    if (parts.size() != 3) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad n-grid '" + std::string(spec) +
                      "': expected log:<lo>:<hi>:<count>");
    }
    const std::uint64_t lo = ParseCount(parts[0], spec);
    const std::uint64_t hi = ParseCount(parts[1], spec);
    const std::uint64_t count = ParseCount(parts[2], spec);
    if (hi < lo) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad n-grid '" + std::string(spec) + "': hi < lo");
    }
    const double log_lo = std::log10(static_cast<double>(lo));
    const double log_hi = std::log10(static_cast<double>(hi));
    for (std::uint64_t i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0
                                  : static_cast<double>(i) /
                                        static_cast<double>(count - 1);
      double v = std::round(std::pow(10.0, log_lo + t * (log_hi - log_lo)));
      v = std::clamp(v, static_cast<double>(lo), static_cast<double>(hi));
      grid.push_back(static_cast<std::uint64_t>(v));
    }
  } else {
    std::string_view rest = spec;
    while (true) {
      const std::size_t comma = rest.find(',');
      grid.push_back(ParseCount(rest.substr(0, comma), spec));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double ExtractionRate(std::span<const SuffixProbability> results,
                      const NpPoint& point) {
  if (results.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no results to aggregate");
  }
  std::size_t hits = 0;
  for (const SuffixProbability& sp : results) {
    hits += IsNpExtractable(sp.p_z, point);
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

ExtractionCurve BuildCurve(std::span<const SuffixProbability> results,
                           std::span<const double> p_values,
                           std::span<const std::uint64_t> n_grid,
                           std::span<const GreedyOutcome> greedy) {
  if (results.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no results to aggregate");
  }
  if (greedy.size() != results.size()) {
    throw Error(ErrorCode::kIdMismatch,
                "greedy outcomes (" + std::to_string(greedy.size()) +
                    ") and results (" + std::to_string(results.size()) +
                    ") differ in length");
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].example_id != greedy[i].example_id) {
      throw Error(ErrorCode::kIdMismatch,
                  "result '" + results[i].example_id +
                      "' is aligned with greedy outcome '" +
                      greedy[i].example_id + "'");
    }
  }

  ExtractionCurve curve;
  curve.scheme = results.front().scheme;
  curve.p_values = CheckedPValues(p_values);
  curve.n_grid = CheckedNGrid(n_grid);
  curve.dataset_size = results.size();
  const double size = static_cast<double>(results.size());

  std::vector<std::vector<std::size_t>> hits(
      curve.p_values.size(), std::vector<std::size_t>(curve.n_grid.size(), 0));
  std::size_t positive = 0;
  std::size_t greedy_hits = 0;
  for (std::size_t e = 0; e < results.size(); ++e) {
    const double p_z = results[e].p_z;
    positive += p_z > 0.0;
    greedy_hits += greedy[e].match;
    for (std::size_t i = 0; i < curve.p_values.size(); ++i) {
      for (std::size_t j = 0; j < curve.n_grid.size(); ++j) {
        hits[i][j] +=
            IsNpExtractable(p_z, NpPoint{curve.n_grid[j], curve.p_values[i]});
      }
    }
  }
  curve.rates.assign(curve.p_values.size(),
                     std::vector<double>(curve.n_grid.size(), 0.0));
  for (std::size_t i = 0; i < curve.p_values.size(); ++i) {
    for (std::size_t j = 0; j < curve.n_grid.size(); ++j) {
      curve.rates[i][j] = static_cast<double>(hits[i][j]) / size;
    }
  }
  curve.max_rate = static_cast<double>(positive) / size;
  curve.greedy_rate = static_cast<double>(greedy_hits) / size;
  return curve;
}

std::optional<std::uint64_t> CrossoverN(const ExtractionCurve& curve,
                                        double p) {
  const auto it =
      std::find(curve.p_values.begin(), curve.p_values.end(), p);
  if (it == curve.p_values.end()) {
    throw Error(ErrorCode::kPNotOnGrid,
                "p = " + FormatShortest(p) + " is not on the curve's p grid");
  }
  const std::size_t i = static_cast<std::size_t>(it - curve.p_values.begin());
  for (std::size_t j = 0; j < curve.n_grid.size(); ++j) {
    const double r = curve.rates[i][j];
    // A zero greedy rate is "reached" only once anything is extracted.
    if (r >= curve.greedy_rate && (curve.greedy_rate > 0.0 || r > 0.0)) {
      return curve.n_grid[j];
    }
  }
  return std::nullopt;
}

void CheckCurveInvariants(const ExtractionCurve& curve) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvariantViolation, "extraction curve: " + what);
  };
  for (std::size_t i = 0; i < curve.p_values.size(); ++i) {
    for (std::size_t j = 0; j < curve.n_grid.size(); ++j) {
      const double r = curve.rates[i][j];
      if (r < 0.0 || r > curve.max_rate) {
        fail("rate exceeds max_rate at p=" + FormatShortest(curve.p_values[i]) +
             " n=" + std::to_string(curve.n_grid[j]));
      }
      if (j > 0 && r < curve.rates[i][j - 1]) {
        fail("rate decreases in n at p=" + FormatShortest(curve.p_values[i]) +
             " n=" + std::to_string(curve.n_grid[j]));
      }
      if (i > 0 && r > curve.rates[i - 1][j]) {
        fail("rate increases in p at p=" + FormatShortest(curve.p_values[i]) +
             " n=" + std::to_string(curve.n_grid[j]));
      }
    }
  }
}

GroupReport BuildGroupReport(std::span<const SuffixProbability> results,
                             std::span<const GreedyOutcome> greedy,
                             std::span<const TargetExample> examples,
                             std::span<const double> p_values,
                             std::span<const std::uint64_t> n_grid) {
  if (examples.size() != results.size()) {
    throw Error(ErrorCode::kIdMismatch,
                "examples and results differ in length");
  }
  // Key: repetitions, with the default group ordered after every value.
  using Key = std::pair<bool, std::int64_t>;
  std::map<Key, std::vector<std::size_t>> members;
  GroupReport report;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].id != results[i].example_id) {
      throw Error(ErrorCode::kIdMismatch,
                  "example '" + examples[i].id + "' is aligned with result '" +
                      results[i].example_id + "'");
    }
    const auto& reps = examples[i].repetitions;
    if (!reps) ++report.missing_metadata;
    members[reps ? Key{false, *reps} : Key{true, 0}].push_back(i);
  }
  for (const auto& [key, indices] : members) {
    std::vector<SuffixProbability> group_results;
    std::vector<GreedyOutcome> group_greedy;
    for (std::size_t i : indices) {
      group_results.push_back(results[i]);
      group_greedy.push_back(greedy[i]);
    }
    GroupCurve group;
    if (!key.first) group.repetitions = key.second;
    group.curve = BuildCurve(group_results, p_values, n_grid, group_greedy);
    group.gap = group.curve.max_rate - group.curve.greedy_rate;
    report.groups.push_back(std::move(group));
  }
  return report;
}

std::vector<ComparisonCell> CompareDatasets(const ExtractionCurve& train,
                                            const ExtractionCurve& test) {
  if (train.p_values != test.p_values || train.n_grid != test.n_grid) {
    throw Error(ErrorCode::kGridMismatch,
                "train and test curves use different (p, n) grids");
  }
  std::vector<ComparisonCell> cells;
  for (std::size_t i = 0; i < train.p_values.size(); ++i) {
    for (std::size_t j = 0; j < train.n_grid.size(); ++j) {
      ComparisonCell cell;
      cell.p = train.p_values[i];
      cell.n = train.n_grid[j];
      cell.train_rate = train.rates[i][j];
      cell.test_rate = test.rates[i][j];
      if (cell.test_rate > 0.0) {
        cell.ratio = cell.train_rate / cell.test_rate;
      } else if (cell.train_rate > 0.0) {
        cell.ratio = INFINITY;
      }
      cell.test_at_least_train = cell.test_rate >= cell.train_rate;
      cells.push_back(cell);
    }
  }
  return cells;
}

TheoryCheck VerifyTheory(const ModelSource& source,
                         std::span<const TargetExample> examples,
                         const SamplingScheme& scheme, double p,
                         std::uint64_t seed, std::uint64_t max_samples) {
  NpPoint::Make(1, p);
  TheoryCheck check;
  check.p = p;
  std::size_t appeared = 0;
  for (const TargetExample& ex : examples) {
    const SuffixProbability sp = SuffixLogProb(source, ex, scheme);
    const std::optional<std::uint64_t> n = NForP(sp.p_z, p);
    if (!n) {
      ++check.skipped_zero;
      continue;
    }
    if (*n > max_samples) {
      ++check.skipped_budget;
      continue;
    }
    ++check.examples;
    ContinuationSampler sampler(source, ex, scheme, seed);
    bool hit = false;
    if (source.HasNativeSampler()) {
      for (const auto& seq : sampler.SampleAll(*n)) {
        if (std::equal(seq.begin(), seq.end(), ex.suffix().begin())) {
          hit = true;
          break;
        }
      }
    } else {
      for (std::uint64_t w = 0; w < *n && !hit; ++w) {
        const std::vector<TokenId> seq = sampler.Sample(w);
        hit = std::equal(seq.begin(), seq.end(), ex.suffix().begin());
      }
    }
    appeared += hit;
  }
  if (check.examples == 0) {
    throw Error(ErrorCode::kEmptyInput,
                "no example has a generation probability reachable within " +
                    std::to_string(max_samples) + " samples");
  }
  const double count = static_cast<double>(check.examples);
  check.empirical_fraction = static_cast<double>(appeared) / count;
  check.sigma = std::sqrt(p * (1.0 - p) / count);
  check.within_band = check.empirical_fraction >= p - 3.0 * check.sigma;
  return check;
}

std::string CurveToCsv(const ExtractionCurve& curve) {
  std::string out = "p,n,rate,greedy_rate,max_rate,dataset_size,scheme\n";
  const std::string scheme = CsvField(curve.scheme.ToString());
  for (std::size_t i = 0; i < curve.p_values.size(); ++i) {
    for (std::size_t j = 0; j < curve.n_grid.size(); ++j) {
      out += Fixed6(curve.p_values[i]) + "," + std::to_string(curve.n_grid[j]) +
             "," + Fixed6(curve.rates[i][j]) + "," + Fixed6(curve.greedy_rate) +
             "," + Fixed6(curve.max_rate) + "," +
             std::to_string(curve.dataset_size) + "," + scheme + "\n";
    }
  }
  return out;
}

}  // namespace extraudit
