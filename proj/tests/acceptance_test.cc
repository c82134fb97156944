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

// Acceptance checks. Usage: acceptance_test [criterion...]
// Prints one "criterion N PASS|FAIL: detail" line per criterion and exits
// nonzero if any failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "extraudit/aggregate.h"
#include "extraudit/commands.h"
#include "extraudit/core.h"
#include "extraudit/error.h"
#include "extraudit/extraction.h"
#include "extraudit/model_sources.h"
#include "json.hpp"
#include "test_util.h"

namespace extraudit {
namespace {

using testing::CountingSource;
using testing::MakeExample;
using testing::MarkovCorpus;
using testing::RandomNgram;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

std::vector<nlohmann::json> Lines(const std::string& body) {
  std::vector<nlohmann::json> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::vector<TokenId> RandomTokens(std::mt19937_64& rng, std::size_t len,
                                  std::uint32_t vocab) {
  std::vector<TokenId> t(len);
  for (auto& x : t) x = static_cast<TokenId>(rng() % vocab);
  return t;
}

// 1. n_for_p brackets the target probability.
Outcome BracketProperty() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 10000; ++i) {
    // Half log-uniform to cover tiny p_z.
    const double p_z = i % 2 ? std::pow(10.0, -9.0 * unit(rng))
                             : 1e-9 + (1.0 - 2e-9) * unit(rng);
    const double p = 0.001 + 0.998 * unit(rng);
    pairs.emplace_back(std::clamp(p_z, 1.000001e-9, 1.0 - 1.000001e-9), p);
  }
  std::size_t failures = 0;
  const auto start = Clock::now();
  for (const auto& [p_z, p] : pairs) {
    const auto n = NForP(p_z, p);
    if (!n || PForN(p_z, *n) < p || (*n > 1 && PForN(p_z, *n - 1) >= p)) {
      ++failures;
    }
  }
  const double elapsed = Seconds(start);
  return {failures == 0 && elapsed < 1.0,
          Fmt("%zu bracket failures over 10000 pairs in %.3f s (limit 1 s)",
              failures, elapsed)};
}

// 2. Closed-form p_z agrees with exhaustive enumeration at radius 0.
Outcome OracleEquivalence() {
  std::mt19937_64 rng(2);
  const std::vector<SamplingScheme> schemes = {
      SamplingScheme::Greedy(), SamplingScheme::TopK(2),
      SamplingScheme::TopQ(0.7), SamplingScheme::Temperature(1.0)};
  double worst = 0.0;
  double worst_ref = 0.0;
  std::size_t comparisons = 0;
  const auto start = Clock::now();
  for (int i = 0; i < 250; ++i) {
    const std::uint32_t vocab = 2 + rng() % 3;
    const NgramModel m = RandomNgram(rng, vocab);
    const std::size_t k = 1 + rng() % 4;
    const std::size_t a = 1 + rng() % 3;
    auto tokens = RandomTokens(rng, a + k, vocab);
    if (i % 3 == 0) {
      // Some greedy continuations, so greedy is not always blocked.
      const auto g = testing::RefGreedy(m, {tokens.begin(), tokens.begin() + a}, k);
      std::copy(g.begin(), g.end(), tokens.begin() + a);
    }
    const auto ex = MakeExample("o" + std::to_string(i), tokens, a, k);
    for (const auto& s : schemes) {
      const double closed = SuffixLogProb(m, ex, s).p_z;
      const double exact = ExactExtractionProb(m, ex, s, 0);
      worst = std::max(worst, std::fabs(closed - exact));
      worst_ref = std::max(
          worst_ref, std::fabs(closed - testing::RefSuffixProb(m, ex, s)));
      ++comparisons;
    }
  }
  const double elapsed = Seconds(start);
  return {worst <= 1e-12 && worst_ref <= 1e-12 && elapsed < 30.0,
          Fmt("250 models x 4 schemes (%zu comparisons): max |p_z - exact| = "
              "%.3g, max |p_z - reference| = %.3g, %.2f s",
              comparisons, worst, worst_ref, elapsed)};
}

// 3. Monte-Carlo radius estimates stay in the 3-sigma band.
Outcome EstimatorConvergence() {
  std::mt19937_64 rng(3);
  constexpr std::uint64_t kTrials = 50000;
  const std::vector<std::size_t> radii = {0, 1, 2};
  const std::vector<SamplingScheme> schemes = {
      SamplingScheme::Temperature(1.0), SamplingScheme::TopK(3),
      SamplingScheme::TopQ(0.9), SamplingScheme::Temperature(0.7)};
  std::size_t outside = 0;
  double worst_z = 0.0;
  const auto start = Clock::now();
  for (int i = 0; i < 20; ++i) {
    const std::uint32_t vocab = 3 + rng() % 2;
    const NgramModel m = RandomNgram(rng, vocab);
    const std::size_t k = 3 + rng() % 2;
    const auto ex =
        MakeExample("h" + std::to_string(i), RandomTokens(rng, 2 + k, vocab), 2, k);
    const SamplingScheme& s = schemes[i % schemes.size()];
    const auto ests = EstimateExtractionRadii(m, ex, s, kTrials, radii, 1000 + i);
    for (std::size_t r = 0; r < radii.size(); ++r) {
      const double exact = ExactExtractionProb(m, ex, s, radii[r]);
      const double sigma = std::sqrt(exact * (1.0 - exact) / kTrials);
      const double diff = std::fabs(ests[r].hat_p_z - exact);
      if (sigma == 0.0) {
        outside += diff != 0.0;
      } else {
        worst_z = std::max(worst_z, diff / sigma);
        outside += diff > 3.0 * sigma;
      }
    }
  }
  const double elapsed = Seconds(start);
  return {outside == 0 && elapsed < 120.0,
          Fmt("%zu of 60 (instance, radius) estimates outside 3 sigma, "
              "max |z| = %.2f, %.1f s",
              outside, worst_z, elapsed)};
}

// Toy model plus candidate examples whose p_z falls in (lo, hi).
std::vector<TargetExample> BandedExamples(const ModelSource& m,
                                          const SamplingScheme& s,
                                          const std::vector<std::vector<TokenId>>& corpus,
                                          std::mt19937_64& rng, std::size_t want,
                                          double lo, double hi) {
  std::vector<TargetExample> out;
  for (std::size_t tries = 0; out.size() < want && tries < 200000; ++tries) {
    const auto& seq = corpus[rng() % corpus.size()];
    const std::size_t k = 1 + rng() % 3;
    const std::size_t start = rng() % (seq.size() - 4 - k);
    std::vector<TokenId> tokens(seq.begin() + start,
                                seq.begin() + start + 4 + k);
    auto ex = MakeExample("v" + std::to_string(out.size()), tokens, 4, k);
    const double p_z = SuffixLogProb(m, ex, s).p_z;
    if (p_z > lo && p_z < hi) out.push_back(std::move(ex));
  }
  return out;
}

// 4. Empirical appearance rate tracks the theoretical p.
Outcome TheoryVsEmpirical() {
  std::mt19937_64 rng(4);
  const auto corpus = MarkovCorpus(rng, 8, 50, 60, 0.6);
  const NgramModel m = NgramModel::Train(corpus, 2, 0.5, 8);
  const SamplingScheme s = SamplingScheme::Temperature(1.0);
  const auto examples = BandedExamples(m, s, corpus, rng, 200, 0.01, 0.99);
  if (examples.size() != 200) {
    return {false, Fmt("only %zu examples in (0.01, 0.99)", examples.size())};
  }
  bool pass = true;
  std::string detail;
  const auto start = Clock::now();
  for (double p : {0.1, 0.5, 0.9}) {
    const TheoryCheck c = VerifyTheory(m, examples, s, p, 44);
    const double upper = std::min(1.0, p + 0.1 + 3.0 * c.sigma);
    const double lower = p - 3.0 * c.sigma;
    const bool ok = c.examples == 200 && c.empirical_fraction >= lower &&
                    c.empirical_fraction <= upper;
    pass = pass && ok;
    // Mean of 1-(1-p_z)^n at the chosen n; what the fraction should track.
    double expected = 0.0;
    for (const auto& ex : examples) {
      const double p_z = SuffixLogProb(m, ex, s).p_z;
      expected += PForN(p_z, *NForP(p_z, p)) / examples.size();
    }
    detail += Fmt("p=%.1f empirical=%.3f expected=%.3f band=[%.3f, %.3f]%s; ",
                  p, c.empirical_fraction, expected, lower, upper,
                  ok ? "" : " OUT");
  }
  const double elapsed = Seconds(start);
  return {pass && elapsed < 300.0, detail + Fmt("%.1f s", elapsed)};
}

// 5. greedy_match, p_z == 1 and (1, 0.999999)-extractability coincide.
Outcome GreedyCorrespondence() {
  std::mt19937_64 rng(5);
  const auto corpus = MarkovCorpus(rng, 12, 60, 40, 0.8);
  const NgramModel m = NgramModel::Train(corpus, 3, 0.1, 12);
  std::vector<TargetExample> examples;
  for (int i = 0; i < 500; ++i) {
    auto tokens = RandomTokens(rng, 12, 12);
    if (i % 2 == 0) {
      const auto g = testing::RefGreedy(m, {tokens.begin(), tokens.begin() + 6}, 6);
      std::copy(g.begin(), g.end(), tokens.begin() + 6);
      if (i % 4 == 0) tokens[6 + rng() % 6] = rng() % 12;  // near misses
    }
    examples.push_back(MakeExample("g" + std::to_string(i), tokens, 6, 6));
  }
  RunConfig config;
  config.scheme = "greedy";
  config.seed = 5;
  const auto records = Lines(RunAudit(config, m, examples).output);
  std::size_t mismatches = 0;
  std::size_t matches = 0;
  const NpPoint point = NpPoint::Make(1, 0.999999);
  for (const auto& rec : records) {
    if (rec.contains("error")) {
      ++mismatches;
      continue;
    }
    const bool flag = rec["greedy_match"].get<bool>();
    const double p_z = rec["p_z"].get<double>();
    matches += flag;
    if (flag != (p_z == 1.0) || flag != IsNpExtractable(p_z, point)) {
      ++mismatches;
    }
  }
  return {records.size() == 500 && mismatches == 0,
          Fmt("%zu records, %zu greedy matches, %zu disagreements",
              records.size(), matches, mismatches)};
}

// 6. Curve shape over synthetic probabilities.
Outcome CurveMonotonicity() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SuffixProbability> results;
  std::vector<GreedyOutcome> greedy;
  for (int i = 0; i < 1000; ++i) {
    SuffixProbability sp;
    sp.example_id = "c" + std::to_string(i);
    const double u = unit(rng);
    sp.p_z = u < 0.15 ? 0.0 : u < 0.25 ? 1.0 : std::pow(10.0, -4.0 * unit(rng));
    results.push_back(sp);
    greedy.push_back({sp.example_id, sp.p_z == 1.0});
  }
  double min_positive = 1.0;
  for (const auto& r : results) {
    if (r.p_z > 0.0) min_positive = std::min(min_positive, r.p_z);
  }
  const auto grid = ParseNGrid(kDefaultNGrid);
  const ExtractionCurve c = BuildCurve(results, kDefaultPValues, grid, greedy);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < c.p_values.size(); ++i) {
    for (std::size_t j = 0; j < c.n_grid.size(); ++j) {
      if (j > 0 && c.rate(i, j) < c.rate(i, j - 1)) ++violations;
      if (i > 0 && c.rate(i, j) > c.rate(i - 1, j)) ++violations;
    }
  }
  std::size_t limit_misses = 0;
  if (min_positive >= 1e-4 && c.n_grid.back() == 1000000) {
    for (std::size_t i = 0; i < c.p_values.size(); ++i) {
      limit_misses += c.rate(i, c.n_grid.size() - 1) != c.max_rate;
    }
  }
  return {violations == 0 && limit_misses == 0 && min_positive >= 1e-4,
          Fmt("%zu monotonicity violations, %zu p rows off max_rate=%.3f at "
              "n=1e6 (min positive p_z %.2g)",
              violations, limit_misses, c.max_rate, min_positive)};
}

// 7. One scoring pass per example regardless of split count.
Outcome SweepSinglePass() {
  std::mt19937_64 rng(7);
  const auto corpus = MarkovCorpus(rng, 10, 30, 40, 0.7);
  const NgramModel m = NgramModel::Train(corpus, 3, 0.2, 10);
  std::vector<TargetExample> examples;
  for (int i = 0; i < 50; ++i) {
    examples.push_back(
        MakeExample("s" + std::to_string(i), RandomTokens(rng, 20, 10), 10, 10));
  }
  CountingSource counting(m);
  RunConfig config;
  config.scheme = "topq:q=0.9,T=0.8";
  config.splits_spec = "prefix=4..12:2,suffix=3..6:3";
  const auto splits = ParseSplits(config.splits_spec);
  const auto records = Lines(RunSweep(config, counting, examples).output);
  const SamplingScheme s = SamplingScheme::Parse(config.scheme);
  double worst = 0.0;
  std::size_t bad = 0;
  for (const auto& rec : records) {
    if (rec.contains("error")) {
      ++bad;
      continue;
    }
    const std::size_t i = std::stoul(rec["id"].get<std::string>().substr(1));
    const std::size_t a = rec["prefix_len"], k = rec["suffix_len"];
    const auto& t = examples[i].tokens;
    const auto sub = MakeExample("x", {t.begin(), t.begin() + a + k}, a, k);
    worst = std::max(worst, std::fabs(rec["p_z"].get<double>() -
                                      SuffixLogProb(m, sub, s).p_z));
  }
  const auto passes = counting.score_calls.load();
  const auto single = counting.next_calls.load();
  return {splits.size() == 10 && records.size() == 500 && bad == 0 &&
              passes == 50 && single == 0 && worst <= 1e-9,
          Fmt("%zu splits x 50 examples: %zu records, %llu scoring passes, "
              "%llu single-step calls, max |p_z diff| = %.3g",
              splits.size(), records.size(),
              static_cast<unsigned long long>(passes),
              static_cast<unsigned long long>(single), worst)};
}

// 8. Ball sizes against fixed reference values.
Outcome BallSizes() {
  const auto one = HammingBallSize(50, 32000, 1);
  const auto two = HammingBallSize(50, 32000, 2);
  const bool ok1 = one == 1600000;
  const bool ok2 = two == 39200000;
  return {ok1 && ok2,
          "eps=1: " + one.str() + (ok1 ? " (expected 1600000)" : " != 1600000") +
              "; eps=2: " + two.str() +
              (ok2 ? " (expected 39200000)"
                   : " != 39200000 (C(50,2)*32000^2 = 1225*1024000000)")};
}

// 9. Training-drawn targets are more extractable than held-out ones.
Outcome TrainVsTest() {
  std::mt19937_64 rng(9);
  // 64^3 contexts against 6400 training 4-grams: contexts are nearly unique.
  const auto all = MarkovCorpus(rng, 64, 400, 32, 0.3);
  const std::vector<std::vector<TokenId>> train(all.begin(), all.begin() + 200);
  const std::vector<std::vector<TokenId>> held(all.begin() + 200, all.end());
  const NgramModel m = NgramModel::Train(train, 4, 0.01, 64);
  const SamplingScheme s = SamplingScheme::TopK(2);
  auto score = [&](const std::vector<std::vector<TokenId>>& seqs,
                   const std::string& tag) {
    std::vector<SuffixProbability> results;
    std::vector<GreedyOutcome> greedy;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const auto ex = MakeExample(tag + std::to_string(i),
                                  {seqs[i].begin(), seqs[i].begin() + 16}, 8, 8);
      results.push_back(SuffixLogProb(m, ex, s));
      greedy.push_back(
          {ex.id, SuffixLogProb(m, ex, SamplingScheme::Greedy()).p_z == 1.0});
    }
    const std::vector<double> ps = {0.5};
    return BuildCurve(results, ps, ParseNGrid(kDefaultNGrid), greedy);
  };
  const ExtractionCurve tr = score(train, "train");
  const ExtractionCurve te = score(held, "test");
  std::size_t not_strict = 0;
  for (std::size_t j = 0; j < tr.n_grid.size(); ++j) {
    not_strict += !(tr.rate(0, j) > te.rate(0, j));
  }
  return {not_strict == 0,
          Fmt("p=0.5 over %zu n values: train %.3f..%.3f vs held-out "
              "%.3f..%.3f, %zu n values not strictly greater",
              tr.n_grid.size(), tr.rate(0, 0), tr.rate(0, tr.n_grid.size() - 1),
              te.rate(0, 0), te.rate(0, te.n_grid.size() - 1), not_strict)};
}

}  // namespace
}  // namespace extraudit

int main(int argc, char** argv) {
  using extraudit::Outcome;
  const std::map<int, std::function<Outcome()>> criteria = {
      {1, extraudit::BracketProperty},   {2, extraudit::OracleEquivalence},
      {3, extraudit::EstimatorConvergence}, {4, extraudit::TheoryVsEmpirical},
      {5, extraudit::GreedyCorrespondence}, {6, extraudit::CurveMonotonicity},
      {7, extraudit::SweepSinglePass},   {8, extraudit::BallSizes},
      {9, extraudit::TrainVsTest},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [id, fn] : criteria) selected.push_back(id);
  }
  int failed = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::printf("criterion %d FAIL: no such criterion\n", id);
      ++failed;
      continue;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s\n", id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
