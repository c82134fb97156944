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

// Shared fixtures and reference implementations for the tests.
//
// The Ref* functions recompute scheme transforms, suffix probabilities and
// ball sums from dense probability vectors with plain loops. They share no
// code with the library beyond NextDistribution() on the model under test.

#ifndef EXTRAUDIT_TESTS_TEST_UTIL_H_
#define EXTRAUDIT_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "extraudit/core.h"
#include "extraudit/model_sources.h"

namespace extraudit::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "extraudit_XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline TargetExample MakeExample(std::string id, std::vector<TokenId> tokens,
                                 std::size_t prefix_len,
                                 std::size_t suffix_len) {
  TargetExample ex;
  ex.id = std::move(id);
  ex.tokens = std::move(tokens);
  ex.prefix_len = prefix_len;
  ex.suffix_len = suffix_len;
  return ex;
}

// Sequences from a random first-order chain: each token has one preferred
// successor taken with probability `stickiness`, otherwise uniform.
inline std::vector<std::vector<TokenId>> MarkovCorpus(
    std::mt19937_64& rng, std::uint32_t vocab, std::size_t sequences,
    std::size_t length, double stickiness) {
  std::vector<TokenId> next(vocab);
  for (auto& t : next) t = static_cast<TokenId>(rng() % vocab);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<TokenId>> corpus(sequences);
  for (auto& seq : corpus) {
    TokenId t = static_cast<TokenId>(rng() % vocab);
    for (std::size_t i = 0; i < length; ++i) {
      seq.push_back(t);
      t = u(rng) < stickiness ? next[t] : static_cast<TokenId>(rng() % vocab);
    }
  }
  return corpus;
}

// Random tiny n-gram model: random corpus, order in [1, 3], alpha in
// [0.05, 1].
inline NgramModel RandomNgram(std::mt19937_64& rng, std::uint32_t vocab) {
  const std::uint32_t order = 1 + static_cast<std::uint32_t>(rng() % 3);
  const double alpha = 0.05 + 0.95 * std::uniform_real_distribution<>()(rng);
  const auto corpus =
      MarkovCorpus(rng, vocab, 1 + rng() % 6, 2 + rng() % 10, 0.7);
  return NgramModel::Train(corpus, order, alpha, vocab);
}

// Dense reference transform. Ordering: probability descending, token id
// ascending. Top-q keeps entries until the cumulative mass is within 1e-12
// of q; temperature is applied to the retained, renormalized mass.
inline std::vector<double> RefTransform(const std::vector<double>& probs,
                                        const SamplingScheme& s) {
  const std::size_t v = probs.size();
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return probs[a] > probs[b];
  });
  std::vector<bool> keep(v, false);
  double temperature = 1.0;
  switch (s.kind) {
    case SamplingScheme::Kind::kGreedy: {
      std::vector<double> out(v, 0.0);
      out[order[0]] = 1.0;
      return out;
    }
    case SamplingScheme::Kind::kTopK:
      for (std::size_t i = 0; i < v && i < s.k; ++i) {
        if (probs[order[i]] > 0) keep[order[i]] = true;
      }
      temperature = s.temperature;
      break;
    case SamplingScheme::Kind::kTopQ: {
      double cum = 0.0;
      for (std::size_t i = 0; i < v; ++i) {
        if (probs[order[i]] <= 0) break;
        keep[order[i]] = true;
        cum += probs[order[i]];
        if (cum >= s.q - 1e-12) break;
      }
      temperature = s.temperature;
      break;
    }
    case SamplingScheme::Kind::kTemperature:
      for (std::size_t i = 0; i < v; ++i) keep[i] = probs[i] > 0;
      temperature = s.temperature;
      break;
  }
  double kept = 0.0;
  for (std::size_t i = 0; i < v; ++i) kept += keep[i] ? probs[i] : 0.0;
  // (p / kept)^(1/T), normalized.
  std::vector<double> out(v, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    if (!keep[i]) continue;
    out[i] = std::pow(probs[i] / kept, 1.0 / temperature);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

inline std::vector<double> RefConditional(const ModelSource& source,
                                          const std::vector<TokenId>& context,
                                          const SamplingScheme& s) {
  return RefTransform(source.NextDistribution(context).Dense(), s);
}

// Product of per-position scheme probabilities, position by position.
inline double RefSequenceProb(const ModelSource& source,
                              std::vector<TokenId> context,
                              const std::vector<TokenId>& continuation,
                              const SamplingScheme& s) {
  double prob = 1.0;
  for (TokenId t : continuation) {
    prob *= RefConditional(source, context, s)[t];
    if (prob == 0.0) return 0.0;
    context.push_back(t);
  }
  return prob;
}

inline double RefSuffixProb(const ModelSource& source, const TargetExample& ex,
                            const SamplingScheme& s) {
  const auto prefix = ex.prefix();
  const auto suffix = ex.suffix();
  return RefSequenceProb(source, {prefix.begin(), prefix.end()},
                         {suffix.begin(), suffix.end()}, s);
}

// Sum over every vocab^k continuation within Hamming distance eps.
inline double RefBallProb(const ModelSource& source, const TargetExample& ex,
                          const SamplingScheme& s, std::size_t eps) {
  const std::uint32_t v = source.vocab_size();
  const auto prefix = ex.prefix();
  const auto target = ex.suffix();
  const std::size_t k = target.size();
  std::vector<TokenId> seq(k, 0);
  double total = 0.0;
  while (true) {
    std::size_t dist = 0;
    for (std::size_t i = 0; i < k; ++i) dist += seq[i] != target[i];
    if (dist <= eps) {
      total += RefSequenceProb(source, {prefix.begin(), prefix.end()}, seq, s);
    }
    std::size_t i = 0;
    while (i < k && ++seq[i] == v) seq[i++] = 0;
    if (i == k) break;
  }
  return total;
}

// Argmax decode with ties toward the smaller token id.
inline std::vector<TokenId> RefGreedy(const ModelSource& source,
                                      std::vector<TokenId> context,
                                      std::size_t length) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < length; ++i) {
    const std::vector<double> p = source.NextDistribution(context).Dense();
    const TokenId best = static_cast<TokenId>(
        std::max_element(p.begin(), p.end()) - p.begin());
    out.push_back(best);
    context.push_back(best);
  }
  return out;
}

// 1 - (1 - p_z)^n in long double, via log1p/expm1 to keep tiny p_z exact.
inline long double RefPForN(long double p_z, std::uint64_t n) {
  if (p_z == 1.0L) return 1.0L;
  return -std::expm1(static_cast<long double>(n) * std::log1p(-p_z));
}

// Wraps a source and counts calls per entry point.
class CountingSource final : public ModelSource {
 public:
  explicit CountingSource(const ModelSource& inner) : inner_(inner) {}

  std::uint32_t vocab_size() const override { return inner_.vocab_size(); }
  std::string name() const override { return "counting"; }
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override {
    ++next_calls;
    return inner_.NextDistribution(context);
  }
  std::vector<NextTokenDistribution> ScoreContinuation(
      std::span<const TokenId> prefix,
      std::span<const TokenId> continuation) const override {
    ++score_calls;
    return inner_.ScoreContinuation(prefix, continuation);
  }

  mutable std::atomic<std::uint64_t> next_calls{0};
  mutable std::atomic<std::uint64_t> score_calls{0};

 private:
  const ModelSource& inner_;
};

// Every context maps to the same full distribution.
class FixedSource final : public ModelSource {
 public:
  explicit FixedSource(std::vector<double> probs)
      : dist_(NextTokenDistribution::FromProbabilities(probs)),
        vocab_(static_cast<std::uint32_t>(probs.size())) {}

  std::uint32_t vocab_size() const override { return vocab_; }
  std::string name() const override { return "fixed"; }
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override {
    CheckContext(context);
    return dist_;
  }

 private:
  NextTokenDistribution dist_;
  std::uint32_t vocab_;
};

}  // namespace extraudit::testing

#endif  // EXTRAUDIT_TESTS_TEST_UTIL_H_
