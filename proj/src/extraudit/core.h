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

// Domain types shared by every module: target examples, next-token
// distributions, sampling schemes, suffix probabilities, (n, p) points and
// deterministic per-trial random streams.

#ifndef EXTRAUDIT_CORE_H_
#define EXTRAUDIT_CORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "extraudit/error.h"

namespace extraudit {

using TokenId = std::uint32_t;

// Tolerance on sum(listed) + tail_mass around 1.
inline constexpr double kNormalizationTolerance = 1e-6;

struct TargetExample {
  std::string id;
  std::vector<TokenId> tokens;
  std::size_t prefix_len = 0;
  std::size_t suffix_len = 0;
  std::optional<std::int64_t> repetitions;
  std::optional<std::string> split_tag;

  std::span<const TokenId> prefix() const {
    return std::span<const TokenId>(tokens).first(prefix_len);
  }
  std::span<const TokenId> suffix() const {
    return std::span<const TokenId>(tokens).subspan(prefix_len, suffix_len);
  }

  // Throws kInvariantViolation naming the id.
  void Validate() const;
  // Throws kTokenOutOfRange when any token is >= vocab_size.
  void CheckVocabulary(std::uint32_t vocab_size) const;

  friend bool operator==(const TargetExample&, const TargetExample&) = default;
};

struct TokenProb {
  TokenId token = 0;
  double logprob = 0.0;  // natural log
  double prob = 0.0;     // exp(logprob)
};

// Probability mass over a vocabulary for one position. Entries hold only
// nonzero probabilities, sorted by descending probability with ties broken by
// ascending token id. Unlisted tokens share tail_mass; when tail_mass is 0
// every unlisted token has probability exactly 0.
class NextTokenDistribution {
 public:
  // Builds from natural-log probabilities. Entries equal to -inf are dropped.
  // A missing tail_logprob means the listing is complete. Throws
  // kInvariantViolation if the result is not normalized or contains
  // duplicate or out-of-range tokens.
  static NextTokenDistribution FromLogProbs(
      std::vector<TokenProb> entries, std::optional<double> tail_logprob,
      std::uint32_t vocab_size);

  // Convenience for tests and small models: probs[t] is token t's mass.
  static NextTokenDistribution FromProbabilities(std::span<const double> probs);

  std::span<const TokenProb> entries() const { return entries_; }
  double tail_mass() const { return tail_mass_; }
  std::optional<double> tail_logprob() const { return tail_logprob_; }
  std::uint32_t vocab_size() const { return vocab_size_; }
  bool is_full() const { return !tail_logprob_.has_value(); }
  double listed_mass() const;

  // Listed entry for `token`, or nullptr.
  const TokenProb* Find(TokenId token) const;

  // Dense probability vector of length vocab_size; requires is_full().
  std::vector<double> Dense() const;

  friend bool operator==(const NextTokenDistribution&,
                         const NextTokenDistribution&) = default;

 private:
  NextTokenDistribution() = default;
  void Validate() const;

  std::vector<TokenProb> entries_;
  std::optional<double> tail_logprob_;
  double tail_mass_ = 0.0;
  std::uint32_t vocab_size_ = 0;
};

inline bool operator==(const TokenProb& a, const TokenProb& b) {
  return a.token == b.token && a.logprob == b.logprob && a.prob == b.prob;
}

struct SamplingScheme {
  enum class Kind { kGreedy, kTopK, kTopQ, kTemperature };

  Kind kind = Kind::kGreedy;
  std::uint32_t k = 0;       // kTopK only
  double q = 0.0;            // kTopQ only
  double temperature = 1.0;  // ignored for kGreedy

  static SamplingScheme Greedy() { return {}; }
  static SamplingScheme TopK(std::uint32_t k, double temperature = 1.0);
  static SamplingScheme TopQ(double q, double temperature = 1.0);
  static SamplingScheme Temperature(double temperature);

  // Grammar: "greedy" | "topk:k=40,T=1.0" | "topq:q=0.9,T=1.0" | "temp:T=1.0".
  // T defaults to 1 when omitted; unknown or repeated keys are rejected.
  static SamplingScheme Parse(std::string_view text);
  std::string ToString() const;

  void Validate() const;

  friend bool operator==(const SamplingScheme&,
                         const SamplingScheme&) = default;
};

struct SuffixProbability {
  std::string example_id;
  SamplingScheme scheme;
  // Natural-log probability per suffix position; -inf at blocked positions.
  std::vector<double> per_token_logprob;
  // Sum of per_token_logprob; -inf iff blocked_index is set.
  double total_logprob = 0.0;
  std::optional<std::size_t> blocked_index;
  double p_z = 0.0;

  bool blocked() const { return blocked_index.has_value(); }
};

struct NpPoint {
  std::uint64_t n = 1;
  double p = 0.5;

  // Throws kInvalidArgument unless n >= 1 and 0 < p < 1.
  static NpPoint Make(std::uint64_t n, double p);
};

// A deterministic random stream keyed by (global_seed, example_id, trial).
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), engine_(key) {}

  // Uniform in [0, 1) from the top 53 bits of one engine draw.
  double NextUniform();
  std::uint64_t NextBits() { return engine_(); }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

RngStream DeriveStream(std::uint64_t global_seed, std::string_view example_id,
                       std::uint64_t trial_index);

std::uint64_t Fnv1a64(std::string_view bytes);

// JSONL dataset I/O. Loading validates every example and preserves order.
std::vector<TargetExample> LoadDataset(const std::string& path);
std::vector<TargetExample> ParseDataset(std::string_view text);
TargetExample ParseExampleLine(std::string_view line, std::size_t line_number);
std::string ExampleToJsonLine(const TargetExample& example);
void SaveDataset(const std::string& path,
                 std::span<const TargetExample> examples);

// Number formatting used by every on-disk format.
std::string FormatShortest(double value);     // shortest round-trip
std::string FormatSignificant17(double value);  // "%.17g"
double ParseDouble(std::string_view text);      // exact, whole string

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view contents);

}  // namespace extraudit

#endif  // EXTRAUDIT_CORE_H_
