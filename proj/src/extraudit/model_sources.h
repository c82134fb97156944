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

// Conditional next-token distribution providers: a smoothed n-gram model,
// a JSONL replay of recorded distributions, and an HTTP client for an
// external model bridge.

#ifndef EXTRAUDIT_MODEL_SOURCES_H_
#define EXTRAUDIT_MODEL_SOURCES_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "extraudit/core.h"

namespace extraudit {

// A model f(context) -> distribution over the next token. Implementations
// are stateless between calls and safe for concurrent use.
class ModelSource {
 public:
  virtual ~ModelSource() = default;

  virtual std::uint32_t vocab_size() const = 0;
  virtual std::string name() const = 0;

  // Requires a nonempty context of in-range tokens.
  virtual NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const = 0;

  // One scoring pass: element i is the distribution of the token following
  // prefix ++ continuation[0, i). The default asks NextDistribution per
  // position; remote sources answer in a single request.
  virtual std::vector<NextTokenDistribution> ScoreContinuation(
      std::span<const TokenId> prefix,
      std::span<const TokenId> continuation) const;

  // Sources that sample remotely (the bridge) generate whole continuations
  // themselves; everything else is sampled locally token by token.
  virtual bool HasNativeSampler() const { return false; }
  virtual std::vector<std::vector<TokenId>> Generate(
      std::span<const TokenId> prefix, std::size_t max_tokens, std::size_t n,
      const SamplingScheme& scheme, std::uint64_t seed) const;

 protected:
  void CheckContext(std::span<const TokenId> context) const;
};

// Fixed-order n-gram model with add-alpha smoothing and no backoff:
//   P(t | c) = (count(c, t) + alpha) / (total(c) + alpha * vocab_size)
// where c is the last min(order - 1, |context|) tokens.
class NgramModel final : public ModelSource {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
    friend bool operator==(const ContextCounts&,
                           const ContextCounts&) = default;
  };
  using CountTable = std::map<std::vector<TokenId>, ContextCounts>;

  static NgramModel Train(std::span<const std::vector<TokenId>> corpus,
                          std::uint32_t order, double alpha,
                          std::uint32_t vocab_size);

  // Model file (JSON, deterministic bytes).
  std::string Serialize() const;
  static NgramModel Deserialize(std::string_view text);
  static NgramModel Load(const std::string& path);
  void Save(const std::string& path) const;

  std::uint32_t vocab_size() const override { return vocab_size_; }
  std::string name() const override;
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override;

  std::uint32_t order() const { return order_; }
  double alpha() const { return alpha_; }
  const CountTable& counts() const { return counts_; }

  // Context key used for a given history.
  std::vector<TokenId> ContextKey(std::span<const TokenId> context) const;

 private:
  NgramModel(std::uint32_t order, double alpha, std::uint32_t vocab_size)
      : order_(order), alpha_(alpha), vocab_size_(vocab_size) {}
  static void CheckHyperparameters(std::uint32_t order, double alpha,
                                   std::uint32_t vocab_size);

  std::uint32_t order_;
  double alpha_;
  std::uint32_t vocab_size_;
  CountTable counts_;
};

// exp of the mean negative log-likelihood of every token after the first
// in each sequence.
double CorpusPerplexity(const ModelSource& source,
                        std::span<const std::vector<TokenId>> corpus);

// Reads a corpus file: either one whitespace-separated token sequence per
// line, or dataset JSONL (the "tokens" arrays are used).
std::vector<std::vector<TokenId>> LoadCorpus(const std::string& path);

// Answers exactly the contexts recorded in a replay JSONL file.
class ReplaySource final : public ModelSource {
 public:
  static std::unique_ptr<ReplaySource> Open(const std::string& path);
  static std::unique_ptr<ReplaySource> Parse(std::string_view text);

  std::uint32_t vocab_size() const override { return vocab_size_; }
  std::string name() const override { return "replay"; }
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override;

  std::size_t size() const { return records_.size(); }

 private:
  ReplaySource() = default;
  std::uint32_t vocab_size_ = 0;
  std::map<std::vector<TokenId>, NextTokenDistribution> records_;
};

std::string ReplayRecordLine(std::span<const TokenId> context,
                             const NextTokenDistribution& dist);

// Forwards to another source and keeps every served distribution, so a
// live session can be written out and replayed later.
class RecordingSource final : public ModelSource {
 public:
  explicit RecordingSource(const ModelSource& inner) : inner_(inner) {}

  std::uint32_t vocab_size() const override { return inner_.vocab_size(); }
  std::string name() const override { return inner_.name(); }
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override;
  std::vector<NextTokenDistribution> ScoreContinuation(
      std::span<const TokenId> prefix,
      std::span<const TokenId> continuation) const override;
  bool HasNativeSampler() const override { return inner_.HasNativeSampler(); }
  std::vector<std::vector<TokenId>> Generate(
      std::span<const TokenId> prefix, std::size_t max_tokens, std::size_t n,
      const SamplingScheme& scheme, std::uint64_t seed) const override {
    return inner_.Generate(prefix, max_tokens, n, scheme, seed);
  }

  // Replay JSONL, one record per distinct context in context order.
  std::string ReplayText() const;
  void WriteReplay(const std::string& path) const;

 private:
  void Remember(std::vector<TokenId> context,
                const NextTokenDistribution& dist) const;

  const ModelSource& inner_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<TokenId>, NextTokenDistribution> seen_;
};

struct BridgeOptions {
  std::string url;  // e.g. "http://127.0.0.1:8600"
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int max_in_flight = 4;
  std::optional<std::uint32_t> top_m;  // nullopt = full vocabulary
};

inline constexpr int kBridgeProtocolVersion = 1;

// Client for the model bridge HTTP protocol (/v1/info, /v1/logprobs,
// /v1/generate). Connection failures and 5xx answers are retried up to
// max_retries times.
class BridgeSource final : public ModelSource {
 public:
  // Queries /v1/info; throws kBridgeUnreachable or
  // kProtocolVersionMismatch.
  static std::unique_ptr<BridgeSource> Connect(const BridgeOptions& options);

  std::uint32_t vocab_size() const override { return vocab_size_; }
  std::string name() const override { return model_; }
  NextTokenDistribution NextDistribution(
      std::span<const TokenId> context) const override;
  std::vector<NextTokenDistribution> ScoreContinuation(
      std::span<const TokenId> prefix,
      std::span<const TokenId> continuation) const override;
  bool HasNativeSampler() const override { return true; }
  std::vector<std::vector<TokenId>> Generate(
      std::span<const TokenId> prefix, std::size_t max_tokens, std::size_t n,
      const SamplingScheme& scheme, std::uint64_t seed) const override;

  std::uint64_t requests_sent() const;

 private:
  explicit BridgeSource(BridgeOptions options);
  std::string Call(const std::string& method, const std::string& path,
                   const std::string& body) const;

  BridgeOptions options_;
  std::string model_;
  std::uint32_t vocab_size_ = 0;
  mutable std::counting_semaphore<1024> in_flight_;
  mutable std::mutex stats_mu_;
  mutable std::uint64_t requests_sent_ = 0;
};

// Parses "http://host:port[?top_m=N]" into bridge options.
BridgeOptions ParseBridgeUrl(const std::string& url);

// Opens "ngram:<path>", "replay:<path>" or "bridge:<url>". An empty bridge
// url falls back to the EXTRAUDIT_BRIDGE_URL environment variable.
std::unique_ptr<ModelSource> OpenSource(const std::string& spec);

}  // namespace extraudit

#endif  // EXTRAUDIT_MODEL_SOURCES_H_
