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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <utility>

#include "extraudit/model_sources.h"
#include "json.hpp"

namespace extraudit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModelSource defaults

void ModelSource::CheckContext(std::span<const TokenId> context) const {
  if (context.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "context must be nonempty");
  }
  const std::uint32_t vocab = vocab_size();
  for (TokenId t : context) {
    if (t >= vocab) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "context token " + std::to_string(t) + " >= vocab_size " +
                      std::to_string(vocab));
    }
  }
}

std::vector<NextTokenDistribution> ModelSource::ScoreContinuation(
    std::span<const TokenId> prefix,
    std::span<const TokenId> continuation) const {
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  context.reserve(prefix.size() + continuation.size());
  std::vector<NextTokenDistribution> out;
  out.reserve(continuation.size());
  for (TokenId t : continuation) {
    out.push_back(NextDistribution(context));
    context.push_back(t);
  }
  return out;
}

std::vector<std::vector<TokenId>> ModelSource::Generate(
    std::span<const TokenId>, std::size_t, std::size_t, const SamplingScheme&,
    std::uint64_t) const {
  throw Error(ErrorCode::kInvalidArgument,
              name() + " has no native sampler; sample locally");
}

// ---------------------------------------------------------------------------
// NgramModel

void NgramModel::CheckHyperparameters(std::uint32_t order, double alpha,
                                      std::uint32_t vocab_size) {
  if (order < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument,
                "smoothing alpha must be positive and finite");
  }
  if (vocab_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size must be >= 1");
  }
}

NgramModel NgramModel::Train(std::span<const std::vector<TokenId>> corpus,
                             std::uint32_t order, double alpha,
                             std::uint32_t vocab_size) {
  CheckHyperparameters(order, alpha, vocab_size);
  NgramModel model(order, alpha, vocab_size);
  const std::size_t history = order - 1;
  for (const std::vector<TokenId>& seq : corpus) {
    for (TokenId t : seq) {
      if (t >= vocab_size) {
        throw Error(ErrorCode::kTokenOutOfRange,
                    "corpus token " + std::to_string(t) + " >= vocab_size " +
                        std::to_string(vocab_size));
      }
    }
    // Order 1 counts every token under the empty context; higher orders
    // count every token that has at least one token of history.
    const std::size_t first = order == 1 ? 0 : 1;
    for (std::size_t i = first; i < seq.size(); ++i) {
      const std::size_t begin = i >= history ? i - history : 0;
      ContextCounts& cc = model.counts_[std::vector<TokenId>(
          seq.begin() + static_cast<std::ptrdiff_t>(begin),
          seq.begin() + static_cast<std::ptrdiff_t>(i))];
      ++cc.total;
      ++cc.next[seq[i]];
    }
  }
  return model;
}

std::vector<TokenId> NgramModel::ContextKey(
    std::span<const TokenId> context) const {
  const std::size_t keep = std::min<std::size_t>(order_ - 1, context.size());
  return std::vector<TokenId>(context.end() - static_cast<std::ptrdiff_t>(keep),
                              context.end());
}

std::string NgramModel::name() const {
  return "ngram(order=" + std::to_string(order_) +
         ",alpha=" + FormatShortest(alpha_) + ")";
}

NextTokenDistribution NgramModel::NextDistribution(
    std::span<const TokenId> context) const {
  CheckContext(context);
  const auto it = counts_.find(ContextKey(context));
  const std::uint64_t total = it == counts_.end() ? 0 : it->second.total;
  const double log_denom =
      std::log(static_cast<double>(total) + alpha_ * vocab_size_);

  // Observed continuations by descending count, then every unseen token in
  // ascending id order: already the canonical distribution order.
  std::vector<TokenProb> entries;
  entries.reserve(vocab_size_);
  std::vector<bool> observed(vocab_size_, false);
  if (it != counts_.end()) {
    std::vector<std::pair<TokenId, std::uint64_t>> seen(
        it->second.next.begin(), it->second.next.end());
    std::stable_sort(seen.begin(), seen.end(),
                     [](const auto& a, const auto& b) {
                       return a.second > b.second;
                     });
    for (const auto& [token, count] : seen) {
      observed[token] = true;
      entries.push_back(
          {token, std::log(static_cast<double>(count) + alpha_) - log_denom,
           0.0});
    }
  }
  const double unseen = std::log(alpha_) - log_denom;
  for (TokenId t = 0; t < vocab_size_; ++t) {
    if (!observed[t]) entries.push_back({t, unseen, 0.0});
  }
  return NextTokenDistribution::FromLogProbs(std::move(entries), std::nullopt,
                                             vocab_size_);
}

std::string NgramModel::Serialize() const {
  nlohmann::ordered_json doc;
  doc["format"] = "extraudit-ngram";
  doc["version"] = 1;
  doc["order"] = order_;
  doc["alpha"] = FormatSignificant17(alpha_);
  doc["vocab_size"] = vocab_size_;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& [context, cc] : counts_) {
    nlohmann::ordered_json row;
    row["context"] = context;
    nlohmann::ordered_json next = nlohmann::ordered_json::array();
    for (const auto& [token, count] : cc.next) next.push_back({token, count});
    row["next"] = std::move(next);
    table.push_back(std::move(row));
  }
  doc["counts"] = std::move(table);
  return doc.dump() + "\n";
}

NgramModel NgramModel::Deserialize(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "extraudit-ngram" || doc.at("version") != 1) {
      throw Error(ErrorCode::kMalformedInput, "not an extraudit n-gram model");
    }
    const auto order = doc.at("order").get<std::uint32_t>();
    const double alpha = ParseDouble(doc.at("alpha").get<std::string>());
    const auto vocab = doc.at("vocab_size").get<std::uint32_t>();
    CheckHyperparameters(order, alpha, vocab);
    NgramModel model(order, alpha, vocab);
    for (const json& row : doc.at("counts")) {
      ContextCounts cc;
      for (const json& pair : row.at("next")) {
        const auto token = pair.at(0).get<TokenId>();
        const auto count = pair.at(1).get<std::uint64_t>();
        if (token >= vocab) {
          throw Error(ErrorCode::kMalformedInput, "count token out of range");
        }
        cc.next[token] = count;
        cc.total += count;
      }
      model.counts_[row.at("context").get<std::vector<TokenId>>()] =
          std::move(cc);
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput,
                std::string("malformed n-gram model: ") + e.what());
  }
}

NgramModel NgramModel::Load(const std::string& path) {
  return Deserialize(ReadFile(path));
}

void NgramModel::Save(const std::string& path) const {
  WriteFile(path, Serialize());
}

double CorpusPerplexity(const ModelSource& source,
                        std::span<const std::vector<TokenId>> corpus) {
  double nll = 0.0;
  std::size_t count = 0;
  for (const std::vector<TokenId>& seq : corpus) {
    if (seq.size() < 2) continue;
    const std::span<const TokenId> all(seq);
    const auto dists = source.ScoreContinuation(all.first(1), all.subspan(1));
    for (std::size_t i = 0; i < dists.size(); ++i) {
      const TokenProb* e = dists[i].Find(seq[i + 1]);
      if (e == nullptr) return INFINITY;
      nll -= e->logprob;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::kEmptyInput, "corpus has no scorable tokens");
  }
  return std::exp(nll / static_cast<double>(count));
}

std::vector<std::vector<TokenId>> LoadCorpus(const std::string& path) {
  const std::string text = ReadFile(path);
  std::vector<std::vector<TokenId>> corpus;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(lines, line)) {
    ++line_number;
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '{') {
      corpus.push_back(ParseExampleLine(line, line_number).tokens);
      continue;
    }
    std::istringstream fields(line);
    std::vector<TokenId> seq;
    std::string field;
    while (fields >> field) {
      TokenId value = 0;
      auto [ptr, ec] =
          std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::kMalformedInput,
                    "corpus line " + std::to_string(line_number) +
                        ": bad token '" + field + "'");
      }
      seq.push_back(value);
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace extraudit
