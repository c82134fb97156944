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

#include <utility>

#include "extraudit/model_sources.h"
#include "json.hpp"

namespace extraudit {

using nlohmann::json;

namespace {

std::string ContextString(std::span<const TokenId> context) {
  std::string s = "[";
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(context[i]);
  }
  return s + "]";
}

double ParseLogprob(const json& value, const std::string& where) {
  if (!value.is_string()) {
    throw Error(ErrorCode::kMalformedInput,
                where + ": log-probabilities must be decimal strings");
  }
  const std::string text = value.get<std::string>();
  if (text == "-inf") return -INFINITY;
  try {
    return ParseDouble(text);
  } catch (const Error&) {
    throw Error(ErrorCode::kMalformedInput,
                where + ": bad log-probability '" + text + "'");
  }
}

}  // namespace

std::string ReplayRecordLine(std::span<const TokenId> context,
                             const NextTokenDistribution& dist) {
  nlohmann::ordered_json rec;
  rec["context"] = std::vector<TokenId>(context.begin(), context.end());
  nlohmann::ordered_json logprobs = nlohmann::ordered_json::array();
  for (const TokenProb& e : dist.entries()) {
    logprobs.push_back({e.token, FormatSignificant17(e.logprob)});
  }
  rec["logprobs"] = std::move(logprobs);
  if (dist.tail_logprob().has_value()) {
    rec["tail_logprob"] = FormatSignificant17(*dist.tail_logprob());
  } else {
    rec["tail_logprob"] = nullptr;
  }
  rec["vocab_size"] = dist.vocab_size();
  return rec.dump();
}

std::unique_ptr<ReplaySource> ReplaySource::Open(const std::string& path) {
  return Parse(ReadFile(path));
}

std::unique_ptr<ReplaySource> ReplaySource::Parse(std::string_view text) {
  std::unique_ptr<ReplaySource> source(new ReplaySource());
  std::size_t line_number = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view()
                                        : text.substr(nl + 1);
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "replay line " + std::to_string(line_number);
    try {
      const json rec = json::parse(line);
      for (const auto& [key, value] : rec.items()) {
        if (key != "context" && key != "logprobs" && key != "tail_logprob" &&
            key != "vocab_size") {
          throw Error(ErrorCode::kMalformedInput,
                      where + ": unknown key '" + key + "'");
        }
      }
      auto context = rec.at("context").get<std::vector<TokenId>>();
      const auto vocab = rec.at("vocab_size").get<std::uint32_t>();
      if (source->vocab_size_ == 0) source->vocab_size_ = vocab;
      if (vocab != source->vocab_size_) {
        throw Error(ErrorCode::kMalformedInput,
                    where + ": vocab_size differs from earlier records");
      }
      std::vector<TokenProb> entries;
      for (const json& pair : rec.at("logprobs")) {
        if (!pair.is_array() || pair.size() != 2) {
          throw Error(ErrorCode::kMalformedInput,
                      where + ": logprobs entries are [token, logprob]");
        }
        entries.push_back(
            {pair.at(0).get<TokenId>(), ParseLogprob(pair.at(1), where), 0.0});
      }
      std::optional<double> tail;
      if (const json& t = rec.at("tail_logprob"); !t.is_null()) {
        tail = ParseLogprob(t, where);
      }
      NextTokenDistribution dist =
          NextTokenDistribution::FromLogProbs(std::move(entries), tail, vocab);
      auto [it, inserted] =
          source->records_.try_emplace(std::move(context), dist);
      if (!inserted && !(it->second == dist)) {
        throw Error(ErrorCode::kDuplicateContext,
                    where + ": context " + ContextString(it->first) +
                        " recorded twice with different distributions");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvariantViolation) {
        throw Error(ErrorCode::kMalformedInput, where + ": " + e.what());
      }
      throw;
    }
  }
  if (source->records_.empty()) {
    throw Error(ErrorCode::kEmptyInput, "replay file has no records");
  }
  return source;
}

NextTokenDistribution ReplaySource::NextDistribution(
    std::span<const TokenId> context) const {
  CheckContext(context);
  const auto it =
      records_.find(std::vector<TokenId>(context.begin(), context.end()));
  if (it == records_.end()) {
    throw Error(ErrorCode::kReplayMiss,
                "no replay record for context " + ContextString(context));
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// RecordingSource

void RecordingSource::Remember(std::vector<TokenId> context,
                               const NextTokenDistribution& dist) const {
  std::lock_guard<std::mutex> lock(mu_);
  seen_.try_emplace(std::move(context), dist);
}

NextTokenDistribution RecordingSource::NextDistribution(
    std::span<const TokenId> context) const {
  NextTokenDistribution dist = inner_.NextDistribution(context);
  Remember(std::vector<TokenId>(context.begin(), context.end()), dist);
  return dist;
}

std::vector<NextTokenDistribution> RecordingSource::ScoreContinuation(
    std::span<const TokenId> prefix,
    std::span<const TokenId> continuation) const {
  std::vector<NextTokenDistribution> dists =
      inner_.ScoreContinuation(prefix, continuation);
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    Remember(context, dists[i]);
    context.push_back(continuation[i]);
  }
  return dists;
}

std::string RecordingSource::ReplayText() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::string out;
  for (const auto& [context, dist] : seen_) {
    out += ReplayRecordLine(context, dist);
    out += '\n';
  }
  return out;
}

void RecordingSource::WriteReplay(const std::string& path) const {
  WriteFile(path, ReplayText());
}

}  // namespace extraudit
