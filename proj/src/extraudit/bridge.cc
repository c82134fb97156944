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

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <utility>

#include "extraudit/model_sources.h"
#include "httplib.h"
#include "json.hpp"

namespace extraudit {

using nlohmann::json;

namespace {

// Bridges promise per-position normalization within this bound; anything
// looser is a protocol error, anything tighter than the distribution
// tolerance is renormalized.
constexpr double kBridgeNormalization = 1e-4;

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<1024>& sem) : sem_(sem) {
    sem_.acquire();
  }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

[[noreturn]] void ProtocolError(const std::string& what) {
  throw Error(ErrorCode::kBridgeProtocol, "bridge protocol error: " + what);
}

double LogSumExp(std::span<const double> values) {
  double hi = -INFINITY;
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

NextTokenDistribution PositionToDistribution(const json& position,
                                             std::uint32_t vocab_size,
                                             TokenId target) {
  const json& target_logprob = position.at("target_logprob");
  if (!target_logprob.is_number()) {
    ProtocolError("'target_logprob' must be a number");
  }
  const json& top = position.at("top");
  if (!top.is_array()) ProtocolError("'top' must be an array");
  std::vector<TokenProb> entries;
  std::vector<double> logs;
  entries.reserve(top.size());
  for (const json& pair : top) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number()) {
      ProtocolError("'top' entries are [token, logprob]");
    }
    const auto token = pair[0].get<std::int64_t>();
    if (token < 0 || token >= vocab_size) {
      ProtocolError("token " + std::to_string(token) + " out of range");
    }
    const double lp = pair[1].get<double>();
    if (static_cast<TokenId>(token) == target &&
        !(std::fabs(lp - target_logprob.get<double>()) <= 1e-9)) {
      ProtocolError("listed logprob of the target disagrees with "
                    "'target_logprob'");
    }
    entries.push_back({static_cast<TokenId>(token), lp, 0.0});
    logs.push_back(lp);
  }
  std::optional<double> tail;
  const json& t = position.at("tail_logprob");
  if (!t.is_null()) {
    if (!t.is_number()) ProtocolError("'tail_logprob' must be a number");
    tail = t.get<double>();
    logs.push_back(*tail);
  }
  const double lse = LogSumExp(logs);
  if (!(std::fabs(lse) <= kBridgeNormalization)) {
    ProtocolError("position is not normalized (logsumexp " +
                  FormatShortest(lse) + ")");
  }
  if (std::fabs(std::expm1(lse)) > kNormalizationTolerance) {
    for (TokenProb& e : entries) e.logprob -= lse;
    if (tail) *tail -= lse;
  }
  return NextTokenDistribution::FromLogProbs(std::move(entries), tail,
                                             vocab_size);
}

}  // namespace

BridgeOptions ParseBridgeUrl(const std::string& url) {
  BridgeOptions options;
  const std::size_t q = url.find('?');
  options.url = url.substr(0, q);
  if (options.url.rfind("http://", 0) != 0 &&
      options.url.rfind("https://", 0) != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "bridge url must start with http:// or https://: '" + url +
                    "'");
  }
  while (!options.url.empty() && options.url.back() == '/') {
    options.url.pop_back();
  }
  if (q == std::string::npos) return options;
  std::string_view query = std::string_view(url).substr(q + 1);
  while (!query.empty()) {
    const std::size_t amp = query.find('&');
    const std::string_view item = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view()
                                          : query.substr(amp + 1);
    const std::size_t eq = item.find('=');
    const std::string key(item.substr(0, eq));
    const std::string_view value =
        eq == std::string_view::npos ? std::string_view() : item.substr(eq + 1);
    std::uint64_t number = 0;
    auto [ptr, ec] =
        std::from_chars(value.data(), value.data() + value.size(), number);
    if (value.empty() || ec != std::errc() ||
        ptr != value.data() + value.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bridge url parameter '" + key + "' needs an integer");
    }
    if (key == "top_m") {
      options.top_m = static_cast<std::uint32_t>(number);
    } else if (key == "timeout_ms") {
      options.timeout = std::chrono::milliseconds(number);
    } else if (key == "retries") {
      options.max_retries = static_cast<int>(number);
    } else if (key == "max_in_flight") {
      options.max_in_flight = static_cast<int>(std::max<std::uint64_t>(1, number));
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown bridge url parameter '" + key + "'");
    }
  }
  return options;
}

BridgeSource::BridgeSource(BridgeOptions options)
    : options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {}

std::unique_ptr<BridgeSource> BridgeSource::Connect(
    const BridgeOptions& options) {
  std::unique_ptr<BridgeSource> source(new BridgeSource(options));
  json info;
  try {
    info = json::parse(source->Call("GET", "/v1/info", ""));
    const int protocol = info.at("protocol").get<int>();
    if (protocol != kBridgeProtocolVersion) {
      throw Error(ErrorCode::kProtocolVersionMismatch,
                  "bridge speaks protocol " + std::to_string(protocol) +
                      ", expected " + std::to_string(kBridgeProtocolVersion));
    }
    source->model_ = info.at("model").get<std::string>();
    const auto vocab = info.at("vocab_size").get<std::int64_t>();
    if (vocab < 1 || vocab > 0xffffffffLL) ProtocolError("bad vocab_size");
    source->vocab_size_ = static_cast<std::uint32_t>(vocab);
  } catch (const json::exception& e) {
    ProtocolError(std::string("/v1/info: ") + e.what());
  }
  return source;
}

std::uint64_t BridgeSource::requests_sent() const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  return requests_sent_;
}

std::string BridgeSource::Call(const std::string& method,
                               const std::string& path,
                               const std::string& body) const {
  InFlightSlot slot(in_flight_);
  std::string last_failure;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(25 << attempt));
    }
    httplib::Client client(options_.url);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    {
      std::lock_guard<std::mutex> lock(stats_mu_);
      ++requests_sent_;
    }
    httplib::Result res = method == "GET"
                              ? client.Get(path)
                              : client.Post(path, body, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      ProtocolError(path + " answered HTTP " + std::to_string(res->status) +
                    ": " + res->body);
    }
    return res->body;
  }
  throw Error(ErrorCode::kBridgeUnreachable,
              "bridge " + options_.url + path + " unreachable after " +
                  std::to_string(options_.max_retries + 1) +
                  " attempts: " + last_failure);
}

std::vector<NextTokenDistribution> BridgeSource::ScoreContinuation(
    std::span<const TokenId> prefix,
    std::span<const TokenId> continuation) const {
  CheckContext(prefix);
  for (TokenId t : continuation) {
    if (t >= vocab_size_) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "continuation token " + std::to_string(t) +
                      " >= vocab_size");
    }
  }
  if (continuation.empty()) return {};
  json request;
  request["prefix"] = std::vector<TokenId>(prefix.begin(), prefix.end());
  request["continuation"] =
      std::vector<TokenId>(continuation.begin(), continuation.end());
  request["top_m"] =
      options_.top_m.has_value() ? json(*options_.top_m) : json(nullptr);
  const std::string body = Call("POST", "/v1/logprobs", request.dump());
  std::vector<NextTokenDistribution> out;
  try {
    const json response = json::parse(body);
    const json& positions = response.at("positions");
    if (!positions.is_array() || positions.size() != continuation.size()) {
      ProtocolError("expected " + std::to_string(continuation.size()) +
                    " positions");
    }
    out.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      out.push_back(
          PositionToDistribution(positions[i], vocab_size_, continuation[i]));
    }
  } catch (const json::exception& e) {
    ProtocolError(std::string("/v1/logprobs: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvariantViolation) ProtocolError(e.what());
    throw;
  }
  return out;
}

NextTokenDistribution BridgeSource::NextDistribution(
    std::span<const TokenId> context) const {
  // A one-token continuation; only its position distribution is used.
  const TokenId placeholder = 0;
  return ScoreContinuation(context, std::span<const TokenId>(&placeholder, 1))
      .front();
}

std::vector<std::vector<TokenId>> BridgeSource::Generate(
    std::span<const TokenId> prefix, std::size_t max_tokens, std::size_t n,
    const SamplingScheme& scheme, std::uint64_t seed) const {
  CheckContext(prefix);
  json request;
  request["prefix"] = std::vector<TokenId>(prefix.begin(), prefix.end());
  request["max_tokens"] = max_tokens;
  request["n"] = n;
  request["scheme"] = scheme.ToString();
  request["seed"] = seed;
  const std::string body = Call("POST", "/v1/generate", request.dump());
  std::vector<std::vector<TokenId>> sequences;
  try {
    const json response = json::parse(body);
    sequences = response.at("sequences").get<std::vector<std::vector<TokenId>>>();
  } catch (const json::exception& e) {
    ProtocolError(std::string("/v1/generate: ") + e.what());
  }
  if (sequences.size() != n) {
    ProtocolError("/v1/generate returned " + std::to_string(sequences.size()) +
                  " sequences, expected " + std::to_string(n));
  }
  for (const auto& seq : sequences) {
    if (seq.size() != max_tokens) {
      ProtocolError("/v1/generate sequence length " +
                    std::to_string(seq.size()) + " != max_tokens");
    }
    for (TokenId t : seq) {
      if (t >= vocab_size_) ProtocolError("generated token out of range");
    }
  }
  return sequences;
}

std::unique_ptr<ModelSource> OpenSource(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (kind == "ngram" && !arg.empty()) {
    return std::make_unique<NgramModel>(NgramModel::Load(arg));
  }
  if (kind == "replay" && !arg.empty()) return ReplaySource::Open(arg);
  if (kind == "bridge") {
    std::string url = arg;
    if (url.empty()) {
      const char* env = std::getenv("EXTRAUDIT_BRIDGE_URL");
      if (env == nullptr || *env == '\0') {
        throw Error(ErrorCode::kInvalidArgument,
                    "bridge source needs a url or EXTRAUDIT_BRIDGE_URL");
      }
      url = env;
    }
    return BridgeSource::Connect(ParseBridgeUrl(url));
  }
  throw Error(ErrorCode::kInvalidArgument,
              "source must be ngram:<path>, replay:<path> or bridge:<url>, "
              "got '" + spec + "'");
}

}  // namespace extraudit
