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

#include "extraudit/core.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace extraudit {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kInsufficientCoverage: return "insufficient-coverage";
    case ErrorCode::kAmbiguousZero: return "ambiguous-zero";
    case ErrorCode::kTokenOutOfRange: return "token-out-of-range";
    case ErrorCode::kReplayMiss: return "replay-miss";
    case ErrorCode::kDuplicateContext: return "duplicate-context";
    case ErrorCode::kBridgeUnreachable: return "bridge-unreachable";
    case ErrorCode::kBridgeProtocol: return "bridge-protocol-error";
    case ErrorCode::kProtocolVersionMismatch: return "protocol-version-mismatch";
    case ErrorCode::kNotExtractable: return "not-extractable";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kUndefinedPerplexity: return "undefined-perplexity";
    case ErrorCode::kIdMismatch: return "id-mismatch";
    case ErrorCode::kGridMismatch: return "grid-mismatch";
    case ErrorCode::kPNotOnGrid: return "p-not-on-grid";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// TargetExample

void TargetExample::Validate() const {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvariantViolation,
                "example '" + id + "': " + what);
  };
  if (prefix_len < 1) fail("prefix_len must be >= 1");
  if (suffix_len < 1) fail("suffix_len must be >= 1");
  if (prefix_len + suffix_len > tokens.size()) {
    fail("prefix_len + suffix_len exceeds token count " +
         std::to_string(tokens.size()));
  }
  if (repetitions.has_value() && *repetitions < 0) {
    fail("repetitions must be non-negative");
  }
}

void TargetExample::CheckVocabulary(std::uint32_t vocab_size) const {
  for (TokenId t : tokens) {
    if (t >= vocab_size) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "example '" + id + "': token " + std::to_string(t) +
                      " >= vocab_size " + std::to_string(vocab_size));
    }
  }
}

// ---------------------------------------------------------------------------
// NextTokenDistribution

NextTokenDistribution NextTokenDistribution::FromLogProbs(
    std::vector<TokenProb> entries, std::optional<double> tail_logprob,
    std::uint32_t vocab_size) {
  NextTokenDistribution dist;
  dist.vocab_size_ = vocab_size;
  dist.entries_.reserve(entries.size());
  for (TokenProb& e : entries) {
    if (std::isnan(e.logprob) || e.logprob > 1e-9) {
      throw Error(ErrorCode::kInvariantViolation,
                  "log-probability out of range for token " +
                      std::to_string(e.token));
    }
    e.logprob = std::min(e.logprob, 0.0);
    e.prob = std::exp(e.logprob);
    if (e.prob > 0.0) dist.entries_.push_back(e);
  }
  auto before = [](const TokenProb& a, const TokenProb& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.token < b.token;
  };
  if (!std::is_sorted(dist.entries_.begin(), dist.entries_.end(), before)) {
    std::sort(dist.entries_.begin(), dist.entries_.end(), before);
  }
  if (tail_logprob.has_value()) {
    if (std::isnan(*tail_logprob) || *tail_logprob > 1e-9) {
      throw Error(ErrorCode::kInvariantViolation, "tail log-probability > 0");
    }
    dist.tail_logprob_ = std::min(*tail_logprob, 0.0);
    dist.tail_mass_ = std::exp(*dist.tail_logprob_);
  }
  dist.Validate();
  return dist;
}

NextTokenDistribution NextTokenDistribution::FromProbabilities(
    std::span<const double> probs) {
  std::vector<TokenProb> entries;
  entries.reserve(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] < 0.0 || std::isnan(probs[t])) {
      throw Error(ErrorCode::kInvariantViolation, "negative probability");
    }
    if (probs[t] == 0.0) continue;
    entries.push_back({static_cast<TokenId>(t), std::log(probs[t]), 0.0});
  }
  return FromLogProbs(std::move(entries), std::nullopt,
                      static_cast<std::uint32_t>(probs.size()));
}

double NextTokenDistribution::listed_mass() const {
  double sum = 0.0;
  for (const TokenProb& e : entries_) sum += e.prob;
  return sum;
}

void NextTokenDistribution::Validate() const {
  if (vocab_size_ == 0) {
    throw Error(ErrorCode::kInvariantViolation, "vocab_size must be >= 1");
  }
  if (entries_.size() > vocab_size_) {
    throw Error(ErrorCode::kInvariantViolation, "more entries than vocab");
  }
  std::vector<TokenId> ids;
  ids.reserve(entries_.size());
  for (const TokenProb& e : entries_) {
    if (e.token >= vocab_size_) {
      throw Error(ErrorCode::kInvariantViolation,
                  "token " + std::to_string(e.token) + " >= vocab_size");
    }
    ids.push_back(e.token);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::kInvariantViolation, "duplicate token in entries");
  }
  const double total = listed_mass() + tail_mass_;
  if (!(std::fabs(total - 1.0) <= kNormalizationTolerance)) {
    throw Error(ErrorCode::kInvariantViolation,
                "distribution mass " + FormatShortest(total) + " is not 1");
  }
}

const TokenProb* NextTokenDistribution::Find(TokenId token) const {
  for (const TokenProb& e : entries_) {
    if (e.token == token) return &e;
  }
  return nullptr;
}

std::vector<double> NextTokenDistribution::Dense() const {
  if (!is_full()) {
    throw Error(ErrorCode::kInsufficientCoverage,
                "dense view requires a full distribution");
  }
  std::vector<double> dense(vocab_size_, 0.0);
  for (const TokenProb& e : entries_) dense[e.token] = e.prob;
  return dense;
}

// ---------------------------------------------------------------------------
// SamplingScheme

SamplingScheme SamplingScheme::TopK(std::uint32_t k, double temperature) {
  SamplingScheme s{Kind::kTopK, k, 0.0, temperature};
  s.Validate();
  return s;
}

SamplingScheme SamplingScheme::TopQ(double q, double temperature) {
  SamplingScheme s{Kind::kTopQ, 0, q, temperature};
  s.Validate();
  return s;
}

SamplingScheme SamplingScheme::Temperature(double temperature) {
  SamplingScheme s{Kind::kTemperature, 0, 0.0, temperature};
  s.Validate();
  return s;
}

void SamplingScheme::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "sampling scheme: " + what);
  };
  switch (kind) {
    case Kind::kGreedy:
      break;
    case Kind::kTopK:
      if (k < 1) fail("top-k requires k >= 1");
      break;
    case Kind::kTopQ:
      if (!(q > 0.0 && q <= 1.0)) fail("top-q requires 0 < q <= 1");
      break;
    case Kind::kTemperature:
      break;
  }
  if (kind != Kind::kGreedy &&
      !(temperature > 0.0 && std::isfinite(temperature))) {
    fail("temperature must be positive and finite");
  }
}

namespace {

std::string FormatParam(double value) {
  std::string s = FormatShortest(value);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

SamplingScheme SamplingScheme::Parse(std::string_view text) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument,
                "invalid scheme '" + std::string(text) + "': " + what);
  };
  if (text == "greedy") return Greedy();

  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) fail("expected '<kind>:<params>'");
  const std::string_view kind_name = text.substr(0, colon);
  std::string_view params = text.substr(colon + 1);

  SamplingScheme scheme;
  std::set<std::string, std::less<>> allowed;
  if (kind_name == "topk") {
    scheme.kind = Kind::kTopK;
    allowed = {"k", "T"};
  } else if (kind_name == "topq") {
    scheme.kind = Kind::kTopQ;
    allowed = {"q", "T"};
  } else if (kind_name == "temp") {
    scheme.kind = Kind::kTemperature;
    allowed = {"T"};
  } else {
    fail("unknown kind");
  }

  std::set<std::string, std::less<>> seen;
  while (!params.empty()) {
    const std::size_t comma = params.find(',');
    const std::string_view item = params.substr(0, comma);
    params = comma == std::string_view::npos ? std::string_view()
                                             : params.substr(comma + 1);
    if (comma != std::string_view::npos && params.empty()) fail("trailing ','");
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) fail("expected key=value");
    const std::string_view key = item.substr(0, eq);
    const std::string_view value = item.substr(eq + 1);
    if (!allowed.contains(key)) fail("unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      fail("repeated key '" + std::string(key) + "'");
    }
    try {
      if (key == "k") {
        std::uint32_t k = 0;
        auto [ptr, ec] =
            std::from_chars(value.data(), value.data() + value.size(), k);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
          fail("k must be a positive integer");
        }
        scheme.k = k;
      } else if (key == "q") {
        scheme.q = ParseDouble(value);
      } else {
        scheme.temperature = ParseDouble(value);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMalformedInput) fail(e.what());
      throw;
    }
  }
  if (scheme.kind == Kind::kTopK && !seen.contains("k")) fail("missing k");
  if (scheme.kind == Kind::kTopQ && !seen.contains("q")) fail("missing q");
  scheme.Validate();
  return scheme;
}

std::string SamplingScheme::ToString() const {
  switch (kind) {
    case Kind::kGreedy:
      return "greedy";
    case Kind::kTopK:
      return "topk:k=" + std::to_string(k) + ",T=" + FormatParam(temperature);
    case Kind::kTopQ:
      return "topq:q=" + FormatParam(q) + ",T=" + FormatParam(temperature);
    case Kind::kTemperature:
      return "temp:T=" + FormatParam(temperature);
  }
  return "greedy";
}

// ---------------------------------------------------------------------------
// NpPoint

NpPoint NpPoint::Make(std::uint64_t n, double p) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p must lie in (0, 1)");
  }
  return NpPoint{n, p};
}

// ---------------------------------------------------------------------------
// Random streams

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double RngStream::NextUniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream DeriveStream(std::uint64_t global_seed, std::string_view example_id,
                       std::uint64_t trial_index) {
  std::uint64_t key = SplitMix64(global_seed);
  key = SplitMix64(key ^ Fnv1a64(example_id));
  key = SplitMix64(key ^ trial_index);
  return RngStream(key);
}

// ---------------------------------------------------------------------------
// Dataset I/O

namespace {

using nlohmann::json;

std::uint64_t RequireCount(const json& obj, const char* key,
                           std::size_t line_number) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::kMalformedInput,
                "line " + std::to_string(line_number) + ": missing '" + key +
                    "'");
  }
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw Error(ErrorCode::kMalformedInput,
                "line " + std::to_string(line_number) + ": '" + key +
                    "' must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

}  // namespace

TargetExample ParseExampleLine(std::string_view line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, where + e.what());
  }
  if (!obj.is_object()) {
    throw Error(ErrorCode::kMalformedInput, where + "expected a JSON object");
  }
  static const std::set<std::string, std::less<>> kKeys = {
      "id", "tokens", "prefix_len", "suffix_len", "repetitions", "split_tag"};
  for (const auto& [key, value] : obj.items()) {
    if (!kKeys.contains(key)) {
      throw Error(ErrorCode::kMalformedInput, where + "unknown key '" + key +
                                                  "'");
    }
  }
  TargetExample ex;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string()) {
    throw Error(ErrorCode::kMalformedInput, where + "'id' must be a string");
  }
  ex.id = id->get<std::string>();
  auto tokens = obj.find("tokens");
  if (tokens == obj.end() || !tokens->is_array()) {
    throw Error(ErrorCode::kMalformedInput,
                where + "'tokens' must be an array");
  }
  ex.tokens.reserve(tokens->size());
  for (const json& t : *tokens) {
    if (!t.is_number_integer() || t.get<std::int64_t>() < 0 ||
        t.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
      throw Error(ErrorCode::kMalformedInput,
                  where + "token ids must be non-negative 32-bit integers");
    }
    ex.tokens.push_back(t.get<TokenId>());
  }
  ex.prefix_len = RequireCount(obj, "prefix_len", line_number);
  ex.suffix_len = RequireCount(obj, "suffix_len", line_number);
  if (auto it = obj.find("repetitions"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw Error(ErrorCode::kMalformedInput,
                  where + "'repetitions' must be an integer");
    }
    ex.repetitions = it->get<std::int64_t>();
  }
  if (auto it = obj.find("split_tag"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw Error(ErrorCode::kMalformedInput,
                  where + "'split_tag' must be a string");
    }
    ex.split_tag = it->get<std::string>();
  }
  ex.Validate();
  return ex;
}

std::vector<TargetExample> ParseDataset(std::string_view text) {
  std::vector<TargetExample> examples;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view()
                                        : text.substr(nl + 1);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    examples.push_back(ParseExampleLine(line, line_number));
  }
  if (examples.empty()) {
    throw Error(ErrorCode::kEmptyInput, "dataset contains no examples");
  }
  return examples;
}

std::vector<TargetExample> LoadDataset(const std::string& path) {
  return ParseDataset(ReadFile(path));
}

std::string ExampleToJsonLine(const TargetExample& example) {
  nlohmann::ordered_json obj;
  obj["id"] = example.id;
  obj["tokens"] = example.tokens;
  obj["prefix_len"] = example.prefix_len;
  obj["suffix_len"] = example.suffix_len;
  if (example.repetitions) obj["repetitions"] = *example.repetitions;
  if (example.split_tag) obj["split_tag"] = *example.split_tag;
  return obj.dump();
}

void SaveDataset(const std::string& path,
                 std::span<const TargetExample> examples) {
  std::string out;
  for (const TargetExample& ex : examples) {
    out += ExampleToJsonLine(ex);
    out += '\n';
  }
  WriteFile(path, out);
}

// ---------------------------------------------------------------------------
// Formatting and files

std::string FormatShortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string FormatSignificant17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double ParseDouble(std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kMalformedInput,
                "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace extraudit
