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

#include "extraudit/commands.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "extraudit/extraction.h"
#include "extraudit/sampling.h"
#include "json.hpp"

namespace extraudit {

using ojson = nlohmann::ordered_json;

namespace {

std::string Hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ojson NullableDouble(double v) {
  return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

ojson ErrorRecord(const std::string& id, const std::string& scheme,
                  const Error& e) {
  ojson rec;
  rec["id"] = id;
  rec["scheme"] = scheme;
  rec["error"] = e.what();
  rec["error_code"] = std::string(ErrorCodeName(e.code()));
  return rec;
}

void AddProvenance(ojson& rec, const RunConfig& config,
                   const std::string& hash) {
  rec["seed"] = config.seed;
  rec["config_hash"] = hash;
}

// Collects one or more JSONL lines per example, then concatenates them in
// input order.
struct RecordSink {
  explicit RecordSink(std::size_t n) : lines(n) {}
  std::vector<std::vector<std::string>> lines;
  std::atomic<std::size_t> errors{0};

  CommandResult Finish() {
    CommandResult result;
    for (const auto& per_example : lines) {
      for (const std::string& line : per_example) {
        result.output += line;
        result.output += '\n';
        ++result.records;
      }
    }
    result.errors = errors.load();
    return result;
  }
};

void WriteOutputs(const RunConfig& config, std::string_view command,
                  const CommandResult& result) {
  if (config.out_path.empty()) return;
  WriteFile(config.out_path, result.output);
  ojson manifest;
  manifest["command"] = std::string(command);
  manifest["config_hash"] = ConfigHash(config, command);
  manifest["seed"] = config.seed;
  manifest["dataset"] = config.dataset_path;
  manifest["source"] = config.source_spec;
  manifest["scheme"] = config.scheme;
  manifest["records"] = result.records;
  manifest["errors"] = result.errors;
  WriteFile(config.out_path + ".manifest.json", manifest.dump(2) + "\n");
}

std::string PKey(double p) { return FormatShortest(p); }

struct SourceHandle {
  std::unique_ptr<ModelSource> owned;
  std::unique_ptr<RecordingSource> recorder;
  const ModelSource* active = nullptr;
};

SourceHandle OpenForRun(const RunConfig& config, bool record) {
  SourceHandle handle;
  handle.owned = OpenSource(config.source_spec);
  handle.active = handle.owned.get();
  if (record && !config.record_path.empty()) {
    handle.recorder = std::make_unique<RecordingSource>(*handle.owned);
    handle.active = handle.recorder.get();
  }
  return handle;
}

std::vector<TargetExample> LoadRunDataset(const RunConfig& config) {
  if (config.dataset_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no dataset path given");
  }
  return LoadDataset(config.dataset_path);
}

std::size_t ParseSize(std::string_view text, std::string_view spec) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad splits '" + std::string(spec) + "': '" +
                    std::string(text) + "' is not an integer");
  }
  return v;
}

std::vector<std::size_t> ParseRange(std::string_view text,
                                    std::string_view spec) {
  const std::size_t dots = text.find("..");
  if (dots == std::string_view::npos) return {ParseSize(text, spec)};
  const std::size_t lo = ParseSize(text.substr(0, dots), spec);
  std::string_view rest = text.substr(dots + 2);
  std::size_t step = 1;
  if (const std::size_t colon = rest.find(':');
      colon != std::string_view::npos) {
    step = ParseSize(rest.substr(colon + 1), spec);
    rest = rest.substr(0, colon);
  }
  const std::size_t hi = ParseSize(rest, spec);
  if (step == 0 || hi < lo) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad splits '" + std::string(spec) + "': empty range");
  }
  std::vector<std::size_t> values;
  for (std::size_t v = lo; v <= hi; v += step) values.push_back(v);
  return values;
}

}  // namespace

// ---------------------------------------------------------------------------

void ParallelFor(std::size_t count, std::size_t jobs,
                 const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string ConfigHash(const RunConfig& config, std::string_view command) {
  ojson canon;
  canon["command"] = std::string(command);
  canon["dataset"] = config.dataset_path;
  canon["source"] = config.source_spec;
  canon["scheme"] = config.scheme;
  canon["p_values"] = config.p_values;
  canon["n_grid"] = config.n_grid_spec;
  canon["seed"] = config.seed;
  canon["trials"] = config.trials;
  canon["epsilon"] = config.epsilon;
  canon["splits"] = config.splits_spec;
  canon["verify_p"] = config.verify_p;
  return Hex64(Fnv1a64(canon.dump()));
}

std::vector<std::pair<std::size_t, std::size_t>> ParseSplits(
    std::string_view spec) {
  std::optional<std::vector<std::size_t>> prefixes;
  std::optional<std::vector<std::size_t>> suffixes;
  std::string_view rest = spec;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view()
                                           : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    const std::string_view key = item.substr(0, eq);
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad splits '" + std::string(spec) + "': expected key=range");
    }
    auto& slot = key == "prefix" ? prefixes : suffixes;
    if ((key != "prefix" && key != "suffix") || slot.has_value()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad splits '" + std::string(spec) + "': unexpected key '" +
                      std::string(key) + "'");
    }
    slot = ParseRange(item.substr(eq + 1), spec);
  }
  if (!prefixes || !suffixes) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad splits '" + std::string(spec) +
                    "': both prefix= and suffix= are required");
  }
  std::vector<std::pair<std::size_t, std::size_t>> splits;
  for (std::size_t a : *prefixes) {
    for (std::size_t k : *suffixes) {
      if (a < 1 || k < 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "bad splits '" + std::string(spec) +
                        "': lengths must be >= 1");
      }
      splits.emplace_back(a, k);
    }
  }
  return splits;
}

// ---------------------------------------------------------------------------
// train-lm

void TrainLanguageModel(const std::string& corpus_path, std::uint32_t order,
                        double alpha, std::uint32_t vocab_size,
                        const std::string& out_path) {
  const auto corpus = LoadCorpus(corpus_path);
  NgramModel::Train(corpus, order, alpha, vocab_size).Save(out_path);
}

// ---------------------------------------------------------------------------
// audit

CommandResult RunAudit(const RunConfig& config, const ModelSource& source,
                       const std::vector<TargetExample>& examples) {
  const SamplingScheme scheme = SamplingScheme::Parse(config.scheme);
  const std::string scheme_text = scheme.ToString();
  std::vector<double> p_values = config.p_values;
  for (double p : p_values) NpPoint::Make(1, p);
  const std::string hash = ConfigHash(config, "audit");

  RecordSink sink(examples.size());
  ParallelFor(examples.size(), config.jobs, [&](std::size_t i) {
    const TargetExample& ex = examples[i];
    ojson rec;
    try {
      ex.CheckVocabulary(source.vocab_size());
      const std::vector<NextTokenDistribution> dists =
          source.ScoreContinuation(ex.prefix(), ex.suffix());
      const SuffixProbability sp =
          SuffixFromDistributions(ex.id, scheme, dists, ex.suffix());
      const SuffixProbability greedy = SuffixFromDistributions(
          ex.id, SamplingScheme::Greedy(), dists, ex.suffix());
      rec["id"] = ex.id;
      rec["scheme"] = scheme_text;
      rec["p_z"] = sp.p_z;
      rec["log_p_z"] = NullableDouble(sp.total_logprob);
      rec["blocked_index"] =
          sp.blocked_index ? ojson(*sp.blocked_index) : ojson(nullptr);
      rec["greedy_match"] = greedy.p_z == 1.0;
      rec["perplexity"] =
          sp.blocked() ? ojson(nullptr) : NullableDouble(SuffixPerplexity(sp));
      ojson n_at_p = ojson::object();
      for (double p : p_values) {
        const std::optional<std::uint64_t> n = NForP(sp.p_z, p);
        n_at_p[PKey(p)] = n ? ojson(*n) : ojson(nullptr);
      }
      rec["n_at_p"] = std::move(n_at_p);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kBridgeUnreachable) throw;
      rec = ErrorRecord(ex.id, scheme_text, e);
      ++sink.errors;
    }
    AddProvenance(rec, config, hash);
    sink.lines[i].push_back(rec.dump());
  });
  return sink.Finish();
}

CommandResult RunAudit(const RunConfig& config) {
  const std::vector<TargetExample> examples = LoadRunDataset(config);
  SamplingScheme::Parse(config.scheme);
  SourceHandle source = OpenForRun(config, /*record=*/true);
  CommandResult result = RunAudit(config, *source.active, examples);
  if (source.recorder) source.recorder->WriteReplay(config.record_path);
  result.summary = "audited " + std::to_string(result.records) +
                   " examples (" + std::to_string(result.errors) +
                   " errors)";
  WriteOutputs(config, "audit", result);
  return result;
}

// ---------------------------------------------------------------------------
// curve

namespace {

struct ParsedResults {
  std::vector<SuffixProbability> results;
  std::vector<GreedyOutcome> greedy;
  std::size_t skipped = 0;
  // Provenance of the audit run that produced the results.
  std::optional<std::uint64_t> seed;
  std::string config_hash;
};

ParsedResults ParseResults(std::string_view text) {
  ParsedResults parsed;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view()
                                        : text.substr(nl + 1);
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "results line " + std::to_string(line_number);
    try {
      const nlohmann::json rec = nlohmann::json::parse(line);
      if (!parsed.seed && rec.contains("seed")) {
        parsed.seed = rec.at("seed").get<std::uint64_t>();
        parsed.config_hash = rec.value("config_hash", std::string());
      }
      if (rec.contains("error")) {
        ++parsed.skipped;
        continue;
      }
      SuffixProbability sp;
      sp.example_id = rec.at("id").get<std::string>();
      sp.scheme = SamplingScheme::Parse(rec.at("scheme").get<std::string>());
      sp.p_z = rec.at("p_z").get<double>();
      if (!(sp.p_z >= 0.0 && sp.p_z <= 1.0)) {
        throw Error(ErrorCode::kMalformedInput, where + ": p_z out of range");
      }
      const auto& lp = rec.at("log_p_z");
      sp.total_logprob = lp.is_null() ? -INFINITY : lp.get<double>();
      if (const auto& b = rec.at("blocked_index"); !b.is_null()) {
        sp.blocked_index = b.get<std::size_t>();
      }
      if (!parsed.results.empty() &&
          !(parsed.results.front().scheme == sp.scheme)) {
        throw Error(ErrorCode::kMalformedInput,
                    where + ": results mix sampling schemes");
      }
      parsed.greedy.push_back({sp.example_id, rec.at("greedy_match").get<bool>()});
      parsed.results.push_back(std::move(sp));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, where + ": " + e.what());
    }
  }
  if (parsed.results.empty()) {
    throw Error(ErrorCode::kEmptyInput, "results contain no scored examples");
  }
  return parsed;
}

std::string CurveSummary(const ExtractionCurve& curve,
                         const ParsedResults& parsed) {
  std::string s = "dataset_size=" + std::to_string(curve.dataset_size) +
                  " scheme=" + curve.scheme.ToString() +
                  " greedy_rate=" + FormatShortest(curve.greedy_rate) +
                  " max_rate=" + FormatShortest(curve.max_rate);
  for (double p : curve.p_values) {
    const std::optional<std::uint64_t> n = CrossoverN(curve, p);
    s += " crossover_n[p=" + PKey(p) + "]=" +
         (n ? std::to_string(*n) : std::string("none"));
  }
  if (parsed.skipped > 0) {
    s += " skipped_errors=" + std::to_string(parsed.skipped);
  }
  if (parsed.seed) {
    s += " seed=" + std::to_string(*parsed.seed) +
         " config_hash=" + parsed.config_hash;
  }
  return s;
}

}  // namespace

CommandResult CurveFromResults(std::string_view results_jsonl,
                               const std::vector<double>& p_values,
                               const std::string& n_grid_spec) {
  const ParsedResults parsed = ParseResults(results_jsonl);
  const ExtractionCurve curve = BuildCurve(
      parsed.results, p_values, ParseNGrid(n_grid_spec), parsed.greedy);
  CheckCurveInvariants(curve);
  CommandResult result;
  result.output = CurveToCsv(curve);
  result.records = curve.p_values.size() * curve.n_grid.size();
  result.errors = parsed.skipped;
  result.summary = CurveSummary(curve, parsed);
  return result;
}

CommandResult RunCurve(const std::string& results_path,
                       const std::vector<double>& p_values,
                       const std::string& n_grid_spec,
                       const std::string& out_csv,
                       const std::string& dataset_path) {
  const std::string text = ReadFile(results_path);
  CommandResult result = CurveFromResults(text, p_values, n_grid_spec);
  if (!dataset_path.empty()) {
    const ParsedResults parsed = ParseResults(text);
    const std::vector<TargetExample> all = LoadDataset(dataset_path);
    std::map<std::string, const TargetExample*> by_id;
    for (const TargetExample& ex : all) by_id[ex.id] = &ex;
    std::vector<TargetExample> aligned;
    for (const SuffixProbability& sp : parsed.results) {
      const auto it = by_id.find(sp.example_id);
      if (it == by_id.end()) {
        throw Error(ErrorCode::kIdMismatch,
                    "result id '" + sp.example_id + "' is not in the dataset");
      }
      aligned.push_back(*it->second);
    }
    const GroupReport report =
        BuildGroupReport(parsed.results, parsed.greedy, aligned, p_values,
                         ParseNGrid(n_grid_spec));
    for (const GroupCurve& g : report.groups) {
      result.summary += "\ngroup repetitions=" +
                        (g.repetitions ? std::to_string(*g.repetitions)
                                       : std::string("default")) +
                        " size=" + std::to_string(g.curve.dataset_size) +
                        " greedy_rate=" + FormatShortest(g.curve.greedy_rate) +
                        " max_rate=" + FormatShortest(g.curve.max_rate) +
                        " gap=" + FormatShortest(g.gap);
    }
    if (report.missing_metadata > 0) {
      result.summary += "\nwarning: " +
                        std::to_string(report.missing_metadata) +
                        " examples lack repetitions metadata (default group)";
    }
  }
  if (!out_csv.empty()) {
    WriteFile(out_csv, result.output);
    WriteFile(out_csv + ".summary.txt", result.summary + "\n");
  }
  return result;
}

// ---------------------------------------------------------------------------
// estimate

CommandResult RunEstimate(const RunConfig& config, const ModelSource& source,
                          const std::vector<TargetExample>& examples) {
  const SamplingScheme scheme = SamplingScheme::Parse(config.scheme);
  const std::string scheme_text = scheme.ToString();
  const std::vector<std::uint64_t> n_grid = ParseNGrid(config.n_grid_spec);
  if (config.trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }
  const std::string hash = ConfigHash(config, "estimate");

  RecordSink sink(examples.size());
  ParallelFor(examples.size(), config.jobs, [&](std::size_t i) {
    const TargetExample& ex = examples[i];
    ojson rec;
    try {
      const EmpiricalEstimate est = EstimateExtraction(
          source, ex, scheme, config.trials, config.epsilon, config.seed);
      rec["id"] = ex.id;
      rec["scheme"] = scheme_text;
      rec["trials"] = est.trials;
      rec["matches"] = est.matches;
      rec["hat_p_z"] = est.hat_p_z;
      rec["epsilon"] = est.epsilon;
      ojson p_at_n = ojson::object();
      for (std::uint64_t n : n_grid) {
        p_at_n[std::to_string(n)] = EstimateToP(est, n);
      }
      rec["p_at_n"] = std::move(p_at_n);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kBridgeUnreachable) throw;
      rec = ErrorRecord(ex.id, scheme_text, e);
      ++sink.errors;
    }
    AddProvenance(rec, config, hash);
    sink.lines[i].push_back(rec.dump());
  });
  return sink.Finish();
}

CommandResult RunEstimate(const RunConfig& config) {
  const std::vector<TargetExample> examples = LoadRunDataset(config);
  SamplingScheme::Parse(config.scheme);
  SourceHandle source = OpenForRun(config, /*record=*/false);
  CommandResult result = RunEstimate(config, *source.active, examples);
  result.summary = "estimated " + std::to_string(result.records) +
                   " examples (" + std::to_string(result.errors) +
                   " errors)";
  WriteOutputs(config, "estimate", result);
  return result;
}

// ---------------------------------------------------------------------------
// verify

CommandResult RunVerify(const RunConfig& config, const ModelSource& source,
                        const std::vector<TargetExample>& examples) {
  const SamplingScheme scheme = SamplingScheme::Parse(config.scheme);
  const TheoryCheck check =
      VerifyTheory(source, examples, scheme, config.verify_p, config.seed);
  ojson report;
  report["scheme"] = scheme.ToString();
  report["theoretical_p"] = check.p;
  report["empirical_fraction"] = check.empirical_fraction;
  report["examples"] = check.examples;
  report["skipped_zero_probability"] = check.skipped_zero;
  report["skipped_over_budget"] = check.skipped_budget;
  report["sigma"] = check.sigma;
  report["lower_band"] = check.p - 3.0 * check.sigma;
  report["pass"] = check.within_band;
  AddProvenance(report, config, ConfigHash(config, "verify"));

  CommandResult result;
  result.output = report.dump() + "\n";
  result.records = 1;
  result.passed = check.within_band;
  result.summary = "theoretical_p=" + FormatShortest(check.p) +
                   " empirical_fraction=" +
                   FormatShortest(check.empirical_fraction) +
                   " examples=" + std::to_string(check.examples) +
                   " skipped_zero=" + std::to_string(check.skipped_zero) +
                   " skipped_over_budget=" +
                   std::to_string(check.skipped_budget) +
                   " lower_band=" + FormatShortest(check.p - 3.0 * check.sigma) +
                   (check.within_band ? " PASS" : " FAIL");
  return result;
}

CommandResult RunVerify(const RunConfig& config) {
  const std::vector<TargetExample> examples = LoadRunDataset(config);
  SamplingScheme::Parse(config.scheme);
  SourceHandle source = OpenForRun(config, /*record=*/false);
  CommandResult result = RunVerify(config, *source.active, examples);
  WriteOutputs(config, "verify", result);
  return result;
}

// ---------------------------------------------------------------------------
// sweep

CommandResult RunSweep(const RunConfig& config, const ModelSource& source,
                       const std::vector<TargetExample>& examples) {
  const SamplingScheme scheme = SamplingScheme::Parse(config.scheme);
  const std::string scheme_text = scheme.ToString();
  const auto splits = ParseSplits(config.splits_spec);
  const std::string hash = ConfigHash(config, "sweep");

  RecordSink sink(examples.size());
  ParallelFor(examples.size(), config.jobs, [&](std::size_t i) {
    const TargetExample& ex = examples[i];
    std::vector<std::pair<std::size_t, std::size_t>> fitting;
    for (const auto& split : splits) {
      if (split.first + split.second <= ex.tokens.size()) {
        fitting.push_back(split);
      }
    }
    std::vector<std::string> scored;
    bool sweep_failed = false;
    if (!fitting.empty()) {
      try {
        const SplitSweepResult sweep = SplitSweep(source, ex, scheme, fitting);
        for (const SplitProbability& s : sweep.splits) {
          ojson rec;
          rec["id"] = ex.id;
          rec["scheme"] = scheme_text;
          rec["prefix_len"] = s.prefix_len;
          rec["suffix_len"] = s.suffix_len;
          rec["p_z"] = s.p_z;
          rec["log_p_z"] = NullableDouble(s.total_logprob);
          rec["blocked_index"] =
              s.blocked_index ? ojson(*s.blocked_index) : ojson(nullptr);
          AddProvenance(rec, config, hash);
          scored.push_back(rec.dump());
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kBridgeUnreachable) throw;
        ojson rec = ErrorRecord(ex.id, scheme_text, e);
        AddProvenance(rec, config, hash);
        scored.assign(1, rec.dump());
        sweep_failed = true;
        ++sink.errors;
      }
    }
    // Records follow the split list; a failed sweep yields one record.
    std::size_t next = 0;
    for (const auto& [a, k] : splits) {
      if (a + k <= ex.tokens.size()) {
        if (!sweep_failed) {
          sink.lines[i].push_back(scored[next++]);
        } else if (next++ == 0) {
          sink.lines[i].push_back(scored.front());
        }
        continue;
      }
      ojson rec = ErrorRecord(
          ex.id, scheme_text,
          Error(ErrorCode::kInvalidArgument,
                "split (prefix=" + std::to_string(a) + ", suffix=" +
                    std::to_string(k) + ") exceeds example length " +
                    std::to_string(ex.tokens.size())));
      rec["prefix_len"] = a;
      rec["suffix_len"] = k;
      AddProvenance(rec, config, hash);
      sink.lines[i].push_back(rec.dump());
      ++sink.errors;
    }
  });
  CommandResult result = sink.Finish();
  return result;
}

CommandResult RunSweep(const RunConfig& config) {
  const std::vector<TargetExample> examples = LoadRunDataset(config);
  SamplingScheme::Parse(config.scheme);
  ParseSplits(config.splits_spec);
  SourceHandle source = OpenForRun(config, /*record=*/false);
  CommandResult result = RunSweep(config, *source.active, examples);
  result.summary = "swept " + std::to_string(examples.size()) +
                   " examples into " + std::to_string(result.records) +
                   " records (" + std::to_string(result.errors) + " errors)";
  WriteOutputs(config, "sweep", result);
  return result;
}

}  // namespace extraudit
