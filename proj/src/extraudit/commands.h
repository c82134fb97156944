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

// Batch audit runs. Each command reads its inputs, evaluates examples on a
// bounded worker pool and writes records in input order, so output bytes
// depend only on (config, seed). Per-example failures become records with an
// "error" field; only configuration and source failures abort a run.

#ifndef EXTRAUDIT_COMMANDS_H_
#define EXTRAUDIT_COMMANDS_H_

#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "extraudit/aggregate.h"
#include "extraudit/core.h"
#include "extraudit/model_sources.h"

namespace extraudit {

struct RunConfig {
  std::string dataset_path;
  std::string source_spec;  // ngram:<path> | replay:<path> | bridge:<url>
  std::string scheme = "greedy";
  std::vector<double> p_values = {std::begin(kDefaultPValues),
                                  std::end(kDefaultPValues)};
  std::string n_grid_spec = std::string(kDefaultNGrid);
  std::uint64_t seed = 0;
  std::uint64_t trials = 1000;
  std::size_t epsilon = 0;
  std::string out_path;      // empty = return output only
  std::size_t jobs = 1;
  std::string record_path;   // audit: write a replay of the session here
  std::string splits_spec;   // sweep: "prefix=10..50:10,suffix=50"
  double verify_p = 0.5;     // verify
};

struct CommandResult {
  std::string output;   // JSONL / CSV body
  std::string summary;  // human-readable report
  std::size_t records = 0;
  std::size_t errors = 0;
  bool passed = true;  // verify: empirical fraction inside the band
};

// Deterministic output bytes for identical inputs.
void TrainLanguageModel(const std::string& corpus_path, std::uint32_t order,
                        double alpha, std::uint32_t vocab_size,
                        const std::string& out_path);

CommandResult RunAudit(const RunConfig& config);
CommandResult RunAudit(const RunConfig& config, const ModelSource& source,
                       const std::vector<TargetExample>& examples);

CommandResult RunCurve(const std::string& results_path,
                       const std::vector<double>& p_values,
                       const std::string& n_grid_spec,
                       const std::string& out_csv,
                       const std::string& dataset_path = "");
CommandResult CurveFromResults(std::string_view results_jsonl,
                               const std::vector<double>& p_values,
                               const std::string& n_grid_spec);

CommandResult RunEstimate(const RunConfig& config);
CommandResult RunEstimate(const RunConfig& config, const ModelSource& source,
                          const std::vector<TargetExample>& examples);

CommandResult RunVerify(const RunConfig& config);
CommandResult RunVerify(const RunConfig& config, const ModelSource& source,
                        const std::vector<TargetExample>& examples);

CommandResult RunSweep(const RunConfig& config);
CommandResult RunSweep(const RunConfig& config, const ModelSource& source,
                       const std::vector<TargetExample>& examples);

// "prefix=10..50:10,suffix=50" -> every (prefix, suffix) combination.
std::vector<std::pair<std::size_t, std::size_t>> ParseSplits(
    std::string_view spec);

// FNV-1a over the canonical JSON of the fields that shape a command's output.
std::string ConfigHash(const RunConfig& config, std::string_view command);

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void ParallelFor(std::size_t count, std::size_t jobs,
                 const std::function<void(std::size_t)>& fn);

}  // namespace extraudit

#endif  // EXTRAUDIT_COMMANDS_H_
