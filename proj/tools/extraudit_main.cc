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

// extraudit: batch extraction audits over a dataset of target examples.
//
//   extraudit train-lm --corpus c.txt --order 3 --alpha 0.1 --vocab-size 64 \
//       --out lm.json
//   extraudit audit --dataset d.jsonl --source ngram:lm.json \
//       --scheme topk:k=40,T=1.0 --out results.jsonl
//   extraudit curve --results results.jsonl --out curve.csv
//
// Exit status: 0 success, 1 configuration error, 2 model source unreachable.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "extraudit/extraudit.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSource = 2;

struct Flags {
  std::string dataset;
  std::string source;
  std::string scheme = "greedy";
  std::vector<double> p_values;
  std::string n_grid = "log:1:1000000:30";
  std::uint64_t seed = 0;
  std::uint64_t trials = 1000;
  std::uint64_t epsilon = 0;
  std::string out;
  std::uint32_t jobs = 1;
  std::string record;
  std::string splits;
  double verify_p = 0.5;
  // train-lm
  std::string corpus;
  std::uint32_t order = 3;
  double alpha = 0.1;
  std::uint32_t vocab_size = 0;
  // curve
  std::string results;
};

int ExitCodeFor(ea_status status) {
  switch (status) {
    case EA_OK:
      return kExitOk;
    case EA_BRIDGE_UNREACHABLE:
    case EA_BRIDGE_PROTOCOL:
    case EA_PROTOCOL_VERSION_MISMATCH:
      return kExitSource;
    default:
      return kExitConfig;
  }
}

int Report(ea_status status) {
  if (status != EA_OK) {
    std::fprintf(stderr, "extraudit: %s: %s\n", ea_status_name(status),
                 ea_last_error());
  }
  return ExitCodeFor(status);
}

ea_run_config MakeConfig(const Flags& f) {
  ea_run_config c;
  ea_run_config_init(&c);
  c.dataset_path = f.dataset.c_str();
  c.source_spec = f.source.c_str();
  c.scheme = f.scheme.c_str();
  if (!f.p_values.empty()) {
    c.p_values = f.p_values.data();
    c.num_p_values = f.p_values.size();
  }
  c.n_grid = f.n_grid.c_str();
  c.seed = f.seed;
  c.trials = f.trials;
  c.epsilon = f.epsilon;
  c.out_path = f.out.empty() ? nullptr : f.out.c_str();
  c.jobs = f.jobs;
  c.record_path = f.record.empty() ? nullptr : f.record.c_str();
  c.splits = f.splits.c_str();
  c.verify_p = f.verify_p;
  return c;
}

// Body goes to stdout unless it was written to a file; the summary then goes
// to whichever stream does not carry the body.
void Emit(const ea_run_result& r, bool body_in_file) {
  if (body_in_file) {
    std::fprintf(stdout, "%s\n", r.summary);
  } else {
    std::fputs(r.output, stdout);
    if (r.summary[0] != '\0') std::fprintf(stderr, "%s\n", r.summary);
  }
}

using RunFn = ea_status (*)(const ea_run_config*, ea_run_result*);

int RunBatch(RunFn fn, const Flags& f) {
  const ea_run_config config = MakeConfig(f);
  ea_run_result result{};
  const ea_status status = fn(&config, &result);
  if (status == EA_OK) Emit(result, !f.out.empty());
  ea_run_result_free(&result);
  return Report(status);
}

void AddSourceFlags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "Dataset JSONL")->required();
  cmd->add_option("--source", f.source,
                  "ngram:<path> | replay:<path> | bridge:<url>")
      ->required();
  cmd->add_option("--scheme", f.scheme, "Sampling scheme")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Global seed")->capture_default_str();
  cmd->add_option("--out", f.out, "Output file");
  cmd->add_option("--jobs", f.jobs, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extraction-probability audits for language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ea_version()));
  Flags f;

  CLI::App* train = app.add_subcommand("train-lm", "Train an n-gram model");
  train->add_option("--corpus", f.corpus, "Corpus file")->required();
  train->add_option("--order", f.order, "Context order")->capture_default_str();
  train->add_option("--alpha", f.alpha, "Additive smoothing")
      ->capture_default_str();
  train->add_option("--vocab-size", f.vocab_size, "Vocabulary size")
      ->required();
  train->add_option("--out", f.out, "Model file")->required();

  CLI::App* audit = app.add_subcommand("audit", "Score every example");
  AddSourceFlags(audit, f);
  audit->add_option("--p", f.p_values, "Target probability (repeatable)");
  audit->add_option("--record", f.record, "Write a replay of the session");

  CLI::App* curve = app.add_subcommand("curve", "Aggregate audit results");
  curve->add_option("--results", f.results, "Audit results JSONL")->required();
  curve->add_option("--p", f.p_values, "Target probability (repeatable)");
  curve->add_option("--n-grid", f.n_grid, "log:lo:hi:count or n1,n2,...")
      ->capture_default_str();
  curve->add_option("--out", f.out, "Curve CSV");
  curve->add_option("--dataset", f.dataset,
                    "Dataset with repetition metadata for a group report");

  CLI::App* estimate =
      app.add_subcommand("estimate", "Monte-Carlo extraction estimates");
  AddSourceFlags(estimate, f);
  estimate->add_option("--trials", f.trials, "Samples per example")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  estimate->add_option("--epsilon", f.epsilon, "Hamming radius")
      ->capture_default_str();
  estimate->add_option("--n-grid", f.n_grid, "log:lo:hi:count or n1,n2,...")
      ->capture_default_str();

  CLI::App* verify =
      app.add_subcommand("verify", "Compare theoretical and empirical p");
  AddSourceFlags(verify, f);
  verify->add_option("--p", f.verify_p, "Target probability")
      ->capture_default_str();

  CLI::App* sweep =
      app.add_subcommand("sweep", "Score many prefix/suffix splits");
  AddSourceFlags(sweep, f);
  sweep->add_option("--splits", f.splits, "e.g. prefix=10..50:10,suffix=50")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (train->parsed()) {
    return Report(ea_train_lm(f.corpus.c_str(), f.order, f.alpha,
                              f.vocab_size, f.out.c_str()));
  }
  if (audit->parsed()) return RunBatch(ea_run_audit, f);
  if (estimate->parsed()) return RunBatch(ea_run_estimate, f);
  if (sweep->parsed()) return RunBatch(ea_run_sweep, f);
  if (verify->parsed()) {
    const ea_run_config config = MakeConfig(f);
    ea_run_result result{};
    const ea_status status = ea_run_verify(&config, &result);
    if (status == EA_OK) std::fprintf(stdout, "%s\n", result.summary);
    ea_run_result_free(&result);
    return Report(status);
  }
  if (curve->parsed()) {
    ea_run_result result{};
    const ea_status status = ea_run_curve(
        f.results.c_str(), f.p_values.empty() ? nullptr : f.p_values.data(),
        f.p_values.size(), f.n_grid.c_str(),
        f.out.empty() ? nullptr : f.out.c_str(),
        f.dataset.empty() ? nullptr : f.dataset.c_str(), &result);
    if (status == EA_OK) Emit(result, !f.out.empty());
    ea_run_result_free(&result);
    return Report(status);
  }
  return kExitConfig;
}
