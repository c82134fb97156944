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

#include "extraudit/extraudit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "extraudit/commands.h"
#include "extraudit/core.h"
#include "extraudit/error.h"
#include "extraudit/extraction.h"
#include "extraudit/model_sources.h"

struct ea_dataset {
  std::vector<extraudit::TargetExample> examples;
};

struct ea_source {
  std::unique_ptr<extraudit::ModelSource> source;
};

struct ea_scheme {
  extraudit::SamplingScheme scheme;
};

namespace {

using extraudit::Error;
using extraudit::ErrorCode;

thread_local std::string last_error;

ea_status Fail(ea_status status, const char* message) {
  last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
ea_status Guard(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return EA_OK;
  } catch (const Error& e) {
    return Fail(static_cast<ea_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(EA_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(EA_INTERNAL, e.what());
  } catch (...) {
    return Fail(EA_INTERNAL, "unknown exception");
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::string Str(const char* s) { return s == nullptr ? std::string() : s; }

void Require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

extraudit::RunConfig ToRunConfig(const ea_run_config* c) {
  Require(c != nullptr, "config is null");
  extraudit::RunConfig config;
  config.dataset_path = Str(c->dataset_path);
  config.source_spec = Str(c->source_spec);
  if (c->scheme != nullptr) config.scheme = c->scheme;
  if (c->p_values != nullptr) {
    config.p_values.assign(c->p_values, c->p_values + c->num_p_values);
  }
  if (c->n_grid != nullptr) config.n_grid_spec = c->n_grid;
  config.seed = c->seed;
  config.trials = c->trials;
  config.epsilon = c->epsilon;
  config.out_path = Str(c->out_path);
  config.jobs = c->jobs == 0 ? 1 : c->jobs;
  config.record_path = Str(c->record_path);
  config.splits_spec = Str(c->splits);
  config.verify_p = c->verify_p;
  return config;
}

void FillResult(const extraudit::CommandResult& r, ea_run_result* out) {
  char* output = CopyString(r.output);
  char* summary = nullptr;
  try {
    summary = CopyString(r.summary);
  } catch (...) {
    std::free(output);
    throw;
  }
  out->output = output;
  out->summary = summary;
  out->records = r.records;
  out->errors = r.errors;
  out->passed = r.passed ? 1 : 0;
}

template <typename Fn>
ea_status RunCommand(const ea_run_config* config, ea_run_result* result,
                     Fn&& fn) {
  return Guard([&] {
    Require(result != nullptr, "result is null");
    *result = ea_run_result{};
    FillResult(fn(ToRunConfig(config)), result);
  });
}

}  // namespace

extern "C" {

const char* ea_version(void) { return "0.1.0"; }

const char* ea_status_name(ea_status status) {
  return extraudit::ErrorCodeName(static_cast<ErrorCode>(status)).data();
}

const char* ea_last_error(void) { return last_error.c_str(); }

void ea_string_free(char* str) { std::free(str); }

ea_status ea_dataset_load(const char* path, ea_dataset** out) {
  return Guard([&] {
    Require(path != nullptr && out != nullptr, "null argument");
    auto dataset = std::make_unique<ea_dataset>();
    dataset->examples = extraudit::LoadDataset(path);
    *out = dataset.release();
  });
}

ea_status ea_dataset_parse(const char* jsonl, ea_dataset** out) {
  return Guard([&] {
    Require(jsonl != nullptr && out != nullptr, "null argument");
    auto dataset = std::make_unique<ea_dataset>();
    dataset->examples = extraudit::ParseDataset(jsonl);
    *out = dataset.release();
  });
}

size_t ea_dataset_size(const ea_dataset* dataset) {
  return dataset == nullptr ? 0 : dataset->examples.size();
}

const char* ea_dataset_id(const ea_dataset* dataset, size_t index) {
  if (dataset == nullptr || index >= dataset->examples.size()) return nullptr;
  return dataset->examples[index].id.c_str();
}

void ea_dataset_free(ea_dataset* dataset) { delete dataset; }

ea_status ea_source_open(const char* spec, ea_source** out) {
  return Guard([&] {
    Require(spec != nullptr && out != nullptr, "null argument");
    auto source = std::make_unique<ea_source>();
    source->source = extraudit::OpenSource(spec);
    *out = source.release();
  });
}

uint32_t ea_source_vocab_size(const ea_source* source) {
  return source == nullptr ? 0 : source->source->vocab_size();
}

void ea_source_free(ea_source* source) { delete source; }

ea_status ea_scheme_parse(const char* text, ea_scheme** out) {
  return Guard([&] {
    Require(text != nullptr && out != nullptr, "null argument");
    *out = new ea_scheme{extraudit::SamplingScheme::Parse(text)};
  });
}

ea_status ea_scheme_to_string(const ea_scheme* scheme, char** out) {
  return Guard([&] {
    Require(scheme != nullptr && out != nullptr, "null argument");
    *out = CopyString(scheme->scheme.ToString());
  });
}

void ea_scheme_free(ea_scheme* scheme) { delete scheme; }

ea_status ea_n_for_p(double p_z, double p, uint64_t* n, int* extractable) {
  return Guard([&] {
    Require(n != nullptr && extractable != nullptr, "null argument");
    const std::optional<std::uint64_t> result = extraudit::NForP(p_z, p);
    *extractable = result.has_value() ? 1 : 0;
    if (result) *n = *result;
  });
}

ea_status ea_p_for_n(double p_z, uint64_t n, double* p) {
  return Guard([&] {
    Require(p != nullptr, "null argument");
    *p = extraudit::PForN(p_z, n);
  });
}

ea_status ea_expected_queries(double p_z, uint64_t* n) {
  return Guard([&] {
    Require(n != nullptr, "null argument");
    *n = extraudit::ExpectedQueries(p_z);
  });
}

ea_status ea_is_np_extractable(double p_z, uint64_t n, double p,
                               int* extractable) {
  return Guard([&] {
    Require(extractable != nullptr, "null argument");
    *extractable =
        extraudit::IsNpExtractable(p_z, extraudit::NpPoint::Make(n, p)) ? 1
                                                                        : 0;
  });
}

ea_status ea_hamming_ball_size(uint64_t suffix_len, uint64_t vocab_size,
                               uint64_t epsilon, char** out) {
  return Guard([&] {
    Require(out != nullptr, "null argument");
    *out = CopyString(
        extraudit::HammingBallSize(suffix_len, vocab_size, epsilon).str());
  });
}

ea_status ea_suffix_logprob(const ea_source* source, const ea_dataset* dataset,
                            size_t index, const ea_scheme* scheme,
                            ea_suffix_result* out) {
  return Guard([&] {
    Require(source != nullptr && dataset != nullptr && scheme != nullptr &&
                out != nullptr,
            "null argument");
    Require(index < dataset->examples.size(), "example index out of range");
    const extraudit::SuffixProbability sp = extraudit::SuffixLogProb(
        *source->source, dataset->examples[index], scheme->scheme);
    out->p_z = sp.p_z;
    out->log_p_z = sp.total_logprob;
    out->blocked_index =
        sp.blocked_index ? static_cast<int64_t>(*sp.blocked_index) : -1;
  });
}

void ea_run_config_init(ea_run_config* config) {
  if (config == nullptr) return;
  *config = ea_run_config{};
  config->trials = 1000;
  config->jobs = 1;
  config->verify_p = 0.5;
}

void ea_run_result_free(ea_run_result* result) {
  if (result == nullptr) return;
  std::free(result->output);
  std::free(result->summary);
  *result = ea_run_result{};
}

ea_status ea_train_lm(const char* corpus_path, uint32_t order, double alpha,
                      uint32_t vocab_size, const char* out_path) {
  return Guard([&] {
    Require(corpus_path != nullptr && out_path != nullptr, "null argument");
    extraudit::TrainLanguageModel(corpus_path, order, alpha, vocab_size,
                                  out_path);
  });
}

ea_status ea_run_audit(const ea_run_config* config, ea_run_result* result) {
  return RunCommand(config, result, [](const extraudit::RunConfig& c) {
    return extraudit::RunAudit(c);
  });
}

ea_status ea_run_curve(const char* results_path, const double* p_values,
                       size_t num_p_values, const char* n_grid,
                       const char* out_csv, const char* dataset_path,
                       ea_run_result* result) {
  return Guard([&] {
    Require(results_path != nullptr && result != nullptr, "null argument");
    *result = ea_run_result{};
    std::vector<double> ps(std::begin(extraudit::kDefaultPValues),
                           std::end(extraudit::kDefaultPValues));
    if (p_values != nullptr) ps.assign(p_values, p_values + num_p_values);
    const std::string grid = n_grid != nullptr
                                 ? std::string(n_grid)
                                 : std::string(extraudit::kDefaultNGrid);
    FillResult(extraudit::RunCurve(results_path, ps, grid, Str(out_csv),
                                   Str(dataset_path)),
               result);
  });
}

ea_status ea_run_estimate(const ea_run_config* config, ea_run_result* result) {
  return RunCommand(config, result, [](const extraudit::RunConfig& c) {
    return extraudit::RunEstimate(c);
  });
}

ea_status ea_run_verify(const ea_run_config* config, ea_run_result* result) {
  return RunCommand(config, result, [](const extraudit::RunConfig& c) {
    return extraudit::RunVerify(c);
  });
}

ea_status ea_run_sweep(const ea_run_config* config, ea_run_result* result) {
  return RunCommand(config, result, [](const extraudit::RunConfig& c) {
    return extraudit::RunSweep(c);
  });
}

}  // extern "C"
