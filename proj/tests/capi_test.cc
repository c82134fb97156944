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

// Exercises the shared library through its C header only.

#include "extraudit/extraudit.h"

#include <stdlib.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include <gtest/gtest.h>

namespace {

class CApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "ea_capi_XXXXXX").string();
    dir_ = ::mkdtemp(tmpl.data());
    Write("corpus.txt", "0 1 2 3 0 1 2 3\n0 1 2 3 0 1 2 3\n3 2 1 0\n");
    Write("data.jsonl",
          R"({"id":"a","tokens":[0,1,2,3],"prefix_len":2,"suffix_len":2})"
          "\n"
          R"({"id":"b","tokens":[3,2,1,0],"prefix_len":1,"suffix_len":3})"
          "\n");
    ASSERT_EQ(ea_train_lm(Path("corpus.txt").c_str(), 2, 0.1, 4,
                          Path("model.json").c_str()),
              EA_OK)
        << ea_last_error();
    source_spec_ = "ngram:" + Path("model.json");
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string Path(const std::string& name) const { return dir_ + "/" + name; }
  void Write(const std::string& name, const std::string& text) const {
    std::ofstream(Path(name)) << text;
  }

  std::string dir_;
  std::string source_spec_;
};

TEST(CApiBasics, VersionAndStatusNames) {
  EXPECT_GT(std::strlen(ea_version()), 0u);
  EXPECT_STREQ(ea_status_name(EA_OK), "ok");
  EXPECT_STREQ(ea_status_name(EA_IO), "io-error");
  EXPECT_STREQ(ea_status_name(EA_BRIDGE_UNREACHABLE), "bridge-unreachable");
}

TEST(CApiBasics, ClosedForm) {
  uint64_t n = 0;
  int ok = -1;
  ASSERT_EQ(ea_n_for_p(0.162, 0.9, &n, &ok), EA_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_EQ(n, 14u);
  n = 77;
  ASSERT_EQ(ea_n_for_p(0.0, 0.9, &n, &ok), EA_OK);
  EXPECT_EQ(ok, 0);
  EXPECT_EQ(n, 77u);
  double p = 0;
  ASSERT_EQ(ea_p_for_n(0.5, 2, &p), EA_OK);
  EXPECT_EQ(p, 0.75);
  ASSERT_EQ(ea_expected_queries(0.162, &n), EA_OK);
  EXPECT_EQ(n, 7u);
  EXPECT_EQ(ea_expected_queries(0.0, &n), EA_NOT_EXTRACTABLE);
  ASSERT_EQ(ea_is_np_extractable(0.5, 2, 0.75, &ok), EA_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_EQ(ea_n_for_p(0.5, 1.0, &n, &ok), EA_INVALID_ARGUMENT);
  EXPECT_NE(std::strlen(ea_last_error()), 0u);
  EXPECT_EQ(ea_n_for_p(0.5, 0.5, nullptr, &ok), EA_INVALID_ARGUMENT);
}

TEST(CApiBasics, BallSize) {
  char* text = nullptr;
  ASSERT_EQ(ea_hamming_ball_size(50, 32000, 2, &text), EA_OK);
  EXPECT_STREQ(text, "1254400000000");
  ea_string_free(text);
  EXPECT_EQ(ea_hamming_ball_size(2, 10, 3, &text), EA_INVALID_ARGUMENT);
}

TEST(CApiBasics, Schemes) {
  ea_scheme* s = nullptr;
  ASSERT_EQ(ea_scheme_parse("topq:q=0.9,T=0.7", &s), EA_OK);
  char* text = nullptr;
  ASSERT_EQ(ea_scheme_to_string(s, &text), EA_OK);
  EXPECT_STREQ(text, "topq:q=0.9,T=0.7");
  ea_string_free(text);
  ea_scheme_free(s);
  s = nullptr;
  EXPECT_EQ(ea_scheme_parse("topk:k=0", &s), EA_INVALID_ARGUMENT);
  EXPECT_EQ(s, nullptr);
}

TEST(CApiBasics, LastErrorIsPerThread) {
  uint64_t n = 0;
  int ok = 0;
  ASSERT_EQ(ea_n_for_p(0.5, 2.0, &n, &ok), EA_INVALID_ARGUMENT);
  const std::string here = ea_last_error();
  std::string there;
  std::thread([&] { there = ea_last_error(); }).join();
  EXPECT_FALSE(here.empty());
  EXPECT_TRUE(there.empty());
}

TEST_F(CApiTest, DatasetAndScoring) {
  ea_dataset* data = nullptr;
  ASSERT_EQ(ea_dataset_load(Path("data.jsonl").c_str(), &data), EA_OK);
  EXPECT_EQ(ea_dataset_size(data), 2u);
  EXPECT_STREQ(ea_dataset_id(data, 1), "b");
  EXPECT_EQ(ea_dataset_id(data, 2), nullptr);

  ea_source* src = nullptr;
  ASSERT_EQ(ea_source_open(source_spec_.c_str(), &src), EA_OK)
      << ea_last_error();
  EXPECT_EQ(ea_source_vocab_size(src), 4u);

  ea_scheme* temp = nullptr;
  ASSERT_EQ(ea_scheme_parse("temp:T=1.0", &temp), EA_OK);
  ea_suffix_result r{};
  ASSERT_EQ(ea_suffix_logprob(src, data, 0, temp, &r), EA_OK);
  EXPECT_GT(r.p_z, 0.0);
  EXPECT_NEAR(std::log(r.p_z), r.log_p_z, 1e-12);
  EXPECT_EQ(r.blocked_index, -1);

  ea_scheme* greedy = nullptr;
  ASSERT_EQ(ea_scheme_parse("greedy", &greedy), EA_OK);
  ASSERT_EQ(ea_suffix_logprob(src, data, 1, greedy, &r), EA_OK);
  if (r.p_z == 0.0) {
    EXPECT_GE(r.blocked_index, 0);
    EXPECT_TRUE(std::isinf(r.log_p_z));
  } else {
    EXPECT_EQ(r.p_z, 1.0);
  }
  EXPECT_EQ(ea_suffix_logprob(src, data, 5, greedy, &r), EA_INVALID_ARGUMENT);

  ea_scheme_free(greedy);
  ea_scheme_free(temp);
  ea_source_free(src);
  ea_dataset_free(data);
}

TEST_F(CApiTest, ParseErrors) {
  ea_dataset* data = nullptr;
  EXPECT_EQ(ea_dataset_parse("{\"id\":1}\n", &data), EA_MALFORMED_INPUT);
  EXPECT_EQ(ea_dataset_parse("", &data), EA_EMPTY_INPUT);
  EXPECT_EQ(ea_dataset_load(Path("missing.jsonl").c_str(), &data), EA_IO);
  EXPECT_EQ(data, nullptr);
  ea_source* src = nullptr;
  EXPECT_EQ(ea_source_open("bridge:http://127.0.0.1:1", &src),
            EA_BRIDGE_UNREACHABLE);
  EXPECT_EQ(ea_source_open("carrier-pigeon:x", &src), EA_INVALID_ARGUMENT);
}

TEST_F(CApiTest, BatchCommands) {
  ea_run_config config;
  ea_run_config_init(&config);
  EXPECT_EQ(config.trials, 1000u);
  EXPECT_EQ(config.jobs, 1u);
  EXPECT_EQ(config.verify_p, 0.5);
  const std::string data = Path("data.jsonl");
  const std::string out = Path("audit.jsonl");
  config.dataset_path = data.c_str();
  config.source_spec = source_spec_.c_str();
  config.scheme = "topk:k=2";
  config.out_path = out.c_str();
  config.seed = 3;

  ea_run_result result{};
  ASSERT_EQ(ea_run_audit(&config, &result), EA_OK) << ea_last_error();
  EXPECT_EQ(result.records, 2u);
  EXPECT_NE(std::strstr(result.output, "\"id\":\"a\""), nullptr);
  ea_run_result_free(&result);
  EXPECT_EQ(result.output, nullptr);

  const double ps[] = {0.5, 0.9};
  const std::string csv = Path("curve.csv");
  ASSERT_EQ(ea_run_curve(out.c_str(), ps, 2, "1,10,100", csv.c_str(), nullptr,
                         &result),
            EA_OK)
      << ea_last_error();
  EXPECT_EQ(std::strncmp(result.output, "p,n,rate", 8), 0);
  ea_run_result_free(&result);

  config.out_path = nullptr;
  config.scheme = "temp:T=1.0";
  config.trials = 200;
  config.epsilon = 1;
  ASSERT_EQ(ea_run_estimate(&config, &result), EA_OK) << ea_last_error();
  EXPECT_EQ(result.records, 2u);
  ea_run_result_free(&result);

  config.splits = "prefix=1,suffix=1..3";
  ASSERT_EQ(ea_run_sweep(&config, &result), EA_OK) << ea_last_error();
  EXPECT_EQ(result.records + result.errors, 6u);
  ea_run_result_free(&result);

  config.dataset_path = nullptr;
  EXPECT_EQ(ea_run_audit(&config, &result), EA_INVALID_ARGUMENT);
  EXPECT_EQ(ea_run_audit(nullptr, &result), EA_INVALID_ARGUMENT);
}

}  // namespace
