// Copyright 2026 The Splitvault Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "splitvault/cli.hpp"
#include "splitvault/config.hpp"
#include "support.hpp"

namespace splitvault::cli {
namespace {

using splitvault::testing::TempDir;

struct Result {
  int rc = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splitvault");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::map<std::string, std::string> kv(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

TEST(ExitCodes, StableMapping) {
  EXPECT_EQ(exit_code(ErrorCode::UsageError), kExitUsage);
  EXPECT_EQ(exit_code(ErrorCode::TokenUnreachable), 24);
  EXPECT_EQ(exit_code(ErrorCode::MissingEntry), 36);
  EXPECT_EQ(exit_code(ErrorCode::ConfigError), 44);
  std::set<int> seen;
  for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (code == ErrorCode::UsageError) continue;
    EXPECT_TRUE(seen.insert(exit_code(code)).second);
    EXPECT_GE(exit_code(code), 10);
    EXPECT_LT(exit_code(code), 126);
  }
}

TEST(Cli, UsageErrors) {
  auto r = run_cli({});
  EXPECT_EQ(r.rc, kExitUsage);
  EXPECT_NE(r.err.find("error code=UsageError exit=2"), std::string::npos);
  EXPECT_EQ(run_cli({"vault", "bogus"}).rc, kExitUsage);
  EXPECT_EQ(run_cli({"keygen", "entropy", "--n", "abc"}).rc, kExitUsage);
  EXPECT_EQ(run_cli({"keygen", "audit"}).rc, kExitUsage);  // --claim is required
}

TEST(Cli, HelpListsCommands) {
  auto r = run_cli({"--help"});
  EXPECT_EQ(r.rc, kExitOk);
  for (const char* word : {"vault", "token", "keysets", "keygen"})
    EXPECT_NE(r.out.find(word), std::string::npos) << word;
}

TEST(Cli, EntropyReport) {
  auto r = run_cli({"keygen", "entropy", "--n", "25", "--passes", "4"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  auto m = kv(r.out);
  EXPECT_EQ(m["n"], "25");
  EXPECT_EQ(m["passes"], "4");
  EXPECT_GE(std::stod(m["combined_asymptotic_log2"]), 187.0);
  EXPECT_NEAR(std::stod(m["combined_exact_log2"]), 187.3804433833593, 1e-9);

  auto j = run_cli({"--json", "keygen", "entropy", "--deck", "52", "--discarded", "1"});
  ASSERT_EQ(j.rc, kExitOk) << j.err;
  auto doc = nlohmann::json::parse(j.out);
  EXPECT_EQ(doc["n"], 26);
  EXPECT_NEAR(doc["exact_log2"].get<double>(), 48.81709646967023, 1e-9);

  EXPECT_EQ(run_cli({"keygen", "entropy", "--deck", "51"}).rc,
            exit_code(ErrorCode::InvalidDeck));
}

TEST(Cli, AuditVerdicts) {
  auto fraud = run_cli({"keygen", "audit", "--generator", "toy", "--space-bits", "8", "--claim",
                        "16", "--samples", "512", "--seed", "3"});
  ASSERT_EQ(fraud.rc, kExitOk) << fraud.err;
  EXPECT_EQ(kv(fraud.out)["verdict"], "FRAUD_SUSPECTED");
  EXPECT_EQ(kv(fraud.out)["expected_collisions"], "1.99609375");

  auto honest = run_cli({"--json", "keygen", "audit", "--generator", "csprng", "--claim", "256",
                         "--samples", "2000"});
  ASSERT_EQ(honest.rc, kExitOk) << honest.err;
  auto doc = nlohmann::json::parse(honest.out);
  EXPECT_EQ(doc["verdict"], "CONSISTENT");
  EXPECT_EQ(doc["observed_collisions"], 0);

  TempDir dir;
  {
    std::ofstream keys(dir / "keys.txt");
    keys << "00ff\n00ff\n0102\n";
  }
  auto file = run_cli({"keygen", "audit", "--keys", (dir / "keys.txt").string(), "--claim", "16"});
  ASSERT_EQ(file.rc, kExitOk) << file.err;
  EXPECT_EQ(kv(file.out)["observed_collisions"], "1");
  EXPECT_EQ(kv(file.out)["samples"], "3");
}

TEST(Cli, CardKeyGoesToFileOnly) {
  TempDir dir;
  {
    std::ofstream t(dir / "deck.txt");
    t << "# four passes\n";
    for (int i = 0; i < 3; ++i) t << std::string(26, 'r') << std::string(25, 'b') << "\n";
    t << std::string(25, 'b') << std::string(25, 'r') << "\n";
  }
  auto r = run_cli({"keygen", "cards", "--transcript", (dir / "deck.txt").string(), "--out",
                    (dir / "key.bin").string()});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  EXPECT_EQ(kv(r.out)["bits"], "203");
  auto key = splitvault::testing::slurp(dir / "key.bin");
  EXPECT_EQ(key.size(), 26u);
  EXPECT_EQ(key[0], 0x00);
  EXPECT_EQ(key.back() & 0x1F, 0);

  auto short_r = run_cli({"keygen", "cards", "--transcript", (dir / "deck.txt").string(), "--bits",
                          "256", "--out", (dir / "k2.bin").string()});
  EXPECT_EQ(short_r.rc, exit_code(ErrorCode::InsufficientEntropy));
}

TEST(Cli, ConfigErrors) {
  TempDir dir;
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const int config_rc = exit_code(ErrorCode::ConfigError);
  EXPECT_EQ(run_cli({"--config", write("a.json", "{not json"), "keygen", "entropy", "--n", "3"}).rc,
            config_rc);
  EXPECT_EQ(run_cli({"--config", write("b.json", R"({"colour": 1})"), "keygen", "entropy"}).rc,
            config_rc);
  EXPECT_EQ(run_cli({"--config", write("c.json", R"({"kdf": {"iterations": "many"}})"), "keygen",
                     "entropy"}).rc,
            config_rc);
  auto json_err = run_cli({"--json", "--config", (dir / "missing.json").string(), "keygen", "entropy"});
  EXPECT_EQ(json_err.rc, config_rc);
  auto doc = nlohmann::json::parse(json_err.err);
  EXPECT_EQ(doc["error"], "ConfigError");
  EXPECT_EQ(doc["exit"], config_rc);
}

TEST(Config, ParsesAndValidates) {
  auto cfg = Config::from_json_text(
      R"({"ciphers": {"document": "aes256-ctr"}, "kdf": {"iterations": 5000},
          "token": {"address": "10.0.0.2:9000", "device_id": "phone-9"},
          "audit": {"threshold": 0.001}})");
  EXPECT_EQ(cfg.kdf_iterations, 5000u);
  EXPECT_EQ(cfg.token_address, "10.0.0.2:9000");
  EXPECT_EQ(cfg.device_id, "phone-9");
  EXPECT_DOUBLE_EQ(cfg.audit_threshold, 0.001);
  EXPECT_EQ(cfg.registry().for_role(CipherRole::Document).id(), "aes256-ctr");

  auto defaults = Config::from_json_text("{}");
  EXPECT_EQ(defaults.kdf_iterations, 200000u);
  EXPECT_EQ(defaults.registry().for_role(CipherRole::Wrap).id(), "aes128-ctr");

  EXPECT_THROW(Config::from_json_text(R"({"kdf": {"iterations": 0}})"), Error);
  EXPECT_THROW(Config::from_json_text(R"({"audit": {"threshold": 2}})"), Error);
  EXPECT_THROW(Config::from_json_text(R"({"ciphers": {"nonsense": "chacha20"}})"), Error);
  // Same id and key length for document and wrap roles is rejected.
  auto clash = Config::from_json_text(R"({"ciphers": {"wrap": "chacha20"}})");
  EXPECT_THROW(clash.registry(), Error);
}

TEST(Cli, KeysetsProvisionStatusAndCalls) {
  TempDir dir;
  const std::string d = (dir / "ks").string();
  auto prov = run_cli({"keysets", "provision", "--employees", "3", "--sets", "2", "--dir", d});
  ASSERT_EQ(prov.rc, kExitOk) << prov.err;
  EXPECT_EQ(kv(prov.out)["provisioned"], "6");
  EXPECT_EQ(run_cli({"keysets", "provision", "--employees", "3", "--sets", "2", "--dir", d}).rc,
            exit_code(ErrorCode::IoError));

  auto call = run_cli({"keysets", "call-sim", "--caller", "1", "--callee", "2", "--dir", d});
  ASSERT_EQ(call.rc, kExitOk) << call.err;
  EXPECT_EQ(kv(call.out)["outcome"], "completed");
  EXPECT_EQ(kv(call.out)["roundtrip"], "ok");
  auto failed = run_cli({"keysets", "call-sim", "--caller", "2", "--callee", "1", "--fail", "--dir", d});
  ASSERT_EQ(failed.rc, kExitOk) << failed.err;
  EXPECT_EQ(kv(failed.out)["index"], "2");
  EXPECT_EQ(kv(failed.out)["fresh_remaining"], "0");
  EXPECT_EQ(run_cli({"keysets", "call-sim", "--caller", "1", "--callee", "2", "--dir", d}).rc,
            exit_code(ErrorCode::MissingEntry));
  EXPECT_EQ(run_cli({"keysets", "call-sim", "--caller", "1", "--callee", "2", "--index", "1",
                     "--dir", d}).rc,
            exit_code(ErrorCode::AlreadyConsumed));

  auto status = run_cli({"--json", "keysets", "status", "--employee", "1", "--dir", d});
  ASSERT_EQ(status.rc, kExitOk) << status.err;
  auto doc = nlohmann::json::parse(status.out);
  ASSERT_TRUE(doc.contains("peers"));
}

}  // namespace
}  // namespace splitvault::cli
