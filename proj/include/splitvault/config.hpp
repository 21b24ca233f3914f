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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "splitvault/cipher_suite.hpp"

namespace splitvault {

/// Runtime settings shared by all CLI commands. Loaded from a JSON file; any
/// key may be omitted. Defaults:
///
///   {
///     "ciphers": {"document": "chacha20", "wrap": "aes128-ctr",
///                 "call": "aes256-ctr", "callwrap": "aes128-ctr"},
///     "kdf": {"iterations": 200000},
///     "token": {"address": "127.0.0.1:7441", "device_id": null,
///               "store": "token.log", "mode": "wristband"},
///     "vault": {"path": "splitvault.vault"},
///     "keysets": {"dir": "keysets"},
///     "audit": {"threshold": 1e-6},
///     "test_mode": false
///   }
struct Config {
  std::map<CipherRole, std::string> ciphers{
      {CipherRole::Document, "chacha20"},
      {CipherRole::Wrap, "aes128-ctr"},
      {CipherRole::Call, "aes256-ctr"},
      {CipherRole::CallWrap, "aes128-ctr"},
  };
  std::uint32_t kdf_iterations = 200000;
  std::string token_address = "127.0.0.1:7441";
  std::optional<std::string> device_id;
  std::filesystem::path token_store = "token.log";
  std::string token_mode = "wristband";
  std::filesystem::path vault_path = "splitvault.vault";
  std::filesystem::path keysets_dir = "keysets";
  double audit_threshold = 1e-6;
  bool test_mode = false;

  /// Throws Error(ConfigError) for unreadable files, malformed JSON, unknown
  /// keys or wrongly typed values; cipher binding errors propagate from
  /// registry().
  static Config from_json_text(std::string_view text);
  static Config load(const std::filesystem::path& path);

  /// Default registry with this config's role bindings applied.
  CipherRegistry registry() const;
};

inline constexpr const char* kConfigEnv = "SPLITVAULT_CONFIG";
inline constexpr const char* kPasswordEnv = "SPLITVAULT_PASSWORD";

}  // namespace splitvault
