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

#include "splitvault/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splitvault/error.hpp"

namespace splitvault {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::set<std::string> allowed) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::ConfigError, std::string(where) + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) {
      throw Error(ErrorCode::ConfigError, "unknown config key " + std::string(where) + "." + key);
    }
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad value for ") + key + ": " + e.what());
  }
}

}  // namespace

Config Config::from_json_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config", {"ciphers", "kdf", "token", "vault", "keysets", "audit", "test_mode"});

  Config cfg;
  if (doc.contains("ciphers")) {
    const auto& c = doc["ciphers"];
    check_keys(c, "ciphers", {"document", "wrap", "call", "callwrap"});
    for (const auto& [name, value] : c.items()) {
      if (!value.is_string()) throw Error(ErrorCode::ConfigError, "cipher ids must be strings");
      cfg.ciphers[*parse_role(name)] = value.get<std::string>();
    }
  }
  if (doc.contains("kdf")) {
    check_keys(doc["kdf"], "kdf", {"iterations"});
    read_into(doc["kdf"], "iterations", cfg.kdf_iterations);
    if (cfg.kdf_iterations == 0) throw Error(ErrorCode::ConfigError, "kdf.iterations must be positive");
  }
  if (doc.contains("token")) {
    const auto& t = doc["token"];
    check_keys(t, "token", {"address", "device_id", "store", "mode"});
    read_into(t, "address", cfg.token_address);
    if (t.contains("device_id") && !t["device_id"].is_null()) {
      std::string id;
      read_into(t, "device_id", id);
      cfg.device_id = id;
    }
    std::string store = cfg.token_store.string();
    read_into(t, "store", store);
    cfg.token_store = store;
    read_into(t, "mode", cfg.token_mode);
  }
  if (doc.contains("vault")) {
    check_keys(doc["vault"], "vault", {"path"});
    std::string path = cfg.vault_path.string();
    read_into(doc["vault"], "path", path);
    cfg.vault_path = path;
  }
  if (doc.contains("keysets")) {
    check_keys(doc["keysets"], "keysets", {"dir"});
    std::string dir = cfg.keysets_dir.string();
    read_into(doc["keysets"], "dir", dir);
    cfg.keysets_dir = dir;
  }
  if (doc.contains("audit")) {
    check_keys(doc["audit"], "audit", {"threshold"});
    read_into(doc["audit"], "threshold", cfg.audit_threshold);
    if (!(cfg.audit_threshold > 0 && cfg.audit_threshold < 1)) {
      throw Error(ErrorCode::ConfigError, "audit.threshold must be in (0, 1)");
    }
  }
  read_into(doc, "test_mode", cfg.test_mode);
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

CipherRegistry Config::registry() const {
  auto reg = CipherRegistry::with_defaults(test_mode);
  reg.rebind(ciphers);
  return reg;
}

}  // namespace splitvault
