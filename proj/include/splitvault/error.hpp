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

#include <stdexcept>
#include <string>
#include <string_view>

namespace splitvault {

enum class ErrorCode {
  // secret_split / key material
  ZeroizedMaterial,
  RandomnessExhausted,
  LengthMismatch,
  // cipher_suite
  WrongKeyLength,
  UnknownCipher,
  CipherMismatch,
  DuplicateCipherId,
  RoleConflict,
  InsecureCipher,
  // document_vault
  BadPassword,
  CorruptStore,
  VaultLocked,
  DuplicateDocId,
  UnknownDocument,
  TokenUnreachable,
  TokenRecordMissing,
  AlreadyDestroyed,
  // token_store
  BindFailure,
  StoreCorrupt,
  ProtocolError,
  NotFound,
  Denied,
  UnknownDevice,
  StorageFailure,
  // call_keysets
  InvalidParameters,
  AlreadyConsumed,
  MissingEntry,
  SessionClosed,
  // keygen_audit
  MalformedPass,
  EmptyInput,
  InvalidDeck,
  GeneratorFailure,
  InsufficientEntropy,
  // cli / config
  UsageError,
  ConfigError,
  IoError,
};

/// Stable machine-readable name, used in CLI error lines.
std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace splitvault
