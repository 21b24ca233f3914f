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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splitvault/bytes.hpp"
#include "splitvault/token_protocol.hpp"
#include "splitvault/token_store.hpp"

namespace splitvault::token {

/// Phone-side handle to a token (wristband or enterprise server).
///
/// Transport failures throw Error(TokenUnreachable); a DENIED response throws
/// Error(Denied); ERR throws Error(StorageFailure).
class TokenClient {
 public:
  virtual ~TokenClient() = default;

  /// Returns false if key_id exists and overwrite is not set.
  bool put(std::string_view key_id, ByteView blob, bool overwrite = false);
  std::optional<Bytes> get(std::string_view key_id);
  /// Returns false if nothing was stored under key_id.
  bool remove(std::string_view key_id);
  std::vector<std::string> list(std::string_view prefix = {});

 protected:
  /// One request/response exchange.
  virtual Frame exchange(const Frame& request) = 0;

 private:
  Frame checked(const Frame& request);
};

/// Talks the framed protocol over TCP. Connects lazily, sends HELLO first
/// when a device id is configured, and reconnects once after a broken
/// connection.
class TcpTokenClient final : public TokenClient {
 public:
  TcpTokenClient(std::string host, std::uint16_t port,
                 std::optional<std::string> device_id = std::nullopt);
  ~TcpTokenClient() override;

  TcpTokenClient(const TcpTokenClient&) = delete;
  TcpTokenClient& operator=(const TcpTokenClient&) = delete;

  void disconnect();

 protected:
  Frame exchange(const Frame& request) override;

 private:
  void connect();
  Frame roundtrip(const Frame& request);

  std::string host_;
  std::uint16_t port_;
  std::optional<std::string> device_id_;
  int fd_ = -1;
  FrameReader reader_;
};

/// In-process client bound directly to a TokenService. Frames still go
/// through encode/decode so the wire codec is exercised. The `offline` flag
/// and the fault hook simulate an unreachable token.
class LoopbackTokenClient final : public TokenClient {
 public:
  explicit LoopbackTokenClient(std::shared_ptr<TokenService> service,
                               std::optional<std::string> device_id = std::nullopt);

  void set_offline(bool offline) { offline_ = offline; }
  /// Called with each request before it is delivered; return true to make
  /// that exchange fail as unreachable.
  void set_fault(std::function<bool(const Frame&)> fault) { fault_ = std::move(fault); }

  TokenService& service() { return *service_; }

 protected:
  Frame exchange(const Frame& request) override;

 private:
  std::shared_ptr<TokenService> service_;
  std::optional<std::string> device_id_;
  Session session_;
  bool hello_sent_ = false;
  bool offline_ = false;
  std::function<bool(const Frame&)> fault_;
};

}  // namespace splitvault::token
