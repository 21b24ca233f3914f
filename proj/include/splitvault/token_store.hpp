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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "splitvault/bytes.hpp"
#include "splitvault/token_protocol.hpp"

namespace splitvault::token {

/// Durable key -> blob map backed by an append-only log.
///
/// File layout: "STOK" version:u8, then TLV records:
///   0x40 PUT    { 0x41 key, 0x42 blob }
///   0x43 DELETE { 0x41 key }
/// A truncated trailing record (crash mid-append) is cut off on open; any
/// other malformation is StoreCorrupt. Every mutation is fdatasync'ed before
/// the call returns. Deleting a key zero-fills its blob bytes in place before
/// the tombstone is appended; compact() rewrites only live records.
///
/// Not internally synchronized.
class BlobStore {
 public:
  /// Opens or creates the log at `path`.
  static BlobStore open(const std::filesystem::path& path);
  /// Volatile store for tests and loopback use.
  static BlobStore in_memory();

  BlobStore(BlobStore&&) noexcept;
  BlobStore& operator=(BlobStore&&) noexcept;
  ~BlobStore();

  /// Returns false (and stores nothing) if key exists and !overwrite.
  bool put(const std::string& key, ByteView blob, bool overwrite);
  std::optional<Bytes> get(const std::string& key) const;
  bool remove(const std::string& key);
  std::vector<std::string> list(std::string_view prefix = {}) const;
  std::size_t size() const { return entries_.size(); }

  void compact();
  bool persistent() const { return fd_ >= 0; }
  const std::filesystem::path& path() const { return path_; }
  /// Bytes occupied by superseded/deleted records.
  std::uint64_t dead_bytes() const { return dead_bytes_; }

 private:
  struct Entry {
    Bytes blob;
    std::uint64_t record_offset = 0;
    std::uint64_t record_size = 0;
    std::uint64_t blob_offset = 0;
  };

  BlobStore() = default;
  void load();
  std::uint64_t append(ByteView record);
  void sync();
  void maybe_compact();

  std::filesystem::path path_;
  int fd_ = -1;
  std::uint64_t end_ = 0;
  std::uint64_t dead_bytes_ = 0;
  std::map<std::string, Entry, std::less<>> entries_;
};

enum class DeviceStatus { Active, Revoked };

/// Enterprise-mode device registry: one "device_id active|revoked" line per
/// device, rewritten atomically (temp + rename). Administered locally, never
/// over the wire.
class DeviceRegistry {
 public:
  DeviceRegistry() = default;
  explicit DeviceRegistry(std::filesystem::path path);

  /// Conventional location next to a token store log.
  static std::filesystem::path path_for_store(const std::filesystem::path& store);

  /// Re-reads the file if it changed on disk since the last load. Returns
  /// true if a reload happened.
  bool refresh();

  std::optional<DeviceStatus> status(std::string_view device_id) const;
  /// Adds or re-activates a device.
  void enroll(const std::string& device_id);
  /// Throws Error(UnknownDevice) for devices never enrolled.
  void revoke(const std::string& device_id);
  std::map<std::string, DeviceStatus> devices() const {
    return {devices_.begin(), devices_.end()};
  }

 private:
  void load();
  void save() const;

  std::filesystem::path path_;
  std::map<std::string, DeviceStatus, std::less<>> devices_;
  std::optional<std::filesystem::file_time_type> stamp_;
  std::uintmax_t size_ = 0;
};

enum class ServiceMode { Wristband, Enterprise };

std::string_view mode_name(ServiceMode mode);
std::optional<ServiceMode> parse_mode(std::string_view name);

/// Per-connection protocol state.
struct Session {
  std::optional<std::string> device_id;
};

/// Request handling independent of transport. Thread-safe; every frame is
/// handled under one lock, so operations on a key_id are linearizable, and
/// the device registry is consulted on every frame.
class TokenService {
 public:
  TokenService(ServiceMode mode, BlobStore store, DeviceRegistry registry = {});

  Frame handle(Session& session, const Frame& request);

  ServiceMode mode() const { return mode_; }

  // Local administration.
  void enroll(const std::string& device_id);
  void revoke(const std::string& device_id);

  /// Raw view of stored keys (namespaced in enterprise mode); tests only.
  std::vector<std::string> stored_keys() const;
  std::optional<Bytes> stored_blob(const std::string& storage_key) const;

 private:
  Frame dispatch(Session& session, const Frame& request);
  std::string storage_key(const Session& session, std::string_view key_id) const;

  ServiceMode mode_;
  mutable std::mutex mu_;
  BlobStore store_;
  DeviceRegistry registry_;
};

/// Separator between device id and key id in enterprise-mode storage keys.
inline constexpr char kNamespaceSeparator = '\x1f';

/// TCP front end: one thread per connection, single request/response frames.
class TokenServer {
 public:
  explicit TokenServer(std::shared_ptr<TokenService> service);
  ~TokenServer();

  TokenServer(const TokenServer&) = delete;
  TokenServer& operator=(const TokenServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and starts accepting. Throws
  /// Error(BindFailure).
  void start(const std::string& host, std::uint16_t port);
  void stop();

  std::uint16_t port() const { return port_; }
  TokenService& service() { return *service_; }

 private:
  void accept_loop();
  void serve_connection(int fd);

  std::shared_ptr<TokenService> service_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  std::mutex conn_mu_;
  std::list<Worker> workers_;
  std::vector<int> conn_fds_;
};

/// Splits "host:port". Throws Error(UsageError).
std::pair<std::string, std::uint16_t> parse_address(std::string_view address);

}  // namespace splitvault::token
