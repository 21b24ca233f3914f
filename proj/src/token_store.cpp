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

#include "splitvault/token_store.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splitvault/error.hpp"

namespace splitvault::token {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'T', 'O', 'K'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 5;

constexpr std::uint8_t kTagPut = 0x40;
constexpr std::uint8_t kTagKey = 0x41;
constexpr std::uint8_t kTagBlob = 0x42;
constexpr std::uint8_t kTagDelete = 0x43;

constexpr std::uint64_t kCompactMinDead = 64 * 1024;

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(ErrorCode::StorageFailure, what + ": " + std::strerror(errno));
}

Bytes header_bytes() {
  Bytes h(kMagic, kMagic + 4);
  h.push_back(kVersion);
  return h;
}

Bytes put_record(std::string_view key, ByteView blob) {
  Bytes inner;
  put_tlv(inner, kTagKey, as_bytes(key));
  put_tlv(inner, kTagBlob, blob);
  Bytes rec;
  put_tlv(rec, kTagPut, inner);
  return rec;
}

Bytes delete_record(std::string_view key) {
  Bytes inner;
  put_tlv(inner, kTagKey, as_bytes(key));
  Bytes rec;
  put_tlv(rec, kTagDelete, inner);
  return rec;
}

// Offset of the blob value within a PUT record for `key`.
std::uint64_t blob_offset_in_record(std::size_t key_len) { return 5 + 5 + key_len + 5; }

void write_all_at(int fd, ByteView data, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::pwrite(fd, data.data() + done, data.size() - done,
                         static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("write to token store failed");
    }
    done += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& file) {
  auto dir = file.parent_path();
  if (dir.empty()) dir = ".";
  int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

BlobStore BlobStore::open(const fs::path& path) {
  BlobStore store;
  store.path_ = path;
  if (!fs::exists(path)) {
    // Create with the header via temp + rename so a crash never leaves a
    // half-written header behind.
    fs::path tmp = path;
    tmp += ".init";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      auto h = header_bytes();
      out.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
      if (!out) throw Error(ErrorCode::StorageFailure, "cannot create " + path.string());
    }
    fs::rename(tmp, path);
    fsync_dir(path);
  }
  store.fd_ = ::open(path.c_str(), O_RDWR);
  if (store.fd_ < 0) io_fail("cannot open token store " + path.string());
  store.load();
  store.maybe_compact();
  return store;
}

BlobStore BlobStore::in_memory() { return BlobStore(); }

BlobStore::BlobStore(BlobStore&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      end_(other.end_),
      dead_bytes_(other.dead_bytes_),
      entries_(std::move(other.entries_)) {}

BlobStore& BlobStore::operator=(BlobStore&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    end_ = other.end_;
    dead_bytes_ = other.dead_bytes_;
    entries_ = std::move(other.entries_);
  }
  return *this;
}

BlobStore::~BlobStore() {
  for (auto& [key, entry] : entries_) secure_wipe(entry.blob);
  if (fd_ >= 0) ::close(fd_);
}

void BlobStore::load() {
  Bytes data = read_file(path_);
  if (data.size() < kHeaderSize || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::StoreCorrupt, "not a token store: " + path_.string());
  }
  if (data[4] != kVersion) {
    throw Error(ErrorCode::StoreCorrupt, "unsupported token store version");
  }
  std::uint64_t pos = kHeaderSize;
  while (pos < data.size()) {
    std::uint64_t remaining = data.size() - pos;
    if (remaining < 5) break;
    ByteReader hdr(ByteView(data).subspan(pos, 5));
    std::uint8_t tag = hdr.u8();
    std::uint32_t len = hdr.u32();
    if (remaining < 5 + std::uint64_t{len}) break;  // torn tail
    ByteView body = ByteView(data).subspan(pos + 5, len);
    std::uint64_t record_size = 5 + std::uint64_t{len};
    try {
      auto items = parse_tlv(body);
      if (tag == kTagPut) {
        if (items.size() != 2 || items[0].tag != kTagKey || items[1].tag != kTagBlob) {
          throw Error(ErrorCode::StoreCorrupt, "malformed PUT record");
        }
        std::string key = to_string(items[0].value);
        if (auto it = entries_.find(key); it != entries_.end()) {
          dead_bytes_ += it->second.record_size;
        }
        Entry e;
        e.blob.assign(items[1].value.begin(), items[1].value.end());
        e.record_offset = pos;
        e.record_size = record_size;
        e.blob_offset = pos + blob_offset_in_record(key.size());
        entries_[key] = std::move(e);
      } else if (tag == kTagDelete) {
        if (items.size() != 1 || items[0].tag != kTagKey) {
          throw Error(ErrorCode::StoreCorrupt, "malformed DELETE record");
        }
        std::string key = to_string(items[0].value);
        if (auto it = entries_.find(key); it != entries_.end()) {
          dead_bytes_ += it->second.record_size;
          entries_.erase(it);
        }
        dead_bytes_ += record_size;
      } else {
        throw Error(ErrorCode::StoreCorrupt, "unknown record tag in token store");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::StoreCorrupt) throw;
      throw Error(ErrorCode::StoreCorrupt, std::string("corrupt token store record: ") + e.what());
    }
    pos += record_size;
  }
  if (pos < data.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(pos)) != 0) io_fail("cannot truncate torn record");
    sync();
  }
  end_ = pos;
  secure_wipe(data);
}

std::uint64_t BlobStore::append(ByteView record) {
  std::uint64_t at = end_;
  write_all_at(fd_, record, at);
  end_ += record.size();
  return at;
}

void BlobStore::sync() {
  if (fd_ >= 0 && ::fdatasync(fd_) != 0) io_fail("fdatasync on token store failed");
}

bool BlobStore::put(const std::string& key, ByteView blob, bool overwrite) {
  auto it = entries_.find(key);
  if (it != entries_.end() && !overwrite) return false;

  Entry e;
  e.blob.assign(blob.begin(), blob.end());
  if (fd_ >= 0) {
    Bytes rec = put_record(key, blob);
    e.record_offset = append(rec);
    e.record_size = rec.size();
    e.blob_offset = e.record_offset + blob_offset_in_record(key.size());
    if (it != entries_.end()) {
      Bytes zeros(it->second.blob.size(), 0);
      write_all_at(fd_, zeros, it->second.blob_offset);
      dead_bytes_ += it->second.record_size;
    }
    sync();
  }
  if (it != entries_.end()) secure_wipe(it->second.blob);
  entries_[key] = std::move(e);
  maybe_compact();
  return true;
}

std::optional<Bytes> BlobStore::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.blob;
}

bool BlobStore::remove(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  if (fd_ >= 0) {
    Bytes zeros(it->second.blob.size(), 0);
    write_all_at(fd_, zeros, it->second.blob_offset);
    Bytes rec = delete_record(key);
    append(rec);
    dead_bytes_ += it->second.record_size + rec.size();
    sync();
  }
  secure_wipe(it->second.blob);
  entries_.erase(it);
  maybe_compact();
  return true;
}

std::vector<std::string> BlobStore::list(std::string_view prefix) const {
  std::vector<std::string> keys;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    keys.push_back(it->first);
  }
  return keys;
}

void BlobStore::maybe_compact() {
  if (fd_ >= 0 && dead_bytes_ > kCompactMinDead && dead_bytes_ * 2 > end_) compact();
}

void BlobStore::compact() {
  if (fd_ < 0) {
    dead_bytes_ = 0;
    return;
  }
  fs::path tmp = path_;
  tmp += ".compact";
  int out = ::open(tmp.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0600);
  if (out < 0) io_fail("cannot create compaction file");

  Bytes image = header_bytes();
  std::map<std::string, Entry, std::less<>> rebuilt;
  for (const auto& [key, entry] : entries_) {
    Entry e;
    e.blob = entry.blob;
    e.record_offset = image.size();
    Bytes rec = put_record(key, entry.blob);
    e.record_size = rec.size();
    e.blob_offset = e.record_offset + blob_offset_in_record(key.size());
    put_raw(image, rec);
    rebuilt.emplace(key, std::move(e));
  }
  try {
    write_all_at(out, image, 0);
  } catch (...) {
    ::close(out);
    throw;
  }
  secure_wipe(image);
  if (::fsync(out) != 0) {
    ::close(out);
    io_fail("fsync of compaction file failed");
  }
  fs::rename(tmp, path_);
  fsync_dir(path_);
  ::close(fd_);
  fd_ = out;
  end_ = 0;
  for (const auto& [key, e] : rebuilt) end_ = std::max(end_, e.record_offset + e.record_size);
  if (end_ == 0) end_ = kHeaderSize;
  for (auto& [key, entry] : entries_) secure_wipe(entry.blob);
  entries_ = std::move(rebuilt);
  dead_bytes_ = 0;
}

// ---------------------------------------------------------------------------

DeviceRegistry::DeviceRegistry(fs::path path) : path_(std::move(path)) { load(); }

fs::path DeviceRegistry::path_for_store(const fs::path& store) {
  fs::path p = store;
  p += ".devices";
  return p;
}

void DeviceRegistry::load() {
  devices_.clear();
  stamp_.reset();
  size_ = 0;
  if (path_.empty() || !fs::exists(path_)) return;
  std::error_code ec;
  stamp_ = fs::last_write_time(path_, ec);
  size_ = fs::file_size(path_, ec);
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id, status;
    fields >> id >> status;
    if (status == "active") {
      devices_[id] = DeviceStatus::Active;
    } else if (status == "revoked") {
      devices_[id] = DeviceStatus::Revoked;
    } else {
      throw Error(ErrorCode::StoreCorrupt, "bad device registry line: " + line);
    }
  }
}

bool DeviceRegistry::refresh() {
  if (path_.empty()) return false;
  std::error_code ec;
  if (!fs::exists(path_, ec)) {
    if (stamp_) {
      load();
      return true;
    }
    return false;
  }
  auto stamp = fs::last_write_time(path_, ec);
  auto size = fs::file_size(path_, ec);
  if (stamp_ && *stamp_ == stamp && size_ == size) return false;
  load();
  return true;
}

void DeviceRegistry::save() const {
  if (path_.empty()) return;
  fs::path tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, status] : devices_) {
      out << id << ' ' << (status == DeviceStatus::Active ? "active" : "revoked") << '\n';
    }
    out.flush();
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write device registry");
  }
  fs::rename(tmp, path_);
  fsync_dir(path_);
}

std::optional<DeviceStatus> DeviceRegistry::status(std::string_view device_id) const {
  auto it = devices_.find(device_id);
  if (it == devices_.end()) return std::nullopt;
  return it->second;
}

void DeviceRegistry::enroll(const std::string& device_id) {
  if (device_id.empty() || device_id.size() > kMaxKeyIdLength ||
      device_id.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(ErrorCode::InvalidParameters, "device id must be 1..256 non-blank characters");
  }
  refresh();
  devices_[device_id] = DeviceStatus::Active;
  save();
  if (!path_.empty()) load();  // pick up the new file stamp
}

void DeviceRegistry::revoke(const std::string& device_id) {
  refresh();
  auto it = devices_.find(device_id);
  if (it == devices_.end()) {
    throw Error(ErrorCode::UnknownDevice, "unknown device: " + device_id);
  }
  it->second = DeviceStatus::Revoked;
  save();
  if (!path_.empty()) load();
}

std::string_view mode_name(ServiceMode mode) {
  return mode == ServiceMode::Wristband ? "wristband" : "enterprise";
}

std::optional<ServiceMode> parse_mode(std::string_view name) {
  if (name == "wristband") return ServiceMode::Wristband;
  if (name == "enterprise") return ServiceMode::Enterprise;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

TokenService::TokenService(ServiceMode mode, BlobStore store, DeviceRegistry registry)
    : mode_(mode), store_(std::move(store)), registry_(std::move(registry)) {}

void TokenService::enroll(const std::string& device_id) {
  std::lock_guard lock(mu_);
  registry_.enroll(device_id);
}

void TokenService::revoke(const std::string& device_id) {
  std::lock_guard lock(mu_);
  registry_.revoke(device_id);
}

std::vector<std::string> TokenService::stored_keys() const {
  std::lock_guard lock(mu_);
  return store_.list();
}

std::optional<Bytes> TokenService::stored_blob(const std::string& storage_key) const {
  std::lock_guard lock(mu_);
  return store_.get(storage_key);
}

std::string TokenService::storage_key(const Session& session, std::string_view key_id) const {
  if (mode_ == ServiceMode::Wristband) return std::string(key_id);
  std::string k = *session.device_id;
  k.push_back(kNamespaceSeparator);
  k.append(key_id);
  return k;
}

Frame TokenService::handle(Session& session, const Frame& request) {
  try {
    return dispatch(session, request);
  } catch (const Error& e) {
    return err(e.what());
  } catch (const std::exception& e) {
    return err(std::string("internal error: ") + e.what());
  }
}

Frame TokenService::dispatch(Session& session, const Frame& request) {
  std::lock_guard lock(mu_);
  ByteReader r(request.payload);

  if (mode_ == ServiceMode::Enterprise) {
    registry_.refresh();
    if (request.opcode == Opcode::Hello) {
      std::string device = read_key_id(r);
      if (registry_.status(device) != DeviceStatus::Active) {
        session.device_id.reset();
        return denied();
      }
      session.device_id = std::move(device);
      return ok();
    }
    if (!session.device_id || registry_.status(*session.device_id) != DeviceStatus::Active) {
      return denied();
    }
  } else if (request.opcode == Opcode::Hello) {
    session.device_id = read_key_id(r);
    return ok();
  }

  switch (request.opcode) {
    case Opcode::Put: {
      std::string key_id = read_key_id(r);
      Bytes blob = read_blob(r);
      bool overwrite = false;
      if (!r.done()) overwrite = (r.u8() & kPutOverwrite) != 0;
      if (!r.done()) return err("trailing bytes in PUT");
      if (!store_.put(storage_key(session, key_id), blob, overwrite)) {
        return err(kErrKeyExists);
      }
      secure_wipe(blob);
      return ok();
    }
    case Opcode::Get: {
      std::string key_id = read_key_id(r);
      if (!r.done()) return err("trailing bytes in GET");
      auto blob = store_.get(storage_key(session, key_id));
      if (!blob) return not_found();
      Bytes payload;
      put_blob(payload, *blob);
      secure_wipe(*blob);
      return ok(std::move(payload));
    }
    case Opcode::Delete: {
      std::string key_id = read_key_id(r);
      if (!r.done()) return err("trailing bytes in DELETE");
      return store_.remove(storage_key(session, key_id)) ? ok() : not_found();
    }
    case Opcode::List: {
      std::string prefix = r.done() ? std::string() : read_key_id(r);
      std::string ns = storage_key(session, "");
      std::vector<std::string> ids;
      for (auto& k : store_.list(ns + prefix)) ids.push_back(k.substr(ns.size()));
      return ok(encode_list(ids));
    }
    default:
      return err("not a request opcode");
  }
}

// ---------------------------------------------------------------------------

std::pair<std::string, std::uint16_t> parse_address(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::UsageError, "address must be host:port");
  }
  std::string host(address.substr(0, colon));
  auto port_str = address.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
  if (ec != std::errc() || ptr != port_str.data() + port_str.size() || port > 65535) {
    throw Error(ErrorCode::UsageError, "invalid port in address: " + std::string(address));
  }
  return {host, static_cast<std::uint16_t>(port)};
}

TokenServer::TokenServer(std::shared_ptr<TokenService> service) : service_(std::move(service)) {}

TokenServer::~TokenServer() { stop(); }

void TokenServer::start(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::BindFailure, "cannot resolve " + host);
  }
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw Error(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 128) != 0) {
    std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + port_str + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  listen_fd_ = fd;
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TokenServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<Worker> workers;
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.thread.join();
}

void TokenServer::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (!running_) break;
      if (errno == EMFILE || errno == ENFILE) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        continue;
      }
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(conn_mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
    conn_fds_.push_back(fd);
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers_.push_back(Worker{std::thread([this, fd, done] {
                                serve_connection(fd);
                                done->store(true);
                              }),
                              done});
  }
}

namespace {
bool send_all(int fd, ByteView data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}
}  // namespace

void TokenServer::serve_connection(int fd) {
  Session session;
  FrameReader reader;
  std::uint8_t buf[16384];
  bool open = true;
  while (open) {
    ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    try {
      reader.feed(ByteView(buf, static_cast<std::size_t>(n)));
      while (auto frame = reader.next()) {
        Frame response = service_->handle(session, *frame);
        Bytes wire = encode(response);
        bool sent = send_all(fd, wire);
        if (frame->opcode == Opcode::Get) secure_wipe(wire);
        if (!sent) {
          open = false;
          break;
        }
      }
    } catch (const Error& e) {
      // Framing is lost after a malformed header; report and hang up.
      send_all(fd, encode(err(e.what())));
      open = false;
    }
  }
  secure_wipe(std::span<std::uint8_t>(buf, sizeof(buf)));
  std::lock_guard lock(conn_mu_);
  std::erase(conn_fds_, fd);
  ::close(fd);
}

}  // namespace splitvault::token
