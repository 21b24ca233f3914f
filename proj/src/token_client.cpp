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

#include "splitvault/token_client.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "splitvault/error.hpp"

namespace splitvault::token {

Frame TokenClient::checked(const Frame& request) {
  Frame response = exchange(request);
  switch (response.opcode) {
    case Opcode::Ok:
    case Opcode::NotFound:
      return response;
    case Opcode::Denied:
      throw Error(ErrorCode::Denied, "token denied the request");
    case Opcode::Err:
      throw Error(ErrorCode::StorageFailure, "token error: " + to_string(response.payload));
    default:
      throw Error(ErrorCode::ProtocolError, "unexpected response opcode");
  }
}

bool TokenClient::put(std::string_view key_id, ByteView blob, bool overwrite) {
  Frame request = put_request(key_id, blob, overwrite);
  Frame response = exchange(request);
  secure_wipe(request.payload);
  if (response.opcode == Opcode::Err && to_string(response.payload) == kErrKeyExists) {
    return false;
  }
  if (response.opcode == Opcode::Ok) return true;
  if (response.opcode == Opcode::Denied) throw Error(ErrorCode::Denied, "token denied the request");
  if (response.opcode == Opcode::Err) {
    throw Error(ErrorCode::StorageFailure, "token error: " + to_string(response.payload));
  }
  throw Error(ErrorCode::ProtocolError, "unexpected response to PUT");
}

std::optional<Bytes> TokenClient::get(std::string_view key_id) {
  Frame response = checked(get_request(key_id));
  if (response.opcode == Opcode::NotFound) return std::nullopt;
  ByteReader r(response.payload);
  Bytes blob = read_blob(r);
  secure_wipe(response.payload);
  return blob;
}

bool TokenClient::remove(std::string_view key_id) {
  return checked(delete_request(key_id)).opcode == Opcode::Ok;
}

std::vector<std::string> TokenClient::list(std::string_view prefix) {
  Frame response = checked(list_request(prefix));
  if (response.opcode != Opcode::Ok) return {};
  return decode_list(response.payload);
}

// ---------------------------------------------------------------------------

TcpTokenClient::TcpTokenClient(std::string host, std::uint16_t port,
                               std::optional<std::string> device_id)
    : host_(std::move(host)), port_(port), device_id_(std::move(device_id)) {}

TcpTokenClient::~TcpTokenClient() { disconnect(); }

void TcpTokenClient::disconnect() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  reader_ = FrameReader();
}

void TcpTokenClient::connect() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port = std::to_string(port_);
  if (::getaddrinfo(host_.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::TokenUnreachable, "cannot resolve token host " + host_);
  }
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    std::string why = std::strerror(errno);
    if (fd >= 0) ::close(fd);
    ::freeaddrinfo(res);
    throw Error(ErrorCode::TokenUnreachable,
                "cannot connect to token at " + host_ + ":" + port + ": " + why);
  }
  ::freeaddrinfo(res);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  timeval tv{30, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  fd_ = fd;
  if (device_id_) {
    Frame r = roundtrip(hello(*device_id_));
    if (r.opcode == Opcode::Denied) {
      disconnect();
      throw Error(ErrorCode::Denied, "token denied device " + *device_id_);
    }
    if (r.opcode != Opcode::Ok) {
      disconnect();
      throw Error(ErrorCode::ProtocolError, "HELLO rejected: " + to_string(r.payload));
    }
  }
}

Frame TcpTokenClient::roundtrip(const Frame& request) {
  Bytes wire = encode(request);
  std::size_t done = 0;
  while (done < wire.size()) {
    ssize_t n = ::send(fd_, wire.data() + done, wire.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      secure_wipe(wire);
      disconnect();
      throw Error(ErrorCode::TokenUnreachable, "connection to token lost while sending");
    }
    done += static_cast<std::size_t>(n);
  }
  secure_wipe(wire);
  std::uint8_t buf[16384];
  while (true) {
    if (auto frame = reader_.next()) return *frame;
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      disconnect();
      throw Error(ErrorCode::TokenUnreachable, "connection to token lost while receiving");
    }
    reader_.feed(ByteView(buf, static_cast<std::size_t>(n)));
  }
}

Frame TcpTokenClient::exchange(const Frame& request) {
  bool fresh = fd_ < 0;
  if (fresh) connect();
  try {
    return roundtrip(request);
  } catch (const Error& e) {
    // A pooled connection may have been closed by the server since last use.
    if (fresh || e.code() != ErrorCode::TokenUnreachable) throw;
  }
  connect();
  return roundtrip(request);
}

// ---------------------------------------------------------------------------

LoopbackTokenClient::LoopbackTokenClient(std::shared_ptr<TokenService> service,
                                         std::optional<std::string> device_id)
    : service_(std::move(service)), device_id_(std::move(device_id)) {}

Frame LoopbackTokenClient::exchange(const Frame& request) {
  if (offline_) throw Error(ErrorCode::TokenUnreachable, "token is offline");
  if (fault_ && fault_(request)) {
    throw Error(ErrorCode::TokenUnreachable, "injected token link failure");
  }
  if (device_id_ && !hello_sent_) {
    Frame r = service_->handle(session_, decode(encode(hello(*device_id_))));
    if (r.opcode == Opcode::Denied) throw Error(ErrorCode::Denied, "token denied device");
    hello_sent_ = true;
  }
  Frame delivered = decode(encode(request));
  return decode(encode(service_->handle(session_, delivered)));
}

}  // namespace splitvault::token
