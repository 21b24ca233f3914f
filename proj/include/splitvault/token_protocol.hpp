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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splitvault/bytes.hpp"

namespace splitvault::token {

// Wire format (big-endian):
//   frame   := length:u32 opcode:u8 payload[length - 1]
//   key_id  := len:u16 bytes          (len <= 256)
//   blob    := len:u32 bytes
//
// Requests                      Payload
//   HELLO  0x00                 key_id (device id)
//   PUT    0x01                 key_id blob [flags:u8]   flags bit0 = overwrite
//   GET    0x02                 key_id
//   DELETE 0x03                 key_id
//   LIST   0x04                 [key_id prefix]
// Responses
//   OK        0x80              GET: blob; LIST: count:u32 key_id*; else empty
//   NOT_FOUND 0x81              empty
//   DENIED    0x82              empty
//   ERR       0x83              UTF-8 message
enum class Opcode : std::uint8_t {
  Hello = 0x00,
  Put = 0x01,
  Get = 0x02,
  Delete = 0x03,
  List = 0x04,
  Ok = 0x80,
  NotFound = 0x81,
  Denied = 0x82,
  Err = 0x83,
};

inline constexpr std::size_t kMaxFrameLength = 1 << 20;  // opcode + payload
inline constexpr std::size_t kMaxKeyIdLength = 256;
inline constexpr std::uint8_t kPutOverwrite = 0x01;
/// ERR message for a PUT without overwrite on an existing key_id.
inline constexpr std::string_view kErrKeyExists = "key_id exists";

bool is_known_opcode(std::uint8_t op);

struct Frame {
  Opcode opcode = Opcode::Ok;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Throws Error(ProtocolError) if the frame would exceed kMaxFrameLength.
Bytes encode(const Frame& frame);

/// Decodes exactly one frame occupying all of `data`.
Frame decode(ByteView data);

/// Incremental decoder for a byte stream. feed() appends bytes; next()
/// yields complete frames in order. Oversized or unknown-opcode frames throw
/// Error(ProtocolError).
class FrameReader {
 public:
  void feed(ByteView data);
  std::optional<Frame> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

// Payload helpers.
void put_key_id(Bytes& out, std::string_view key_id);
std::string read_key_id(ByteReader& r);
void put_blob(Bytes& out, ByteView blob);
Bytes read_blob(ByteReader& r);

Frame hello(std::string_view device_id);
Frame put_request(std::string_view key_id, ByteView blob, bool overwrite = false);
Frame get_request(std::string_view key_id);
Frame delete_request(std::string_view key_id);
Frame list_request(std::string_view prefix = {});

Frame ok(Bytes payload = {});
Frame not_found();
Frame denied();
Frame err(std::string_view message);

Bytes encode_list(const std::vector<std::string>& key_ids);
std::vector<std::string> decode_list(ByteView payload);

}  // namespace splitvault::token
