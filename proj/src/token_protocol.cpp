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

#include "splitvault/token_protocol.hpp"

#include "splitvault/error.hpp"

namespace splitvault::token {

bool is_known_opcode(std::uint8_t op) {
  return op <= 0x04 || (op >= 0x80 && op <= 0x83);
}

Bytes encode(const Frame& frame) {
  std::size_t length = 1 + frame.payload.size();
  if (length > kMaxFrameLength) {
    throw Error(ErrorCode::ProtocolError, "frame exceeds 1 MiB");
  }
  Bytes out;
  out.reserve(4 + length);
  put_u32(out, static_cast<std::uint32_t>(length));
  put_u8(out, static_cast<std::uint8_t>(frame.opcode));
  put_raw(out, frame.payload);
  return out;
}

namespace {
std::uint32_t check_length(std::uint32_t length) {
  if (length == 0) throw Error(ErrorCode::ProtocolError, "frame length 0 has no opcode");
  if (length > kMaxFrameLength) throw Error(ErrorCode::ProtocolError, "frame exceeds 1 MiB");
  return length;
}

Opcode check_opcode(std::uint8_t op) {
  if (!is_known_opcode(op)) throw Error(ErrorCode::ProtocolError, "unknown opcode");
  return static_cast<Opcode>(op);
}
}  // namespace

Frame decode(ByteView data) {
  ByteReader r(data);
  std::uint32_t length = check_length(r.u32());
  if (r.remaining() != length) {
    throw Error(ErrorCode::ProtocolError, "frame length does not match buffer");
  }
  Frame f;
  f.opcode = check_opcode(r.u8());
  auto payload = r.raw(length - 1);
  f.payload.assign(payload.begin(), payload.end());
  return f;
}

void FrameReader::feed(ByteView data) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Frame> FrameReader::next() {
  if (buffered() < 4) return std::nullopt;
  ByteReader header(ByteView(buf_).subspan(pos_, 4));
  std::uint32_t length = check_length(header.u32());
  if (buffered() < 4 + std::size_t{length}) return std::nullopt;
  Frame f;
  f.opcode = check_opcode(buf_[pos_ + 4]);
  auto begin = buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 5);
  f.payload.assign(begin, begin + (length - 1));
  pos_ += 4 + length;
  if (pos_ > (1u << 16) && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return f;
}

void put_key_id(Bytes& out, std::string_view key_id) {
  if (key_id.size() > kMaxKeyIdLength) {
    throw Error(ErrorCode::ProtocolError, "key_id longer than 256 bytes");
  }
  put_u16(out, static_cast<std::uint16_t>(key_id.size()));
  put_raw(out, as_bytes(key_id));
}

std::string read_key_id(ByteReader& r) {
  std::uint16_t len = r.u16();
  if (len > kMaxKeyIdLength) throw Error(ErrorCode::ProtocolError, "key_id longer than 256 bytes");
  return to_string(r.raw(len));
}

void put_blob(Bytes& out, ByteView blob) {
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  put_raw(out, blob);
}

Bytes read_blob(ByteReader& r) {
  auto v = r.raw(r.u32());
  return {v.begin(), v.end()};
}

Frame hello(std::string_view device_id) {
  Frame f{Opcode::Hello, {}};
  put_key_id(f.payload, device_id);
  return f;
}

Frame put_request(std::string_view key_id, ByteView blob, bool overwrite) {
  Frame f{Opcode::Put, {}};
  put_key_id(f.payload, key_id);
  put_blob(f.payload, blob);
  if (overwrite) put_u8(f.payload, kPutOverwrite);
  return f;
}

Frame get_request(std::string_view key_id) {
  Frame f{Opcode::Get, {}};
  put_key_id(f.payload, key_id);
  return f;
}

Frame delete_request(std::string_view key_id) {
  Frame f{Opcode::Delete, {}};
  put_key_id(f.payload, key_id);
  return f;
}

Frame list_request(std::string_view prefix) {
  Frame f{Opcode::List, {}};
  if (!prefix.empty()) put_key_id(f.payload, prefix);
  return f;
}

Frame ok(Bytes payload) { return Frame{Opcode::Ok, std::move(payload)}; }
Frame not_found() { return Frame{Opcode::NotFound, {}}; }
Frame denied() { return Frame{Opcode::Denied, {}}; }
Frame err(std::string_view message) { return Frame{Opcode::Err, to_bytes(message)}; }

Bytes encode_list(const std::vector<std::string>& key_ids) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(key_ids.size()));
  for (const auto& id : key_ids) put_key_id(out, id);
  return out;
}

std::vector<std::string> decode_list(ByteView payload) {
  ByteReader r(payload);
  std::uint32_t n = r.u32();
  std::vector<std::string> ids;
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(read_key_id(r));
  if (!r.done()) throw Error(ErrorCode::ProtocolError, "trailing bytes after key list");
  return ids;
}

}  // namespace splitvault::token
