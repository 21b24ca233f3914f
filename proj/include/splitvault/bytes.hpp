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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splitvault {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}
inline std::string to_string(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::string to_hex(ByteView bytes);
/// Throws Error(UsageError) on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

// Big-endian appenders and a bounds-checked reader. Readers throw
// Error(ProtocolError) on truncation; callers rethrow with a more specific code
// where the context is a file rather than the wire.
void put_u8(Bytes& out, std::uint8_t v);
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_raw(Bytes& out, ByteView v);

class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  ByteView raw(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return remaining() == 0; }

 private:
  void need(std::size_t n) const;

  ByteView data_;
  std::size_t pos_ = 0;
};

/// One TLV item: 1-byte tag, 4-byte big-endian length, value.
struct TlvItem {
  std::uint8_t tag = 0;
  ByteView value;
};

void put_tlv(Bytes& out, std::uint8_t tag, ByteView value);
/// Reads the next TLV item, or nullopt at end of input.
std::optional<TlvItem> next_tlv(ByteReader& reader);
/// Parses an entire buffer as a TLV sequence.
std::vector<TlvItem> parse_tlv(ByteView data);

/// Overwrites memory in a way the optimizer may not elide.
void secure_wipe(std::span<std::uint8_t> data) noexcept;

}  // namespace splitvault
