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

#include "splitvault/bytes.hpp"

#include <openssl/crypto.h>

#include "splitvault/error.hpp"

namespace splitvault {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroizedMaterial: return "ZeroizedMaterial";
    case ErrorCode::RandomnessExhausted: return "RandomnessExhausted";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::WrongKeyLength: return "WrongKeyLength";
    case ErrorCode::UnknownCipher: return "UnknownCipher";
    case ErrorCode::CipherMismatch: return "CipherMismatch";
    case ErrorCode::DuplicateCipherId: return "DuplicateCipherId";
    case ErrorCode::RoleConflict: return "RoleConflict";
    case ErrorCode::InsecureCipher: return "InsecureCipher";
    case ErrorCode::BadPassword: return "BadPassword";
    case ErrorCode::CorruptStore: return "CorruptStore";
    case ErrorCode::VaultLocked: return "VaultLocked";
    case ErrorCode::DuplicateDocId: return "DuplicateDocId";
    case ErrorCode::UnknownDocument: return "UnknownDocument";
    case ErrorCode::TokenUnreachable: return "TokenUnreachable";
    case ErrorCode::TokenRecordMissing: return "TokenRecordMissing";
    case ErrorCode::AlreadyDestroyed: return "AlreadyDestroyed";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Denied: return "Denied";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::AlreadyConsumed: return "AlreadyConsumed";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::MalformedPass: return "MalformedPass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidDeck: return "InvalidDeck";
    case ErrorCode::GeneratorFailure: return "GeneratorFailure";
    case ErrorCode::InsufficientEntropy: return "InsufficientEntropy";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    throw Error(ErrorCode::UsageError, "hex string has odd length");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(ErrorCode::UsageError, "invalid hex character");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_raw(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(ErrorCode::ProtocolError, "truncated input");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 8;
  return v;
}

ByteView ByteReader::raw(std::size_t n) {
  need(n);
  ByteView v = data_.subspan(pos_, n);
  pos_ += n;
  return v;
}

void put_tlv(Bytes& out, std::uint8_t tag, ByteView value) {
  put_u8(out, tag);
  put_u32(out, static_cast<std::uint32_t>(value.size()));
  put_raw(out, value);
}

std::optional<TlvItem> next_tlv(ByteReader& reader) {
  if (reader.done()) return std::nullopt;
  TlvItem item;
  item.tag = reader.u8();
  std::uint32_t len = reader.u32();
  item.value = reader.raw(len);
  return item;
}

std::vector<TlvItem> parse_tlv(ByteView data) {
  ByteReader reader(data);
  std::vector<TlvItem> items;
  while (auto item = next_tlv(reader)) items.push_back(*item);
  return items;
}

void secure_wipe(std::span<std::uint8_t> data) noexcept {
  if (!data.empty()) OPENSSL_cleanse(data.data(), data.size());
}

}  // namespace splitvault
