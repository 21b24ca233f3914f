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

#include "splitvault/key_material.hpp"

#include <openssl/crypto.h>

#include "splitvault/error.hpp"

namespace splitvault {

KeyMaterial::KeyMaterial(std::size_t length) : bytes_(length, 0) {}

KeyMaterial::KeyMaterial(ByteView bytes) : bytes_(bytes.begin(), bytes.end()) {}

KeyMaterial KeyMaterial::adopt(Bytes&& bytes) {
  KeyMaterial k;
  k.bytes_ = std::move(bytes);
  bytes.clear();
  return k;
}

KeyMaterial::KeyMaterial(KeyMaterial&& other) noexcept
    : bytes_(other.bytes_), zeroized_(other.zeroized_) {
  other.zeroize();
}

KeyMaterial& KeyMaterial::operator=(KeyMaterial&& other) noexcept {
  if (this != &other) {
    zeroize();
    bytes_ = other.bytes_;
    zeroized_ = other.zeroized_;
    other.zeroize();
  }
  return *this;
}

KeyMaterial::~KeyMaterial() { zeroize(); }

KeyMaterial KeyMaterial::clone() const {
  check_live();
  return KeyMaterial(ByteView(bytes_));
}

void KeyMaterial::check_live() const {
  if (zeroized_) {
    throw Error(ErrorCode::ZeroizedMaterial, "key material has been destroyed");
  }
}

ByteView KeyMaterial::bytes() const {
  check_live();
  return bytes_;
}

std::span<std::uint8_t> KeyMaterial::mutable_bytes() {
  check_live();
  return bytes_;
}

void KeyMaterial::zeroize() noexcept {
  secure_wipe(bytes_);
  zeroized_ = true;
}

bool operator==(const KeyMaterial& a, const KeyMaterial& b) {
  a.check_live();
  b.check_live();
  return a.bytes_.size() == b.bytes_.size() &&
         CRYPTO_memcmp(a.bytes_.data(), b.bytes_.data(), a.bytes_.size()) == 0;
}

}  // namespace splitvault
