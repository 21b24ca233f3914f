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
#include <span>

#include "splitvault/bytes.hpp"

namespace splitvault {

/// Fixed-length secret byte string. The length never changes after
/// construction; zeroize() overwrites every byte and marks the value
/// unusable, and the destructor zeroizes implicitly.
///
/// Copying is explicit (clone()) so that secret bytes are not duplicated
/// by accident. Moved-from instances are left zeroized.
class KeyMaterial {
 public:
  explicit KeyMaterial(std::size_t length);
  explicit KeyMaterial(ByteView bytes);
  /// Takes ownership of `bytes` and wipes the caller's buffer contents.
  static KeyMaterial adopt(Bytes&& bytes);

  KeyMaterial(KeyMaterial&& other) noexcept;
  KeyMaterial& operator=(KeyMaterial&& other) noexcept;
  KeyMaterial(const KeyMaterial&) = delete;
  KeyMaterial& operator=(const KeyMaterial&) = delete;
  ~KeyMaterial();

  KeyMaterial clone() const;

  std::size_t size() const noexcept { return bytes_.size(); }
  bool zeroized() const noexcept { return zeroized_; }

  /// Throws Error(ZeroizedMaterial) once destroyed.
  ByteView bytes() const;
  std::span<std::uint8_t> mutable_bytes();

  void zeroize() noexcept;

  /// Raw storage regardless of state; for destruction checks in tests.
  ByteView storage() const noexcept { return bytes_; }

  friend bool operator==(const KeyMaterial& a, const KeyMaterial& b);

 private:
  KeyMaterial() = default;
  void check_live() const;

  Bytes bytes_;
  bool zeroized_ = false;
};

}  // namespace splitvault
