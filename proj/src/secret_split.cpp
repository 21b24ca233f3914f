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

#include "splitvault/secret_split.hpp"

#include "splitvault/error.hpp"

namespace splitvault {

SplitPair split(const KeyMaterial& key, RandomSource& randomness) {
  ByteView secret = key.bytes();
  KeyMaterial mask(secret.size());
  randomness.fill(mask.mutable_bytes());

  KeyMaterial other(secret.size());
  auto out = other.mutable_bytes();
  auto m = mask.bytes();
  for (std::size_t i = 0; i < secret.size(); ++i) out[i] = secret[i] ^ m[i];
  return SplitPair{std::move(mask), std::move(other)};
}

KeyMaterial combine(const KeyMaterial& half_a, const KeyMaterial& half_b) {
  ByteView a = half_a.bytes();
  ByteView b = half_b.bytes();
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, "key halves differ in length");
  }
  KeyMaterial key(a.size());
  auto out = key.mutable_bytes();
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return key;
}

}  // namespace splitvault
