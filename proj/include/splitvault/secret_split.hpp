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

#include "splitvault/key_material.hpp"
#include "splitvault/random.hpp"

namespace splitvault {

/// The two shares of a 2-of-2 split. Both have the length of the original
/// key and carry no metadata.
struct SplitPair {
  KeyMaterial half_a;
  KeyMaterial half_b;
};

/// Splits `key` into two shares: half_a is drawn uniformly from `randomness`
/// and half_b = key XOR half_a. Either share alone is uniformly distributed
/// over all byte strings of the key's length, independent of the key; both
/// together recover it via combine().
///
/// Throws ZeroizedMaterial or RandomnessExhausted.
SplitPair split(const KeyMaterial& key, RandomSource& randomness);

/// Recombines two shares (byte-wise XOR). Throws LengthMismatch or
/// ZeroizedMaterial.
KeyMaterial combine(const KeyMaterial& half_a, const KeyMaterial& half_b);

}  // namespace splitvault
