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

#include "splitvault/random.hpp"

#include <openssl/rand.h>

#include <algorithm>
#include <climits>

#include "splitvault/error.hpp"

namespace splitvault {

void SystemRandom::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    int chunk = static_cast<int>(std::min<std::size_t>(out.size() - done, INT_MAX));
    if (RAND_bytes(out.data() + done, chunk) != 1) {
      throw Error(ErrorCode::RandomnessExhausted, "system CSPRNG failed");
    }
    done += static_cast<std::size_t>(chunk);
  }
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = engine_();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
}

void BoundedRandom::fill(std::span<std::uint8_t> out) {
  if (out.size() > budget_) {
    throw Error(ErrorCode::RandomnessExhausted, "random source budget exhausted");
  }
  inner_.fill(out);
  budget_ -= out.size();
}

void FixedRandom::fill(std::span<std::uint8_t> out) {
  if (bytes_.size() - pos_ < out.size()) {
    throw Error(ErrorCode::RandomnessExhausted, "fixed random sequence exhausted");
  }
  std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), out.size(), out.begin());
  pos_ += out.size();
}

}  // namespace splitvault
