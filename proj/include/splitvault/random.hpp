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
#include <random>
#include <span>
#include <vector>

namespace splitvault {

/// Source of uniformly random bytes. Implementations throw
/// Error(RandomnessExhausted) when they cannot satisfy a request.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

/// Operating-system CSPRNG (OpenSSL RAND_bytes).
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic, NOT cryptographically secure. Tests and simulations only.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mt19937_64 engine_;
};

/// Wraps another source and refuses to hand out more than `budget` bytes in
/// total. Used to exercise exhaustion paths.
class BoundedRandom final : public RandomSource {
 public:
  BoundedRandom(RandomSource& inner, std::size_t budget) : inner_(inner), budget_(budget) {}
  void fill(std::span<std::uint8_t> out) override;
  std::size_t remaining() const { return budget_; }

 private:
  RandomSource& inner_;
  std::size_t budget_;
};

/// Replays a fixed byte sequence, then reports exhaustion.
class FixedRandom final : public RandomSource {
 public:
  explicit FixedRandom(std::span<const std::uint8_t> bytes) : bytes_(bytes.begin(), bytes.end()) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace splitvault
