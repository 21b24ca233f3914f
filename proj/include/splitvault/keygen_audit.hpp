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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "splitvault/key_material.hpp"
#include "splitvault/random.hpp"

namespace splitvault::keygen {

using BigInt = boost::multiprecision::cpp_int;

enum class CardColor : std::uint8_t { Red, Black };

inline constexpr unsigned kDeckSize = 52;

/// One pass through a shuffled deck after one or two cards were thrown out.
struct CardPass {
  unsigned deck_size = kDeckSize;
  unsigned discarded = 0;
  std::vector<CardColor> colors;
};

/// Parses one transcript line of 'r'/'b' characters (case-insensitive,
/// surrounding whitespace ignored). Throws Error(MalformedPass).
CardPass parse_pass(std::string_view line);
/// One pass per non-empty line; lines starting with '#' are comments.
std::vector<CardPass> parse_transcript(std::istream& in);

/// red -> 0, black -> 1, in draw order. Throws Error(MalformedPass) unless the
/// pass has 52 - discarded colors with discarded in {1, 2}.
std::vector<bool> pass_to_bits(const CardPass& pass);

/// A key whose length is counted in bits. Bits are packed MSB first; the
/// trailing pad bits of the last byte are zero.
struct BitKey {
  KeyMaterial material{0};
  std::size_t bits = 0;

  std::size_t pad_bits() const { return material.size() * 8 - bits; }
  bool bit(std::size_t i) const;
};

/// Concatenates the passes in order. Throws Error(EmptyInput).
BitKey combine_passes(std::span<const std::vector<bool>> passes);

struct EntropyReport {
  unsigned n = 0;          // half the sequence length; deck_size = 2n
  unsigned discarded = 0;
  unsigned passes = 0;
  // Per pass, in bits.
  double exact_log2 = 0;       // log2 C(2n, n)
  double asymptotic_log2 = 0;  // 2n - log2(pi n) / 2
  double refined_log2 = 0;     // log2 of the number of colour sequences that
                               // can occur after `discarded` cards are removed
  double upper_bound_log2 = 0; // one bit per card drawn
  // All passes together (counts multiply).
  double combined_exact_log2 = 0;
  double combined_asymptotic_log2 = 0;
  double combined_refined_log2 = 0;
};

/// Exact binomial coefficient via prime factorisation (Legendre's formula).
BigInt binomial(unsigned n, unsigned k);
/// log2 of a positive big integer, accurate to double precision.
double log2_big(const BigInt& x);

/// Entropy accounting for the card method. Throws Error(InvalidDeck) unless
/// deck_size is even with 2 <= deck_size <= 200, discarded <= deck_size / 2
/// and passes >= 1.
EntropyReport entropy_estimate(unsigned deck_size, unsigned discarded, unsigned passes);

enum class AuditVerdict { Inconclusive, Consistent, FraudSuspected };
std::string_view verdict_name(AuditVerdict v);

struct AuditReport {
  std::size_t samples = 0;
  std::size_t key_bytes = 0;
  double claimed_log2_space = 0;
  std::size_t observed_collisions = 0;  // samples - distinct keys
  double expected_collisions = 0;       // N(N-1) / 2^(c+1) under the claim
  double collision_probability = 0;     // 1 - exp(-N(N-1) / 2^(c+1))
  double tail_probability = 1;          // P[Poisson(expected) >= observed]
  std::optional<double> fitted_log2_space;  // keyspace that best explains the distinct count
  double threshold = 0;
  AuditVerdict verdict = AuditVerdict::Inconclusive;
};

/// Produces one key per call.
using KeyGenerator = std::function<Bytes()>;

inline constexpr double kDefaultAuditThreshold = 1e-6;

/// Birthday-bound audit: draws `samples` keys and compares the number of
/// duplicates with what a keyspace of 2^claimed_log2_space predicts.
/// FraudSuspected when the observed count is less likely than `threshold`
/// under the claim. Fewer than two samples are Inconclusive.
///
/// Throws Error(GeneratorFailure) if the generator throws or changes key
/// length.
AuditReport collision_audit(const KeyGenerator& generator, double claimed_log2_space,
                            std::size_t samples, double threshold = kDefaultAuditThreshold);

/// Deterministic generator whose true keyspace is 2^space_bits (space_bits
/// <= 64), emitting `key_bytes`-byte keys. For audits and demonstrations.
KeyGenerator toy_generator(unsigned space_bits, std::uint64_t seed, std::size_t key_bytes = 32);
/// Uniform keys of `key_bytes` bytes from `source`.
KeyGenerator random_generator(RandomSource& source, std::size_t key_bytes);

/// Where generate_key takes its bits from.
using KeygenSource = std::variant<std::reference_wrapper<RandomSource>, std::span<const CardPass>>;

/// Key of exactly `bits` bits. A card transcript is turned into bits with
/// pass_to_bits/combine_passes and truncated to the requested length; throws
/// Error(InsufficientEntropy) if it is shorter.
BitKey generate_key(std::size_t bits, KeygenSource source);

}  // namespace splitvault::keygen
