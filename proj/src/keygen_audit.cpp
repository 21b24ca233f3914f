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

#include "splitvault/keygen_audit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "splitvault/error.hpp"

namespace splitvault::keygen {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<unsigned> primes_up_to(unsigned n) {
  std::vector<bool> composite(n + 1, false);
  std::vector<unsigned> primes;
  for (unsigned i = 2; i <= n; ++i) {
    if (composite[i]) continue;
    primes.push_back(i);
    for (unsigned long j = static_cast<unsigned long>(i) * i; j <= n; j += i) composite[j] = true;
  }
  return primes;
}

unsigned legendre(unsigned n, unsigned p) {
  unsigned e = 0;
  for (unsigned long q = p; q <= n; q *= p) e += static_cast<unsigned>(n / q);
  return e;
}

BitKey pack_bits(const std::vector<bool>& bits) {
  BitKey key;
  key.bits = bits.size();
  key.material = KeyMaterial((bits.size() + 7) / 8);
  auto out = key.material.mutable_bytes();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return key;
}

// Distinct-count fit: the keyspace S for which N uniform draws are expected
// to yield `distinct` different values.
std::optional<double> fit_log2_space(std::size_t samples, std::size_t distinct) {
  if (samples < 2 || distinct >= samples) return std::nullopt;
  const double n = static_cast<double>(samples);
  const double d = static_cast<double>(distinct);
  auto expected_distinct = [n](double log2s) {
    const double s = std::exp2(log2s);
    return -s * std::expm1(n * std::log1p(-1.0 / s));
  };
  double lo = std::log2(std::max(d, 1.0));
  double hi = 256.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (expected_distinct(mid) < d) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CardPass parse_pass(std::string_view line) {
  const auto body = trim(line);
  CardPass pass;
  pass.colors.reserve(body.size());
  for (char c : body) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'r':
        pass.colors.push_back(CardColor::Red);
        break;
      case 'b':
        pass.colors.push_back(CardColor::Black);
        break;
      default:
        throw Error(ErrorCode::MalformedPass,
                    "unexpected character '" + std::string(1, c) + "' in card pass");
    }
  }
  if (pass.colors.size() > kDeckSize) {
    throw Error(ErrorCode::MalformedPass, "card pass longer than the deck");
  }
  pass.discarded = kDeckSize - static_cast<unsigned>(pass.colors.size());
  if (pass.discarded < 1 || pass.discarded > 2) {
    throw Error(ErrorCode::MalformedPass, "card pass must contain 50 or 51 cards, got " +
                                              std::to_string(pass.colors.size()));
  }
  return pass;
}

std::vector<CardPass> parse_transcript(std::istream& in) {
  std::vector<CardPass> passes;
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    passes.push_back(parse_pass(body));
  }
  return passes;
}

std::vector<bool> pass_to_bits(const CardPass& pass) {
  if (pass.deck_size != kDeckSize || pass.discarded < 1 || pass.discarded > 2 ||
      pass.colors.size() + pass.discarded != pass.deck_size) {
    throw Error(ErrorCode::MalformedPass, "card pass does not match its deck");
  }
  std::vector<bool> bits;
  bits.reserve(pass.colors.size());
  for (auto c : pass.colors) bits.push_back(c == CardColor::Black);
  return bits;
}

bool BitKey::bit(std::size_t i) const {
  if (i >= bits) throw Error(ErrorCode::UsageError, "bit index out of range");
  return (material.bytes()[i / 8] >> (7 - i % 8)) & 1u;
}

BitKey combine_passes(std::span<const std::vector<bool>> passes) {
  std::vector<bool> all;
  for (const auto& p : passes) all.insert(all.end(), p.begin(), p.end());
  if (all.empty()) throw Error(ErrorCode::EmptyInput, "no card bits to combine");
  return pack_bits(all);
}

BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  BigInt result = 1;
  for (unsigned p : primes_up_to(n)) {
    const unsigned e = legendre(n, p) - legendre(k, p) - legendre(n - k, p);
    for (unsigned i = 0; i < e; ++i) result *= p;
  }
  return result;
}

double log2_big(const BigInt& x) {
  if (x <= 0) throw Error(ErrorCode::InvalidParameters, "log2 of a non-positive integer");
  const auto top = boost::multiprecision::msb(x);
  if (top < 63) return std::log2(static_cast<double>(static_cast<std::uint64_t>(x)));
  const auto shift = top - 62;
  const auto mantissa = static_cast<std::uint64_t>(x >> shift);
  return std::log2(static_cast<double>(mantissa)) + static_cast<double>(shift);
}

EntropyReport entropy_estimate(unsigned deck_size, unsigned discarded, unsigned passes) {
  if (deck_size < 2 || deck_size > 200 || deck_size % 2 != 0) {
    throw Error(ErrorCode::InvalidDeck, "deck size must be even and between 2 and 200");
  }
  const unsigned n = deck_size / 2;
  if (discarded > n) throw Error(ErrorCode::InvalidDeck, "cannot discard more than half the deck");
  if (passes < 1) throw Error(ErrorCode::InvalidDeck, "at least one pass is required");

  EntropyReport r;
  r.n = n;
  r.discarded = discarded;
  r.passes = passes;
  r.exact_log2 = log2_big(binomial(2 * n, n));
  r.asymptotic_log2 = 2.0 * n - 0.5 * std::log2(std::numbers::pi * n);

  // With d cards of unknown colour removed, a drawn sequence of length 2n-d
  // has between n-d and n red cards.
  const unsigned drawn = 2 * n - discarded;
  BigInt reachable = 0;
  for (unsigned red = n - discarded; red <= n; ++red) reachable += binomial(drawn, red);
  r.refined_log2 = log2_big(reachable);
  r.upper_bound_log2 = drawn;

  r.combined_exact_log2 = passes * r.exact_log2;
  r.combined_asymptotic_log2 = passes * r.asymptotic_log2;
  r.combined_refined_log2 = passes * r.refined_log2;
  return r;
}

std::string_view verdict_name(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::Inconclusive:
      return "INCONCLUSIVE";
    case AuditVerdict::Consistent:
      return "CONSISTENT";
    case AuditVerdict::FraudSuspected:
      return "FRAUD_SUSPECTED";
  }
  return "UNKNOWN";
}

AuditReport collision_audit(const KeyGenerator& generator, double claimed_log2_space,
                            std::size_t samples, double threshold) {
  AuditReport report;
  report.samples = samples;
  report.claimed_log2_space = claimed_log2_space;
  report.threshold = threshold;

  Bytes flat;
  for (std::size_t i = 0; i < samples; ++i) {
    Bytes key;
    try {
      key = generator();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::GeneratorFailure, std::string("key generator failed: ") + e.what());
    }
    if (i == 0) {
      if (key.empty()) throw Error(ErrorCode::GeneratorFailure, "key generator returned an empty key");
      report.key_bytes = key.size();
      flat.reserve(samples * key.size());
    } else if (key.size() != report.key_bytes) {
      throw Error(ErrorCode::GeneratorFailure, "key generator changed key length");
    }
    flat.insert(flat.end(), key.begin(), key.end());
    secure_wipe(key);
  }

  if (samples < 2) {
    secure_wipe(flat);
    return report;
  }

  const std::size_t width = report.key_bytes;
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  const auto* base = flat.data();
  std::sort(order.begin(), order.end(), [base, width](std::size_t a, std::size_t b) {
    return std::memcmp(base + a * width, base + b * width, width) < 0;
  });
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < samples; ++i) {
    if (std::memcmp(base + order[i - 1] * width, base + order[i] * width, width) != 0) ++distinct;
  }
  secure_wipe(flat);

  const double n = static_cast<double>(samples);
  report.observed_collisions = samples - distinct;
  const double lambda = n * (n - 1.0) / std::exp2(claimed_log2_space + 1.0);
  report.expected_collisions = lambda;
  report.collision_probability = -std::expm1(-lambda);
  report.tail_probability =
      report.observed_collisions == 0
          ? 1.0
          : boost::math::gamma_p(static_cast<double>(report.observed_collisions), lambda);
  report.fitted_log2_space = fit_log2_space(samples, distinct);
  report.verdict = report.tail_probability < threshold ? AuditVerdict::FraudSuspected
                                                       : AuditVerdict::Consistent;
  return report;
}

KeyGenerator toy_generator(unsigned space_bits, std::uint64_t seed, std::size_t key_bytes) {
  if (space_bits == 0 || space_bits > 64 || key_bytes < 8) {
    throw Error(ErrorCode::InvalidParameters, "toy generator needs 1..64 bits and >= 8 key bytes");
  }
  const std::uint64_t mask = space_bits == 64 ? ~0ULL : (1ULL << space_bits) - 1;
  auto engine = std::make_shared<std::mt19937_64>(seed);
  return [engine, mask, key_bytes] {
    Bytes key(key_bytes, 0);
    std::uint64_t v = (*engine)() & mask;
    for (int i = 7; i >= 0; --i) {
      key[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
    return key;
  };
}

KeyGenerator random_generator(RandomSource& source, std::size_t key_bytes) {
  if (key_bytes == 0) throw Error(ErrorCode::InvalidParameters, "key length must be positive");
  return [&source, key_bytes] {
    Bytes key(key_bytes);
    source.fill(key);
    return key;
  };
}

BitKey generate_key(std::size_t bits, KeygenSource source) {
  if (bits == 0) throw Error(ErrorCode::InvalidParameters, "key length must be positive");
  if (auto* rng = std::get_if<std::reference_wrapper<RandomSource>>(&source)) {
    BitKey key;
    key.bits = bits;
    key.material = KeyMaterial((bits + 7) / 8);
    auto out = key.material.mutable_bytes();
    rng->get().fill(out);
    if (bits % 8 != 0) out.back() &= static_cast<std::uint8_t>(0xFFu << (8 - bits % 8));
    return key;
  }

  const auto passes = std::get<std::span<const CardPass>>(source);
  std::vector<bool> all;
  for (const auto& p : passes) {
    auto b = pass_to_bits(p);
    all.insert(all.end(), b.begin(), b.end());
  }
  if (all.size() < bits) {
    throw Error(ErrorCode::InsufficientEntropy,
                "transcript holds " + std::to_string(all.size()) + " bits, " +
                    std::to_string(bits) + " requested");
  }
  all.resize(bits);
  return pack_bits(all);
}

}  // namespace splitvault::keygen
