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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splitvault/cipher_suite.hpp"
#include "splitvault/key_material.hpp"
#include "splitvault/random.hpp"
#include "splitvault/token_client.hpp"

namespace splitvault::keysets {

/// Unordered employee pair, stored with low < high. Employees are numbered
/// from 1.
struct PairId {
  std::uint32_t low = 0;
  std::uint32_t high = 0;

  static PairId of(std::uint32_t a, std::uint32_t b);
  std::uint32_t other(std::uint32_t self) const { return self == low ? high : low; }
  bool contains(std::uint32_t e) const { return e == low || e == high; }

  friend auto operator<=>(const PairId&, const PairId&) = default;
};

enum class KeysetState : std::uint8_t { Fresh = 0, Consumed = 1 };

/// Phone half of set t for a pair: K^t″₄ and S^t₁ = E₄(K^t′₃, K^t′₄).
struct PhonePart {
  KeyMaterial wrap_key{0};
  Ciphertext wrapped_half;
};

/// Token half: K^t′₄ and S^t₂ = E₄(K^t″₃, K^t″₄).
struct TokenPart {
  KeyMaterial wrap_key{0};
  Ciphertext wrapped_half;
};

struct KeysetEntry {
  PairId pair;
  std::uint32_t index = 0;  // t, 1..m
  PhonePart phone_part;
  TokenPart token_part;
  KeysetState state = KeysetState::Fresh;
};

// Export TLV tags.
inline constexpr std::uint8_t kTagPair = 0x10;
inline constexpr std::uint8_t kTagIndex = 0x11;
inline constexpr std::uint8_t kTagWrapKey = 0x12;
inline constexpr std::uint8_t kTagWrappedHalf = 0x13;
inline constexpr std::uint8_t kTagState = 0x14;
inline constexpr std::uint8_t kTagPlainKey = 0x15;
inline constexpr std::uint8_t kTagOwner = 0x16;
inline constexpr std::uint8_t kTagEntry = 0x20;
inline constexpr std::uint8_t kTagPendingDelete = 0x21;

/// Token key_id for set t of a pair: "ks/<low>-<high>/<t>".
std::string token_key(PairId pair, std::uint32_t index);
Bytes encode_token_part(PairId pair, std::uint32_t index, const TokenPart& part);
TokenPart decode_token_part(PairId pair, std::uint32_t index, ByteView blob);

/// One employee's phone-side keyset store. Holds the phone parts (or, in
/// simple mode, the plain call keys) of every set for every pair the owner
/// belongs to, plus a queue of token deletions that could not be delivered.
///
/// File ("SKST" version u8) is a TLV sequence: 0x16 owner, then 0x20 entries
/// {0x10 pair, 0x11 index, 0x14 state, 0x12 wrap_key, 0x13 wrapped_half |
/// 0x15 plain_key} and 0x21 pending token deletions. Saved atomically after
/// every consumption when a path is attached.
class PhoneKeysetStore {
 public:
  struct Entry {
    KeysetState state = KeysetState::Fresh;
    std::optional<PhonePart> phone_part;
    std::optional<KeyMaterial> plain_key;  // simple mode
    bool in_use = false;                   // session open, not persisted
  };
  using Slot = std::pair<PairId, std::uint32_t>;

  explicit PhoneKeysetStore(std::uint32_t owner) : owner_(owner) {}

  static PhoneKeysetStore load(const std::filesystem::path& path);
  /// Writes to `path` and keeps it attached for later saves.
  void save_as(const std::filesystem::path& path);
  void save() const;

  std::uint32_t owner() const { return owner_; }
  Entry* find(PairId pair, std::uint32_t index);
  const Entry* find(PairId pair, std::uint32_t index) const;
  void insert(PairId pair, std::uint32_t index, Entry entry);

  std::size_t size() const { return entries_.size(); }
  std::size_t count(std::uint32_t peer, KeysetState state) const;
  /// Lowest fresh index for the pair with `peer`, if any.
  std::optional<std::uint32_t> next_fresh(std::uint32_t peer) const;
  std::vector<std::uint32_t> peers() const;

  std::vector<std::string>& pending_deletes() { return pending_deletes_; }
  const std::map<Slot, Entry>& entries() const { return entries_; }

 private:
  std::uint32_t owner_;
  std::map<Slot, Entry> entries_;
  std::vector<std::string> pending_deletes_;
  std::filesystem::path path_;
};

/// Output of server-side provisioning for ν employees and m sets per pair.
struct Distribution {
  std::uint32_t employees = 0;
  std::uint32_t sets_per_pair = 0;
  std::vector<KeysetEntry> entries;  // exactly m·ν(ν−1)/2

  PhoneKeysetStore phone_store_for(std::uint32_t employee) const;
  /// (key_id, blob) pairs to load onto the employee's token.
  std::vector<std::pair<std::string, Bytes>> token_blobs_for(std::uint32_t employee) const;
};

/// Generates every call key K^t₃ for every pair, splits it, wraps the halves
/// under fresh K^t′₄ / K^t″₄ with the callwrap cipher and places the parts.
/// Throws InvalidParameters unless ν ≥ 2 and m ≥ 1.
Distribution provision(std::uint32_t employees, std::uint32_t sets_per_pair,
                       const CipherRegistry& registry, RandomSource& randomness);

/// Single-cryptosystem variant: m plain call keys per pair, phone resident.
struct SimpleDistribution {
  std::uint32_t employees = 0;
  std::uint32_t sets_per_pair = 0;
  struct Key {
    PairId pair;
    std::uint32_t index = 0;
    KeyMaterial call_key{0};
  };
  std::vector<Key> keys;  // exactly m·ν(ν−1)/2

  PhoneKeysetStore phone_store_for(std::uint32_t employee) const;
};

SimpleDistribution provision_simple(std::uint32_t employees, std::uint32_t sets_per_pair,
                                    const CipherRegistry& registry, RandomSource& randomness);

inline std::uint64_t expected_entry_count(std::uint64_t employees, std::uint64_t sets_per_pair) {
  return sets_per_pair * employees * (employees - 1) / 2;
}

enum class Direction { Outbound, Inbound };
enum class CallOutcome { Completed, ConnectionFailed };

/// A live call. Each direction has its own running keystream under the call
/// key, so outbound chunks must be fed in order and inbound chunks likewise;
/// chunk boundaries do not affect the output.
class CallSession {
 public:
  CallSession(PairId pair, std::uint32_t index, std::uint32_t self, KeyMaterial call_key,
              const Cipher& cipher);
  CallSession(CallSession&&) noexcept = default;
  ~CallSession();

  /// Throws Error(SessionClosed) after close.
  Bytes stream_chunk(Direction direction, ByteView chunk);

  PairId pair() const { return pair_; }
  std::uint32_t index() const { return index_; }
  std::uint32_t self() const { return self_; }
  bool open() const { return open_; }
  /// For symmetry checks in tests; throws once the session is closed.
  const KeyMaterial& call_key() const;

  void end() noexcept;

 private:
  PairId pair_;
  std::uint32_t index_;
  std::uint32_t self_;
  KeyMaterial call_key_;
  std::unique_ptr<Keystream> outbound_;
  std::unique_ptr<Keystream> inbound_;
  bool open_ = true;
};

/// Loads set k for the pair (owner, peer) from the token, unwraps both halves
/// and recombines the call key. A failed open leaves the entry fresh.
///
/// Throws MissingEntry (no such set, including k > m), AlreadyConsumed,
/// TokenUnreachable.
CallSession open_call(PhoneKeysetStore& phone, token::TokenClient& token,
                      const CipherRegistry& registry, std::uint32_t peer, std::uint32_t k);

/// Simple-mode open: the call key is phone resident.
CallSession open_simple_call(PhoneKeysetStore& phone, const CipherRegistry& registry,
                             std::uint32_t peer, std::uint32_t k);

/// Ends the call and consumes the set regardless of outcome: marks it
/// consumed (persisted), wipes the phone material and the session key, and
/// deletes the token records. Token deletion is retried; if it still fails
/// the key_id is queued and flushed on the next open_call. Never throws.
void close_call(CallSession& session, PhoneKeysetStore& phone, token::TokenClient* token,
                CallOutcome outcome);

/// Retries queued token deletions. Returns how many remain queued.
std::size_t flush_pending_deletes(PhoneKeysetStore& phone, token::TokenClient& token);

}  // namespace splitvault::keysets
