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
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "splitvault/cipher_suite.hpp"
#include "splitvault/key_material.hpp"
#include "splitvault/random.hpp"
#include "splitvault/token_client.hpp"

namespace splitvault {

/// Phone-resident part of a document: the encrypted document D′, the wrap
/// key K″₂ and the wrapped first half S₁ = E₂(K′₁, K′₂). Never holds the
/// document key or either unwrapped half.
struct DocumentRecord {
  std::string doc_id;
  Ciphertext d_prime;
  KeyMaterial wrap_key_b{0};
  Ciphertext s1;
  std::uint64_t created_at = 0;

  DocumentRecord clone() const;
};

/// Token-resident part: the wrap key K′₂ and the wrapped second half
/// S₂ = E₂(K″₁, K″₂).
struct TokenRecord {
  std::string doc_id;
  KeyMaterial wrap_key_a{0};
  Ciphertext s2;
};

// TLV tags used in the phone store and token blobs.
inline constexpr std::uint8_t kTagDocId = 0x01;
inline constexpr std::uint8_t kTagDPrime = 0x02;
inline constexpr std::uint8_t kTagWrapKeyB = 0x03;
inline constexpr std::uint8_t kTagS1 = 0x04;
inline constexpr std::uint8_t kTagCreatedAt = 0x05;
inline constexpr std::uint8_t kTagWrapKeyA = 0x06;
inline constexpr std::uint8_t kTagS2 = 0x07;

Bytes encode_token_record(const TokenRecord& record);
/// Throws Error(CorruptStore) on malformed blobs.
TokenRecord decode_token_record(std::string doc_id, ByteView blob);
/// Key under which a document's TokenRecord lives on the token.
std::string token_key_for(std::string_view doc_id);

/// Returned plaintext. destroy() wipes the buffer; any later access (or a
/// second destroy) throws Error(AlreadyDestroyed). The destructor wipes too.
/// Zeroization is best effort: copies the caller makes are not tracked, and
/// the OS may have paged the buffer.
class PlaintextBuffer {
 public:
  explicit PlaintextBuffer(Bytes bytes) : bytes_(std::move(bytes)) {}
  PlaintextBuffer(PlaintextBuffer&& other) noexcept;
  PlaintextBuffer& operator=(PlaintextBuffer&& other) noexcept;
  PlaintextBuffer(const PlaintextBuffer&) = delete;
  PlaintextBuffer& operator=(const PlaintextBuffer&) = delete;
  ~PlaintextBuffer();

  ByteView bytes() const;
  std::size_t size() const;
  void destroy();
  bool destroyed() const { return destroyed_; }
  /// Underlying storage regardless of state; for inspection in tests.
  ByteView storage() const { return bytes_; }

 private:
  Bytes bytes_;
  bool destroyed_ = false;
};

struct KdfParams {
  std::uint32_t iterations = 200000;
};

/// Points at which read_document can be observed or interrupted.
enum class ReadStep {
  FetchToken,       // about to load {K′₂, S₂} from the token
  UnwrapHalfA,      // K′₁ = D₂(S₁, K′₂)
  UnwrapHalfB,      // K″₁ = D₂(S₂, K″₂)
  Recombine,        // K₁ = combine(K′₁, K″₁)
  DecryptDocument,  // D = D₁(D′, K₁)
};

/// Live-secret bookkeeping for one vault. Every temporary key created while
/// encrypting or reading is registered here and removed (after zeroization)
/// when the operation's scope ends, whether it succeeds or throws.
class EphemeralSet {
 public:
  std::size_t size() const;

  class Guard {
   public:
    Guard(EphemeralSet& set, KeyMaterial key);
    ~Guard();
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

    const KeyMaterial& key() const { return key_; }

   private:
    EphemeralSet& set_;
    KeyMaterial key_;
  };

 private:
  mutable std::mutex mu_;
  std::set<const KeyMaterial*> live_;
};

/// The phone side of document protection.
///
/// Store file ("SVLT"):
///   magic "SVLT" | version u8 | salt[16] | kdf_alg u8 | iterations u32 |
///   verifier[32] | record frames...
/// Each record frame is u32 length | nonce[12] | AES-256-GCM(ciphertext|tag)
/// with the header and the frame's sequence number as associated data. Frame
/// plaintext is TLV: 0x30 record {0x01 doc_id, 0x02 d_prime, 0x03 wrap_key_b,
/// 0x04 s1, 0x05 created_at} or 0x31 tombstone {0x01 doc_id}.
/// The AES key and the verifier come from PBKDF2-HMAC-SHA256(password, salt).
///
/// Mutations (encrypt/remove) are serialized; reads of distinct documents may
/// run concurrently.
class Vault {
 public:
  Vault(std::filesystem::path path, const CipherRegistry& registry);
  ~Vault();

  Vault(const Vault&) = delete;
  Vault& operator=(const Vault&) = delete;

  /// Creates a new, empty store file. Throws Error(IoError) if it exists.
  static void initialize(const std::filesystem::path& path, std::string_view password,
                         KdfParams params = {});

  /// Derives the store key and loads all records. Throws BadPassword (nothing
  /// loaded) or CorruptStore.
  void unlock(std::string_view password);
  /// Wipes the store key and all loaded records.
  void lock();
  bool unlocked() const;

  /// Generates K₁, splits it, wraps both halves under fresh K′₂/K″₂, puts
  /// {K′₂, S₂} on the token and commits {D′, K″₂, S₁} locally. If the token
  /// cannot be written nothing is committed; if the local commit fails the
  /// token record is removed again.
  ///
  /// Throws VaultLocked, DuplicateDocId, TokenUnreachable.
  DocumentRecord encrypt_document(token::TokenClient& token, const std::string& doc_id,
                                  ByteView plaintext, RandomSource& randomness);

  /// Fetches {K′₂, S₂}, unwraps both halves, recombines K₁ and decrypts D′.
  /// All intermediate keys are zeroized before returning or throwing.
  ///
  /// Throws VaultLocked, UnknownDocument, TokenUnreachable (including a
  /// revoked device), TokenRecordMissing.
  PlaintextBuffer read_document(token::TokenClient& token, const std::string& doc_id);

  /// Removes the document from both stores. Throws UnknownDocument or
  /// TokenUnreachable (in which case nothing is removed).
  void remove_document(token::TokenClient& token, const std::string& doc_id);

  /// Rewrites the store file with only live records.
  void compact();

  std::vector<std::string> list() const;
  std::optional<DocumentRecord> find(const std::string& doc_id) const;

  std::size_t ephemeral_count() const { return ephemeral_.size(); }
  /// Invoked at each ReadStep; a throwing hook aborts the read at that step.
  void set_read_hook(std::function<void(ReadStep)> hook) { read_hook_ = std::move(hook); }

  const std::filesystem::path& path() const { return path_; }

 private:
  struct Header {
    Bytes raw;
    Bytes salt;
    std::uint32_t iterations = 0;
    Bytes verifier;
  };

  void require_unlocked() const;
  Header read_header(ByteView file) const;
  void append_frame(ByteView plaintext);
  Bytes seal_frame(ByteView plaintext, std::uint64_t seq);
  void step(ReadStep s) const;

  std::filesystem::path path_;
  const CipherRegistry& registry_;
  SystemRandom system_random_;

  mutable std::shared_mutex mu_;
  std::optional<KeyMaterial> store_key_;
  Bytes header_raw_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dead_frames_ = 0;
  std::map<std::string, DocumentRecord> records_;

  EphemeralSet ephemeral_;
  std::function<void(ReadStep)> read_hook_;
};

}  // namespace splitvault
