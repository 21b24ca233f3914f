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

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splitvault/bytes.hpp"
#include "splitvault/key_material.hpp"
#include "splitvault/random.hpp"

namespace splitvault {

/// Public description of one registered symmetric cryptosystem.
struct CipherSpec {
  std::string id;
  std::size_t key_length = 0;
  std::size_t nonce_length = 0;
  std::string description;
  /// False for the deterministic test ciphers; those are refused for any role
  /// unless the registry is in test mode.
  bool secure = true;
};

/// Encrypted payload tagged with the cipher that produced it. For the stream
/// ciphers shipped here body.size() equals the plaintext length.
struct Ciphertext {
  std::string cipher_id;
  Bytes nonce;
  Bytes body;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

/// id: u8 length + ASCII; nonce: u8 length + bytes; body: u32 BE length + bytes.
Bytes serialize(const Ciphertext& ct);
/// Throws Error(ProtocolError) on malformed input or trailing bytes.
Ciphertext parse_ciphertext(ByteView data);

/// Running keystream. apply() XORs the next in.size() keystream bytes into
/// `out`; successive calls continue where the previous one stopped.
class Keystream {
 public:
  virtual ~Keystream() = default;
  virtual void apply(ByteView in, std::span<std::uint8_t> out) = 0;
};

/// Builds a keystream from a key of spec.key_length bytes and a nonce of
/// spec.nonce_length bytes.
using KeystreamFactory = std::function<std::unique_ptr<Keystream>(ByteView key, ByteView nonce)>;

class Cipher {
 public:
  Cipher(CipherSpec spec, KeystreamFactory factory)
      : spec_(std::move(spec)), factory_(std::move(factory)) {}

  const CipherSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }

  /// Throws WrongKeyLength / ZeroizedMaterial / LengthMismatch (nonce).
  std::unique_ptr<Keystream> keystream(const KeyMaterial& key, ByteView nonce) const;

 private:
  CipherSpec spec_;
  KeystreamFactory factory_;
};

Ciphertext encrypt(const Cipher& cipher, const KeyMaterial& key, ByteView plaintext,
                   RandomSource& randomness);
/// Throws CipherMismatch when ct was produced by another cipher.
Bytes decrypt(const Cipher& cipher, const KeyMaterial& key, const Ciphertext& ct);

/// 𝔎₁ document, 𝔎₂ wrap, 𝔎₃ call, 𝔎₄ callwrap.
enum class CipherRole { Document, Wrap, Call, CallWrap };

std::string_view role_name(CipherRole role);
std::optional<CipherRole> parse_role(std::string_view name);

/// Set of available cryptosystems plus the role bindings. Build it once at
/// startup and share it const; lookups are thread-safe after that.
///
/// Role bindings must keep the data cipher and its wrapping cipher distinct:
/// Document/Wrap (and Call/CallWrap) may share neither id nor key_length.
class CipherRegistry {
 public:
  explicit CipherRegistry(bool test_mode = false) : test_mode_(test_mode) {}

  /// chacha20, aes128-ctr, aes256-ctr and the test64 test cipher, with the
  /// default role bindings document=chacha20, wrap=aes128-ctr,
  /// call=aes256-ctr, callwrap=aes128-ctr.
  static CipherRegistry with_defaults(bool test_mode = false);

  /// Throws DuplicateCipherId; WrongKeyLength if a secure cipher has a key
  /// shorter than 16 bytes.
  const Cipher& add(CipherSpec spec, KeystreamFactory factory);

  /// Throws UnknownCipher, InsecureCipher (test cipher outside test mode) or
  /// RoleConflict.
  void bind(CipherRole role, std::string_view id);
  /// Replaces every role binding at once; checks the new set against itself.
  /// On failure the previous bindings are kept.
  void rebind(const std::map<CipherRole, std::string>& roles);

  const Cipher& get(std::string_view id) const;
  const Cipher& for_role(CipherRole role) const;
  bool has(std::string_view id) const { return ciphers_.count(std::string(id)) != 0; }
  std::optional<std::string> bound_id(CipherRole role) const;

  std::vector<CipherSpec> specs() const;
  bool test_mode() const { return test_mode_; }

 private:
  bool test_mode_;
  std::map<std::string, std::unique_ptr<Cipher>, std::less<>> ciphers_;
  std::map<CipherRole, std::string> roles_;
};

// Test cipher. 64-bit state seeded over the key bytes as
// s = (s * 0x100000001B3) XOR b starting from 0; each keystream byte advances
// s = s * 6364136223846793005 + 1442695040888963407 (mod 2^64) and emits the
// top 8 bits. Nonce length 0.
inline constexpr std::string_view kTestCipherId = "test64";
inline constexpr std::size_t kTestCipherKeyLength = 8;

/// Spec for a test-recurrence cipher with an arbitrary key length (the
/// standard one is test64 with 8-byte keys; shorter variants make toy key
/// spaces small enough to enumerate).
CipherSpec test_cipher_spec(std::string id, std::size_t key_length);
KeystreamFactory test_cipher_factory();
/// First `n` keystream bytes of the test cipher for `key`.
Bytes test_cipher_keystream(ByteView key, std::size_t n);

}  // namespace splitvault
