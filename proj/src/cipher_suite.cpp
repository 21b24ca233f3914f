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

#include "splitvault/cipher_suite.hpp"

#include <openssl/evp.h>

#include "splitvault/error.hpp"

namespace splitvault {

Bytes serialize(const Ciphertext& ct) {
  if (ct.cipher_id.size() > 0xff || ct.nonce.size() > 0xff) {
    throw Error(ErrorCode::ProtocolError, "cipher id or nonce too long to serialize");
  }
  Bytes out;
  out.reserve(2 + ct.cipher_id.size() + ct.nonce.size() + 4 + ct.body.size());
  put_u8(out, static_cast<std::uint8_t>(ct.cipher_id.size()));
  put_raw(out, as_bytes(ct.cipher_id));
  put_u8(out, static_cast<std::uint8_t>(ct.nonce.size()));
  put_raw(out, ct.nonce);
  put_u32(out, static_cast<std::uint32_t>(ct.body.size()));
  put_raw(out, ct.body);
  return out;
}

Ciphertext parse_ciphertext(ByteView data) {
  ByteReader r(data);
  Ciphertext ct;
  ct.cipher_id = to_string(r.raw(r.u8()));
  auto nonce = r.raw(r.u8());
  ct.nonce.assign(nonce.begin(), nonce.end());
  auto body = r.raw(r.u32());
  ct.body.assign(body.begin(), body.end());
  if (!r.done()) throw Error(ErrorCode::ProtocolError, "trailing bytes after ciphertext");
  return ct;
}

std::unique_ptr<Keystream> Cipher::keystream(const KeyMaterial& key, ByteView nonce) const {
  ByteView k = key.bytes();
  if (k.size() != spec_.key_length) {
    throw Error(ErrorCode::WrongKeyLength, "cipher " + spec_.id + " expects a " +
                                               std::to_string(spec_.key_length) + "-byte key");
  }
  if (nonce.size() != spec_.nonce_length) {
    throw Error(ErrorCode::LengthMismatch, "cipher " + spec_.id + " expects a " +
                                               std::to_string(spec_.nonce_length) + "-byte nonce");
  }
  return factory_(k, nonce);
}

Ciphertext encrypt(const Cipher& cipher, const KeyMaterial& key, ByteView plaintext,
                   RandomSource& randomness) {
  Ciphertext ct;
  ct.cipher_id = cipher.id();
  ct.nonce.resize(cipher.spec().nonce_length);
  // Validate the key before consuming randomness.
  (void)key.bytes();
  if (key.size() != cipher.spec().key_length) {
    throw Error(ErrorCode::WrongKeyLength, "cipher " + cipher.id() + " expects a " +
                                               std::to_string(cipher.spec().key_length) +
                                               "-byte key");
  }
  randomness.fill(ct.nonce);
  auto ks = cipher.keystream(key, ct.nonce);
  ct.body.resize(plaintext.size());
  ks->apply(plaintext, ct.body);
  return ct;
}

Bytes decrypt(const Cipher& cipher, const KeyMaterial& key, const Ciphertext& ct) {
  if (ct.cipher_id != cipher.id()) {
    throw Error(ErrorCode::CipherMismatch,
                "ciphertext from " + ct.cipher_id + " given to " + cipher.id());
  }
  auto ks = cipher.keystream(key, ct.nonce);
  Bytes out(ct.body.size());
  ks->apply(ct.body, out);
  return out;
}

std::string_view role_name(CipherRole role) {
  switch (role) {
    case CipherRole::Document: return "document";
    case CipherRole::Wrap: return "wrap";
    case CipherRole::Call: return "call";
    case CipherRole::CallWrap: return "callwrap";
  }
  return "?";
}

std::optional<CipherRole> parse_role(std::string_view name) {
  for (auto r : {CipherRole::Document, CipherRole::Wrap, CipherRole::Call, CipherRole::CallWrap}) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

namespace {

class TestKeystream final : public Keystream {
 public:
  explicit TestKeystream(ByteView key) {
    for (auto b : key) state_ = (state_ * 0x100000001B3ULL) ^ b;
  }
  void apply(ByteView in, std::span<std::uint8_t> out) override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
      out[i] = in[i] ^ static_cast<std::uint8_t>(state_ >> 56);
    }
  }

 private:
  std::uint64_t state_ = 0;
};

struct EvpCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};

class EvpKeystream final : public Keystream {
 public:
  EvpKeystream(const EVP_CIPHER* type, ByteView key, ByteView iv) : ctx_(EVP_CIPHER_CTX_new()) {
    if (!ctx_ || EVP_EncryptInit_ex(ctx_.get(), type, nullptr, key.data(), iv.data()) != 1) {
      throw Error(ErrorCode::UnknownCipher, "OpenSSL cipher initialisation failed");
    }
  }
  void apply(ByteView in, std::span<std::uint8_t> out) override {
    std::size_t done = 0;
    // EVP_EncryptUpdate takes an int length.
    constexpr std::size_t kChunk = 1 << 30;
    while (done < in.size()) {
      int n = static_cast<int>(std::min(kChunk, in.size() - done));
      int written = 0;
      if (EVP_EncryptUpdate(ctx_.get(), out.data() + done, &written, in.data() + done, n) != 1 ||
          written != n) {
        throw Error(ErrorCode::UnknownCipher, "OpenSSL keystream update failed");
      }
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  std::unique_ptr<EVP_CIPHER_CTX, EvpCtxDeleter> ctx_;
};

KeystreamFactory aes_ctr_factory(const EVP_CIPHER* type) {
  return [type](ByteView key, ByteView nonce) -> std::unique_ptr<Keystream> {
    return std::make_unique<EvpKeystream>(type, key, nonce);
  };
}

// OpenSSL's ChaCha20 IV is a 32-bit little-endian block counter followed by
// the 96-bit nonce.
std::unique_ptr<Keystream> chacha20_keystream(ByteView key, ByteView nonce) {
  std::array<std::uint8_t, 16> iv{};
  std::copy(nonce.begin(), nonce.end(), iv.begin() + 4);
  return std::make_unique<EvpKeystream>(EVP_chacha20(), key, iv);
}

}  // namespace

CipherSpec test_cipher_spec(std::string id, std::size_t key_length) {
  return CipherSpec{std::move(id), key_length, 0,
                    "test recurrence cipher (64-bit LCG keystream), NOT secure", false};
}

KeystreamFactory test_cipher_factory() {
  return [](ByteView key, ByteView) -> std::unique_ptr<Keystream> {
    return std::make_unique<TestKeystream>(key);
  };
}

Bytes test_cipher_keystream(ByteView key, std::size_t n) {
  TestKeystream ks(key);
  Bytes zeros(n, 0), out(n);
  ks.apply(zeros, out);
  return out;
}

CipherRegistry CipherRegistry::with_defaults(bool test_mode) {
  CipherRegistry reg(test_mode);
  reg.add({"chacha20", 32, 12, "ChaCha20 stream cipher (RFC 8439 keystream)", true},
          chacha20_keystream);
  reg.add({"aes128-ctr", 16, 16, "AES-128 in counter mode", true},
          aes_ctr_factory(EVP_aes_128_ctr()));
  reg.add({"aes256-ctr", 32, 16, "AES-256 in counter mode", true},
          aes_ctr_factory(EVP_aes_256_ctr()));
  reg.add(test_cipher_spec(std::string(kTestCipherId), kTestCipherKeyLength),
          test_cipher_factory());
  reg.bind(CipherRole::Document, "chacha20");
  reg.bind(CipherRole::Wrap, "aes128-ctr");
  reg.bind(CipherRole::Call, "aes256-ctr");
  reg.bind(CipherRole::CallWrap, "aes128-ctr");
  return reg;
}

const Cipher& CipherRegistry::add(CipherSpec spec, KeystreamFactory factory) {
  if (ciphers_.count(spec.id) != 0) {
    throw Error(ErrorCode::DuplicateCipherId, "cipher id already registered: " + spec.id);
  }
  if (spec.id.empty() || spec.id.size() > 0xff) {
    throw Error(ErrorCode::InvalidParameters, "cipher id must be 1..255 characters");
  }
  if (spec.secure && spec.key_length < 16) {
    throw Error(ErrorCode::WrongKeyLength, "secure ciphers need keys of at least 16 bytes");
  }
  auto id = spec.id;
  auto cipher = std::make_unique<Cipher>(std::move(spec), std::move(factory));
  const Cipher& ref = *cipher;
  ciphers_.emplace(std::move(id), std::move(cipher));
  return ref;
}

const Cipher& CipherRegistry::get(std::string_view id) const {
  auto it = ciphers_.find(id);
  if (it == ciphers_.end()) {
    throw Error(ErrorCode::UnknownCipher, "unknown cipher: " + std::string(id));
  }
  return *it->second;
}

namespace {
std::optional<CipherRole> partner(CipherRole role) {
  switch (role) {
    case CipherRole::Document: return CipherRole::Wrap;
    case CipherRole::Wrap: return CipherRole::Document;
    case CipherRole::Call: return CipherRole::CallWrap;
    case CipherRole::CallWrap: return CipherRole::Call;
  }
  return std::nullopt;
}
}  // namespace

void CipherRegistry::bind(CipherRole role, std::string_view id) {
  const Cipher& cipher = get(id);
  if (!cipher.spec().secure && !test_mode_) {
    throw Error(ErrorCode::InsecureCipher,
                "cipher " + cipher.id() + " is a test cipher and cannot take a role");
  }
  if (auto other = partner(role)) {
    if (auto it = roles_.find(*other); it != roles_.end()) {
      const CipherSpec& bound = get(it->second).spec();
      if (bound.id == cipher.id()) {
        throw Error(ErrorCode::RoleConflict, std::string(role_name(role)) + " and " +
                                                 std::string(role_name(*other)) +
                                                 " must use different ciphers");
      }
      if (bound.key_length == cipher.spec().key_length) {
        throw Error(ErrorCode::RoleConflict, std::string(role_name(role)) + " and " +
                                                 std::string(role_name(*other)) +
                                                 " must have disjoint key spaces");
      }
    }
  }
  roles_[role] = cipher.id();
}

void CipherRegistry::rebind(const std::map<CipherRole, std::string>& roles) {
  auto previous = roles_;
  roles_.clear();
  try {
    for (const auto& [role, id] : roles) bind(role, id);
  } catch (...) {
    roles_ = std::move(previous);
    throw;
  }
}

const Cipher& CipherRegistry::for_role(CipherRole role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) {
    throw Error(ErrorCode::UnknownCipher, "no cipher bound to role " + std::string(role_name(role)));
  }
  return get(it->second);
}

std::optional<std::string> CipherRegistry::bound_id(CipherRole role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) return std::nullopt;
  return it->second;
}

std::vector<CipherSpec> CipherRegistry::specs() const {
  std::vector<CipherSpec> out;
  for (const auto& [id, cipher] : ciphers_) out.push_back(cipher->spec());
  return out;
}

}  // namespace splitvault
