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

#include "splitvault/document_vault.hpp"

#include <fcntl.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>

#include "splitvault/error.hpp"
#include "splitvault/secret_split.hpp"

namespace splitvault {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'V', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kKdfPbkdf2Sha256 = 1;
constexpr std::size_t kSaltLength = 16;
constexpr std::size_t kVerifierLength = 32;
constexpr std::size_t kHeaderLength = 4 + 1 + kSaltLength + 1 + 4 + kVerifierLength;
constexpr std::size_t kNonceLength = 12;
constexpr std::size_t kTagLength = 16;

constexpr std::uint8_t kTagRecord = 0x30;
constexpr std::uint8_t kTagTombstone = 0x31;

constexpr std::size_t kMaxDocIdLength = 200;

struct EvpCtx {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  ~EvpCtx() { EVP_CIPHER_CTX_free(ctx); }
};

// First 32 bytes: store key. Last 32 bytes: password verifier.
KeyMaterial derive(std::string_view password, ByteView salt, std::uint32_t iterations) {
  KeyMaterial out(64);
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), static_cast<int>(iterations), EVP_sha256(),
                        64, out.mutable_bytes().data()) != 1) {
    throw Error(ErrorCode::IoError, "PBKDF2 failed");
  }
  return out;
}

Bytes frame_aad(ByteView header, std::uint64_t seq) {
  Bytes aad(header.begin(), header.end());
  put_u64(aad, seq);
  return aad;
}

Bytes gcm_seal(const KeyMaterial& key, ByteView nonce, ByteView aad, ByteView plaintext) {
  EvpCtx c;
  Bytes out(plaintext.size() + kTagLength);
  int len = 0;
  bool ok = c.ctx && EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                                nullptr) == 1 &&
            EVP_EncryptInit_ex(c.ctx, nullptr, nullptr, key.bytes().data(), nonce.data()) == 1 &&
            EVP_EncryptUpdate(c.ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size())) == 1 &&
            EVP_EncryptUpdate(c.ctx, out.data(), &len, plaintext.data(),
                              static_cast<int>(plaintext.size())) == 1 &&
            EVP_EncryptFinal_ex(c.ctx, out.data() + len, &len) == 1 &&
            EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, kTagLength,
                                out.data() + plaintext.size()) == 1;
  if (!ok) throw Error(ErrorCode::IoError, "store encryption failed");
  return out;
}

std::optional<Bytes> gcm_open(const KeyMaterial& key, ByteView nonce, ByteView aad,
                              ByteView sealed) {
  if (sealed.size() < kTagLength) return std::nullopt;
  std::size_t n = sealed.size() - kTagLength;
  EvpCtx c;
  Bytes out(n);
  int len = 0;
  Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(n), sealed.end());
  bool ok = c.ctx && EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                                nullptr) == 1 &&
            EVP_DecryptInit_ex(c.ctx, nullptr, nullptr, key.bytes().data(), nonce.data()) == 1 &&
            EVP_DecryptUpdate(c.ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size())) == 1 &&
            EVP_DecryptUpdate(c.ctx, out.data(), &len, sealed.data(), static_cast<int>(n)) == 1 &&
            EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, kTagLength, tag.data()) == 1 &&
            EVP_DecryptFinal_ex(c.ctx, out.data() + len, &len) == 1;
  if (!ok) {
    secure_wipe(out);
    return std::nullopt;
  }
  return out;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read vault " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_durably(const fs::path& path, ByteView data, bool append) {
  int flags = O_WRONLY | O_CREAT | (append ? O_APPEND : O_TRUNC);
  int fd = ::open(path.c_str(), flags, 0600);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::IoError, "write to " + path.string() + " failed");
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd) != 0) {
    ::close(fd);
    throw Error(ErrorCode::IoError, "fdatasync of " + path.string() + " failed");
  }
  ::close(fd);
}

Bytes encode_record(const DocumentRecord& r) {
  Bytes inner;
  put_tlv(inner, kTagDocId, as_bytes(r.doc_id));
  put_tlv(inner, kTagDPrime, serialize(r.d_prime));
  put_tlv(inner, kTagWrapKeyB, r.wrap_key_b.bytes());
  put_tlv(inner, kTagS1, serialize(r.s1));
  Bytes ts;
  put_u64(ts, r.created_at);
  put_tlv(inner, kTagCreatedAt, ts);
  Bytes out;
  put_tlv(out, kTagRecord, inner);
  secure_wipe(inner);
  return out;
}

DocumentRecord decode_record(ByteView body) {
  DocumentRecord r;
  bool id = false, dp = false, wk = false, s1 = false;
  for (const auto& item : parse_tlv(body)) {
    switch (item.tag) {
      case kTagDocId: r.doc_id = to_string(item.value); id = true; break;
      case kTagDPrime: r.d_prime = parse_ciphertext(item.value); dp = true; break;
      case kTagWrapKeyB: r.wrap_key_b = KeyMaterial(item.value); wk = true; break;
      case kTagS1: r.s1 = parse_ciphertext(item.value); s1 = true; break;
      case kTagCreatedAt: {
        ByteReader tr(item.value);
        r.created_at = tr.u64();
        break;
      }
      default:
        throw Error(ErrorCode::CorruptStore, "unknown field in document record");
    }
  }
  if (!id || !dp || !wk || !s1) throw Error(ErrorCode::CorruptStore, "incomplete document record");
  return r;
}

void validate_doc_id(const std::string& doc_id) {
  if (doc_id.empty() || doc_id.size() > kMaxDocIdLength) {
    throw Error(ErrorCode::UsageError, "document id must be 1..200 bytes");
  }
}

// Scoped plain-bytes buffer that is wiped on exit.
struct WipeOnExit {
  Bytes& bytes;
  ~WipeOnExit() { secure_wipe(bytes); }
};

}  // namespace

DocumentRecord DocumentRecord::clone() const {
  DocumentRecord r;
  r.doc_id = doc_id;
  r.d_prime = d_prime;
  r.wrap_key_b = wrap_key_b.clone();
  r.s1 = s1;
  r.created_at = created_at;
  return r;
}

Bytes encode_token_record(const TokenRecord& record) {
  Bytes out;
  put_tlv(out, kTagDocId, as_bytes(record.doc_id));
  put_tlv(out, kTagWrapKeyA, record.wrap_key_a.bytes());
  put_tlv(out, kTagS2, serialize(record.s2));
  return out;
}

TokenRecord decode_token_record(std::string doc_id, ByteView blob) {
  TokenRecord r;
  bool wk = false, s2 = false;
  try {
    for (const auto& item : parse_tlv(blob)) {
      switch (item.tag) {
        case kTagDocId:
          if (to_string(item.value) != doc_id) {
            throw Error(ErrorCode::CorruptStore, "token record belongs to another document");
          }
          break;
        case kTagWrapKeyA: r.wrap_key_a = KeyMaterial(item.value); wk = true; break;
        case kTagS2: r.s2 = parse_ciphertext(item.value); s2 = true; break;
        default: throw Error(ErrorCode::CorruptStore, "unknown field in token record");
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptStore) throw;
    throw Error(ErrorCode::CorruptStore, std::string("malformed token record: ") + e.what());
  }
  if (!wk || !s2) throw Error(ErrorCode::CorruptStore, "incomplete token record");
  r.doc_id = std::move(doc_id);
  return r;
}

std::string token_key_for(std::string_view doc_id) { return "doc/" + std::string(doc_id); }

// ---------------------------------------------------------------------------

PlaintextBuffer::PlaintextBuffer(PlaintextBuffer&& other) noexcept
    : bytes_(std::move(other.bytes_)), destroyed_(other.destroyed_) {
  other.destroyed_ = true;
}

PlaintextBuffer& PlaintextBuffer::operator=(PlaintextBuffer&& other) noexcept {
  if (this != &other) {
    secure_wipe(bytes_);
    bytes_ = std::move(other.bytes_);
    destroyed_ = other.destroyed_;
    other.destroyed_ = true;
  }
  return *this;
}

PlaintextBuffer::~PlaintextBuffer() { secure_wipe(bytes_); }

ByteView PlaintextBuffer::bytes() const {
  if (destroyed_) throw Error(ErrorCode::AlreadyDestroyed, "plaintext has been destroyed");
  return bytes_;
}

std::size_t PlaintextBuffer::size() const { return bytes().size(); }

void PlaintextBuffer::destroy() {
  if (destroyed_) throw Error(ErrorCode::AlreadyDestroyed, "plaintext already destroyed");
  secure_wipe(bytes_);
  destroyed_ = true;
}

// ---------------------------------------------------------------------------

std::size_t EphemeralSet::size() const {
  std::lock_guard lock(mu_);
  return live_.size();
}

EphemeralSet::Guard::Guard(EphemeralSet& set, KeyMaterial key) : set_(set), key_(std::move(key)) {
  std::lock_guard lock(set_.mu_);
  set_.live_.insert(&key_);
}

EphemeralSet::Guard::~Guard() {
  key_.zeroize();
  std::lock_guard lock(set_.mu_);
  set_.live_.erase(&key_);
}

// ---------------------------------------------------------------------------

Vault::Vault(fs::path path, const CipherRegistry& registry)
    : path_(std::move(path)), registry_(registry) {}

Vault::~Vault() { lock(); }

void Vault::initialize(const fs::path& path, std::string_view password, KdfParams params) {
  if (fs::exists(path)) throw Error(ErrorCode::IoError, "vault already exists: " + path.string());
  if (params.iterations == 0) throw Error(ErrorCode::ConfigError, "KDF iterations must be > 0");
  SystemRandom rng;
  Bytes salt(kSaltLength);
  rng.fill(salt);
  KeyMaterial derived = derive(password, salt, params.iterations);

  Bytes header(kMagic, kMagic + 4);
  put_u8(header, kVersion);
  put_raw(header, salt);
  put_u8(header, kKdfPbkdf2Sha256);
  put_u32(header, params.iterations);
  put_raw(header, derived.bytes().subspan(32, kVerifierLength));

  fs::path tmp = path;
  tmp += ".init";
  write_durably(tmp, header, false);
  fs::rename(tmp, path);
}

Vault::Header Vault::read_header(ByteView file) const {
  if (file.size() < kHeaderLength || std::memcmp(file.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::CorruptStore, "not a vault file: " + path_.string());
  }
  ByteReader r(file.first(kHeaderLength));
  r.raw(4);
  if (r.u8() != kVersion) throw Error(ErrorCode::CorruptStore, "unsupported vault version");
  Header h;
  auto salt = r.raw(kSaltLength);
  h.salt.assign(salt.begin(), salt.end());
  if (r.u8() != kKdfPbkdf2Sha256) throw Error(ErrorCode::CorruptStore, "unknown KDF in vault");
  h.iterations = r.u32();
  if (h.iterations == 0) throw Error(ErrorCode::CorruptStore, "vault KDF iterations is zero");
  auto verifier = r.raw(kVerifierLength);
  h.verifier.assign(verifier.begin(), verifier.end());
  h.raw.assign(file.begin(), file.begin() + kHeaderLength);
  return h;
}

void Vault::unlock(std::string_view password) {
  std::unique_lock lock(mu_);
  Bytes file = read_file(path_);
  WipeOnExit wipe_file{file};
  Header h = read_header(file);
  KeyMaterial derived = derive(password, h.salt, h.iterations);
  if (CRYPTO_memcmp(derived.bytes().data() + 32, h.verifier.data(), kVerifierLength) != 0) {
    throw Error(ErrorCode::BadPassword, "wrong vault password");
  }
  KeyMaterial key(derived.bytes().first(32));

  std::map<std::string, DocumentRecord> records;
  std::uint64_t seq = 0, dead = 0;
  std::size_t pos = kHeaderLength;
  while (pos < file.size()) {
    if (file.size() - pos < 4) break;
    ByteReader lr(ByteView(file).subspan(pos, 4));
    std::uint32_t len = lr.u32();
    if (file.size() - pos - 4 < len) break;  // torn tail
    if (len < kNonceLength + kTagLength) throw Error(ErrorCode::CorruptStore, "short vault frame");
    ByteView frame = ByteView(file).subspan(pos + 4, len);
    auto plain = gcm_open(key, frame.first(kNonceLength), frame_aad(h.raw, seq),
                          frame.subspan(kNonceLength));
    if (!plain) throw Error(ErrorCode::CorruptStore, "vault frame failed authentication");
    WipeOnExit wipe_plain{*plain};
    try {
      auto items = parse_tlv(*plain);
      if (items.size() != 1) throw Error(ErrorCode::CorruptStore, "vault frame holds no record");
      if (items[0].tag == kTagRecord) {
        DocumentRecord rec = decode_record(items[0].value);
        std::string id = rec.doc_id;
        if (records.count(id)) ++dead;
        records.insert_or_assign(id, std::move(rec));
      } else if (items[0].tag == kTagTombstone) {
        auto fields = parse_tlv(items[0].value);
        if (fields.size() != 1 || fields[0].tag != kTagDocId) {
          throw Error(ErrorCode::CorruptStore, "malformed tombstone");
        }
        if (records.erase(to_string(fields[0].value))) ++dead;
        ++dead;
      } else {
        throw Error(ErrorCode::CorruptStore, "unknown vault frame type");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CorruptStore) throw;
      throw Error(ErrorCode::CorruptStore, std::string("malformed vault record: ") + e.what());
    }
    pos += 4 + len;
    ++seq;
  }
  if (pos < file.size()) fs::resize_file(path_, pos);

  store_key_.emplace(std::move(key));
  header_raw_ = std::move(h.raw);
  next_seq_ = seq;
  dead_frames_ = dead;
  records_ = std::move(records);
}

void Vault::lock() {
  std::unique_lock lock(mu_);
  if (store_key_) store_key_->zeroize();
  store_key_.reset();
  records_.clear();
  header_raw_.clear();
}

bool Vault::unlocked() const {
  std::shared_lock lock(mu_);
  return store_key_.has_value();
}

void Vault::require_unlocked() const {
  if (!store_key_) throw Error(ErrorCode::VaultLocked, "vault is locked");
}

Bytes Vault::seal_frame(ByteView plaintext, std::uint64_t seq) {
  Bytes nonce(kNonceLength);
  system_random_.fill(nonce);
  Bytes sealed = gcm_seal(*store_key_, nonce, frame_aad(header_raw_, seq), plaintext);
  Bytes frame;
  put_u32(frame, static_cast<std::uint32_t>(kNonceLength + sealed.size()));
  put_raw(frame, nonce);
  put_raw(frame, sealed);
  return frame;
}

void Vault::append_frame(ByteView plaintext) {
  Bytes frame = seal_frame(plaintext, next_seq_);
  write_durably(path_, frame, true);
  ++next_seq_;
}

void Vault::step(ReadStep s) const {
  if (read_hook_) read_hook_(s);
}

DocumentRecord Vault::encrypt_document(token::TokenClient& token, const std::string& doc_id,
                                       ByteView plaintext, RandomSource& randomness) {
  std::unique_lock lock(mu_);
  require_unlocked();
  validate_doc_id(doc_id);
  if (records_.count(doc_id)) throw Error(ErrorCode::DuplicateDocId, "document exists: " + doc_id);

  const Cipher& doc_cipher = registry_.for_role(CipherRole::Document);
  const Cipher& wrap_cipher = registry_.for_role(CipherRole::Wrap);

  DocumentRecord record;
  record.doc_id = doc_id;
  TokenRecord token_record;
  token_record.doc_id = doc_id;
  {
    KeyMaterial fresh(doc_cipher.spec().key_length);
    randomness.fill(fresh.mutable_bytes());
    EphemeralSet::Guard doc_key(ephemeral_, std::move(fresh));
    record.d_prime = encrypt(doc_cipher, doc_key.key(), plaintext, randomness);

    SplitPair halves = split(doc_key.key(), randomness);
    EphemeralSet::Guard half_a(ephemeral_, std::move(halves.half_a));
    EphemeralSet::Guard half_b(ephemeral_, std::move(halves.half_b));

    KeyMaterial wrap_a(wrap_cipher.spec().key_length);
    KeyMaterial wrap_b(wrap_cipher.spec().key_length);
    randomness.fill(wrap_a.mutable_bytes());
    randomness.fill(wrap_b.mutable_bytes());

    record.s1 = encrypt(wrap_cipher, wrap_a, half_a.key().bytes(), randomness);
    token_record.s2 = encrypt(wrap_cipher, wrap_b, half_b.key().bytes(), randomness);
    record.wrap_key_b = std::move(wrap_b);
    token_record.wrap_key_a = std::move(wrap_a);
  }
  record.created_at = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());

  Bytes blob = encode_token_record(token_record);
  WipeOnExit wipe_blob{blob};
  token_record.wrap_key_a.zeroize();
  try {
    token.put(token_key_for(doc_id), blob, /*overwrite=*/true);
  } catch (const Error& e) {
    throw Error(ErrorCode::TokenUnreachable,
                std::string("cannot store key material on token: ") + e.what());
  }

  try {
    Bytes encoded = encode_record(record);
    WipeOnExit wipe_encoded{encoded};
    append_frame(encoded);
  } catch (...) {
    try {
      token.remove(token_key_for(doc_id));
    } catch (...) {
    }
    throw;
  }
  DocumentRecord result = record.clone();
  records_.emplace(doc_id, std::move(record));
  return result;
}

PlaintextBuffer Vault::read_document(token::TokenClient& token, const std::string& doc_id) {
  std::shared_lock lock(mu_);
  require_unlocked();
  auto it = records_.find(doc_id);
  if (it == records_.end()) throw Error(ErrorCode::UnknownDocument, "no such document: " + doc_id);
  const DocumentRecord& record = it->second;
  // Resolve by stored id so records outlive a change of role bindings.
  const Cipher& doc_cipher = registry_.get(record.d_prime.cipher_id);
  const Cipher& wrap_cipher = registry_.get(record.s1.cipher_id);

  step(ReadStep::FetchToken);
  std::optional<Bytes> blob;
  try {
    blob = token.get(token_key_for(doc_id));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Denied) {
      throw Error(ErrorCode::TokenUnreachable, "token denied access (device revoked?)");
    }
    if (e.code() == ErrorCode::TokenUnreachable) throw;
    throw Error(ErrorCode::TokenUnreachable, std::string("token failure: ") + e.what());
  }
  if (!blob) throw Error(ErrorCode::TokenRecordMissing, "token holds no record for " + doc_id);
  WipeOnExit wipe_blob{*blob};
  TokenRecord fetched = decode_token_record(doc_id, *blob);
  EphemeralSet::Guard wrap_a(ephemeral_, std::move(fetched.wrap_key_a));
  WipeOnExit wipe_s2{fetched.s2.body};

  step(ReadStep::UnwrapHalfA);
  EphemeralSet::Guard half_a(ephemeral_,
                             KeyMaterial::adopt(decrypt(wrap_cipher, wrap_a.key(), record.s1)));

  step(ReadStep::UnwrapHalfB);
  EphemeralSet::Guard half_b(
      ephemeral_, KeyMaterial::adopt(decrypt(wrap_cipher, record.wrap_key_b, fetched.s2)));

  step(ReadStep::Recombine);
  EphemeralSet::Guard doc_key(ephemeral_, combine(half_a.key(), half_b.key()));

  step(ReadStep::DecryptDocument);
  return PlaintextBuffer(decrypt(doc_cipher, doc_key.key(), record.d_prime));
}

void Vault::remove_document(token::TokenClient& token, const std::string& doc_id) {
  std::unique_lock lock(mu_);
  require_unlocked();
  auto it = records_.find(doc_id);
  if (it == records_.end()) throw Error(ErrorCode::UnknownDocument, "no such document: " + doc_id);
  try {
    token.remove(token_key_for(doc_id));
  } catch (const Error& e) {
    throw Error(ErrorCode::TokenUnreachable, std::string("cannot remove token record: ") + e.what());
  }
  Bytes inner;
  put_tlv(inner, kTagDocId, as_bytes(doc_id));
  Bytes tomb;
  put_tlv(tomb, kTagTombstone, inner);
  append_frame(tomb);
  records_.erase(it);
  dead_frames_ += 2;
  if (dead_frames_ > records_.size()) {
    lock.unlock();
    compact();
  }
}

void Vault::compact() {
  std::unique_lock lock(mu_);
  require_unlocked();
  Bytes image = header_raw_;
  std::uint64_t seq = 0;
  for (const auto& [id, record] : records_) {
    Bytes encoded = encode_record(record);
    put_raw(image, seal_frame(encoded, seq++));
    secure_wipe(encoded);
  }
  fs::path tmp = path_;
  tmp += ".compact";
  write_durably(tmp, image, false);
  fs::rename(tmp, path_);
  next_seq_ = seq;
  dead_frames_ = 0;
}

std::vector<std::string> Vault::list() const {
  std::shared_lock lock(mu_);
  require_unlocked();
  std::vector<std::string> ids;
  for (const auto& [id, r] : records_) ids.push_back(id);
  return ids;
}

std::optional<DocumentRecord> Vault::find(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  require_unlocked();
  auto it = records_.find(doc_id);
  if (it == records_.end()) return std::nullopt;
  return it->second.clone();
}

}  // namespace splitvault
