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

#include "splitvault/call_keysets.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <set>

#include "splitvault/error.hpp"
#include "splitvault/secret_split.hpp"

namespace splitvault::keysets {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'K', 'S', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr int kDeleteAttempts = 3;

Bytes encode_pair(PairId pair) {
  Bytes b;
  put_u32(b, pair.low);
  put_u32(b, pair.high);
  return b;
}

PairId decode_pair(ByteView v) {
  ByteReader r(v);
  PairId p{r.u32(), r.u32()};
  if (!r.done() || p.low >= p.high || p.low == 0) {
    throw Error(ErrorCode::CorruptStore, "malformed pair field");
  }
  return p;
}

Bytes encode_index(std::uint32_t index) {
  Bytes b;
  put_u32(b, index);
  return b;
}

std::uint32_t decode_u32(ByteView v) {
  ByteReader r(v);
  std::uint32_t x = r.u32();
  if (!r.done()) throw Error(ErrorCode::CorruptStore, "malformed integer field");
  return x;
}

void check_parameters(std::uint32_t employees, std::uint32_t sets_per_pair) {
  if (employees < 2 || sets_per_pair < 1) {
    throw Error(ErrorCode::InvalidParameters, "need at least 2 employees and 1 set per pair");
  }
}

// Direction nonce: the lower-numbered employee's outbound stream uses 1, the
// other direction 2. Both endpoints agree because the rule depends only on
// the pair.
Bytes direction_nonce(const Cipher& cipher, std::uint32_t from, std::uint32_t to) {
  Bytes nonce(cipher.spec().nonce_length, 0);
  if (!nonce.empty()) nonce.back() = from < to ? 1 : 2;
  return nonce;
}

}  // namespace

PairId PairId::of(std::uint32_t a, std::uint32_t b) {
  if (a == b || a == 0 || b == 0) {
    throw Error(ErrorCode::InvalidParameters, "a pair needs two distinct employees (numbered from 1)");
  }
  return a < b ? PairId{a, b} : PairId{b, a};
}

std::string token_key(PairId pair, std::uint32_t index) {
  return "ks/" + std::to_string(pair.low) + "-" + std::to_string(pair.high) + "/" +
         std::to_string(index);
}

Bytes encode_token_part(PairId pair, std::uint32_t index, const TokenPart& part) {
  Bytes out;
  put_tlv(out, kTagPair, encode_pair(pair));
  put_tlv(out, kTagIndex, encode_index(index));
  put_tlv(out, kTagWrapKey, part.wrap_key.bytes());
  put_tlv(out, kTagWrappedHalf, serialize(part.wrapped_half));
  return out;
}

TokenPart decode_token_part(PairId pair, std::uint32_t index, ByteView blob) {
  TokenPart part;
  bool key = false, half = false;
  try {
    for (const auto& item : parse_tlv(blob)) {
      switch (item.tag) {
        case kTagPair:
          if (decode_pair(item.value) != pair) throw Error(ErrorCode::CorruptStore, "pair mismatch");
          break;
        case kTagIndex:
          if (decode_u32(item.value) != index) throw Error(ErrorCode::CorruptStore, "index mismatch");
          break;
        case kTagWrapKey: part.wrap_key = KeyMaterial(item.value); key = true; break;
        case kTagWrappedHalf: part.wrapped_half = parse_ciphertext(item.value); half = true; break;
        default: throw Error(ErrorCode::CorruptStore, "unknown field in keyset token part");
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptStore) throw;
    throw Error(ErrorCode::CorruptStore, std::string("malformed keyset token part: ") + e.what());
  }
  if (!key || !half) throw Error(ErrorCode::CorruptStore, "incomplete keyset token part");
  return part;
}

// ---------------------------------------------------------------------------

PhoneKeysetStore PhoneKeysetStore::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read keyset store " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 5 || std::memcmp(data.data(), kMagic, 4) != 0 || data[4] != kVersion) {
    throw Error(ErrorCode::CorruptStore, "not a keyset store: " + path.string());
  }
  try {
    auto items = parse_tlv(ByteView(data).subspan(5));
    if (items.empty() || items[0].tag != kTagOwner) {
      throw Error(ErrorCode::CorruptStore, "keyset store has no owner");
    }
    PhoneKeysetStore store(decode_u32(items[0].value));
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (items[i].tag == kTagPendingDelete) {
        store.pending_deletes_.push_back(to_string(items[i].value));
        continue;
      }
      if (items[i].tag != kTagEntry) throw Error(ErrorCode::CorruptStore, "unknown keyset item");
      std::optional<PairId> pair;
      std::optional<std::uint32_t> index;
      Entry entry;
      std::optional<KeyMaterial> wrap_key;
      std::optional<Ciphertext> half;
      for (const auto& f : parse_tlv(items[i].value)) {
        switch (f.tag) {
          case kTagPair: pair = decode_pair(f.value); break;
          case kTagIndex: index = decode_u32(f.value); break;
          case kTagState:
            if (f.value.size() != 1 || f.value[0] > 1) {
              throw Error(ErrorCode::CorruptStore, "bad keyset state");
            }
            entry.state = static_cast<KeysetState>(f.value[0]);
            break;
          case kTagWrapKey: wrap_key.emplace(f.value); break;
          case kTagWrappedHalf: half = parse_ciphertext(f.value); break;
          case kTagPlainKey: entry.plain_key.emplace(f.value); break;
          default: throw Error(ErrorCode::CorruptStore, "unknown keyset entry field");
        }
      }
      if (!pair || !index || !pair->contains(store.owner_)) {
        throw Error(ErrorCode::CorruptStore, "keyset entry without valid pair/index");
      }
      if (wrap_key && half) entry.phone_part = PhonePart{std::move(*wrap_key), std::move(*half)};
      store.entries_.emplace(Slot{*pair, *index}, std::move(entry));
    }
    store.path_ = path;
    secure_wipe(data);
    return store;
  } catch (const Error& e) {
    secure_wipe(data);
    if (e.code() == ErrorCode::CorruptStore) throw;
    throw Error(ErrorCode::CorruptStore, std::string("malformed keyset store: ") + e.what());
  }
}

void PhoneKeysetStore::save_as(const fs::path& path) {
  path_ = path;
  save();
}

void PhoneKeysetStore::save() const {
  if (path_.empty()) return;
  Bytes out(kMagic, kMagic + 4);
  put_u8(out, kVersion);
  put_tlv(out, kTagOwner, encode_index(owner_));
  for (const auto& [slot, entry] : entries_) {
    Bytes inner;
    put_tlv(inner, kTagPair, encode_pair(slot.first));
    put_tlv(inner, kTagIndex, encode_index(slot.second));
    Bytes state{static_cast<std::uint8_t>(entry.state)};
    put_tlv(inner, kTagState, state);
    if (entry.phone_part) {
      put_tlv(inner, kTagWrapKey, entry.phone_part->wrap_key.bytes());
      put_tlv(inner, kTagWrappedHalf, serialize(entry.phone_part->wrapped_half));
    }
    if (entry.plain_key) put_tlv(inner, kTagPlainKey, entry.plain_key->bytes());
    put_tlv(out, kTagEntry, inner);
    secure_wipe(inner);
  }
  for (const auto& key : pending_deletes_) put_tlv(out, kTagPendingDelete, as_bytes(key));

  fs::path tmp = path_;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot write keyset store " + path_.string());
  std::size_t done = 0;
  bool ok = true;
  while (done < out.size()) {
    ssize_t n = ::write(fd, out.data() + done, out.size() - done);
    if (n <= 0) {
      ok = false;
      break;
    }
    done += static_cast<std::size_t>(n);
  }
  ok = ok && ::fsync(fd) == 0;
  ::close(fd);
  secure_wipe(out);
  if (!ok) throw Error(ErrorCode::IoError, "cannot write keyset store " + path_.string());
  fs::rename(tmp, path_);
}

PhoneKeysetStore::Entry* PhoneKeysetStore::find(PairId pair, std::uint32_t index) {
  auto it = entries_.find(Slot{pair, index});
  return it == entries_.end() ? nullptr : &it->second;
}

const PhoneKeysetStore::Entry* PhoneKeysetStore::find(PairId pair, std::uint32_t index) const {
  auto it = entries_.find(Slot{pair, index});
  return it == entries_.end() ? nullptr : &it->second;
}

void PhoneKeysetStore::insert(PairId pair, std::uint32_t index, Entry entry) {
  if (!pair.contains(owner_)) {
    throw Error(ErrorCode::InvalidParameters, "entry does not involve this phone's owner");
  }
  entries_.insert_or_assign(Slot{pair, index}, std::move(entry));
}

std::size_t PhoneKeysetStore::count(std::uint32_t peer, KeysetState state) const {
  std::size_t n = 0;
  for (const auto& [slot, entry] : entries_) {
    if (slot.first.contains(peer) && entry.state == state) ++n;
  }
  return n;
}

std::optional<std::uint32_t> PhoneKeysetStore::next_fresh(std::uint32_t peer) const {
  PairId pair = PairId::of(owner_, peer);
  for (auto it = entries_.lower_bound(Slot{pair, 0});
       it != entries_.end() && it->first.first == pair; ++it) {
    if (it->second.state == KeysetState::Fresh && !it->second.in_use) return it->first.second;
  }
  return std::nullopt;
}

std::vector<std::uint32_t> PhoneKeysetStore::peers() const {
  std::set<std::uint32_t> ids;
  for (const auto& [slot, entry] : entries_) ids.insert(slot.first.other(owner_));
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------

Distribution provision(std::uint32_t employees, std::uint32_t sets_per_pair,
                       const CipherRegistry& registry, RandomSource& randomness) {
  check_parameters(employees, sets_per_pair);
  const Cipher& call = registry.for_role(CipherRole::Call);
  const Cipher& wrap = registry.for_role(CipherRole::CallWrap);

  Distribution dist;
  dist.employees = employees;
  dist.sets_per_pair = sets_per_pair;
  dist.entries.reserve(expected_entry_count(employees, sets_per_pair));
  for (std::uint32_t i = 1; i <= employees; ++i) {
    for (std::uint32_t j = i + 1; j <= employees; ++j) {
      for (std::uint32_t t = 1; t <= sets_per_pair; ++t) {
        KeyMaterial call_key(call.spec().key_length);
        randomness.fill(call_key.mutable_bytes());
        SplitPair halves = split(call_key, randomness);
        call_key.zeroize();

        KeyMaterial wrap_a(wrap.spec().key_length);
        KeyMaterial wrap_b(wrap.spec().key_length);
        randomness.fill(wrap_a.mutable_bytes());
        randomness.fill(wrap_b.mutable_bytes());

        KeysetEntry e;
        e.pair = PairId{i, j};
        e.index = t;
        e.phone_part.wrapped_half = encrypt(wrap, wrap_a, halves.half_a.bytes(), randomness);
        e.token_part.wrapped_half = encrypt(wrap, wrap_b, halves.half_b.bytes(), randomness);
        e.phone_part.wrap_key = std::move(wrap_b);
        e.token_part.wrap_key = std::move(wrap_a);
        dist.entries.push_back(std::move(e));
      }
    }
  }
  return dist;
}

PhoneKeysetStore Distribution::phone_store_for(std::uint32_t employee) const {
  if (employee < 1 || employee > employees) {
    throw Error(ErrorCode::InvalidParameters, "no such employee");
  }
  PhoneKeysetStore store(employee);
  for (const auto& e : entries) {
    if (!e.pair.contains(employee)) continue;
    PhoneKeysetStore::Entry entry;
    entry.state = e.state;
    entry.phone_part = PhonePart{e.phone_part.wrap_key.clone(), e.phone_part.wrapped_half};
    store.insert(e.pair, e.index, std::move(entry));
  }
  return store;
}

std::vector<std::pair<std::string, Bytes>> Distribution::token_blobs_for(
    std::uint32_t employee) const {
  if (employee < 1 || employee > employees) {
    throw Error(ErrorCode::InvalidParameters, "no such employee");
  }
  std::vector<std::pair<std::string, Bytes>> blobs;
  for (const auto& e : entries) {
    if (!e.pair.contains(employee)) continue;
    blobs.emplace_back(token_key(e.pair, e.index), encode_token_part(e.pair, e.index, e.token_part));
  }
  return blobs;
}

SimpleDistribution provision_simple(std::uint32_t employees, std::uint32_t sets_per_pair,
                                    const CipherRegistry& registry, RandomSource& randomness) {
  check_parameters(employees, sets_per_pair);
  const Cipher& call = registry.for_role(CipherRole::Call);
  SimpleDistribution dist;
  dist.employees = employees;
  dist.sets_per_pair = sets_per_pair;
  for (std::uint32_t i = 1; i <= employees; ++i) {
    for (std::uint32_t j = i + 1; j <= employees; ++j) {
      for (std::uint32_t t = 1; t <= sets_per_pair; ++t) {
        KeyMaterial key(call.spec().key_length);
        randomness.fill(key.mutable_bytes());
        dist.keys.push_back(SimpleDistribution::Key{PairId{i, j}, t, std::move(key)});
      }
    }
  }
  return dist;
}

PhoneKeysetStore SimpleDistribution::phone_store_for(std::uint32_t employee) const {
  if (employee < 1 || employee > employees) {
    throw Error(ErrorCode::InvalidParameters, "no such employee");
  }
  PhoneKeysetStore store(employee);
  for (const auto& k : keys) {
    if (!k.pair.contains(employee)) continue;
    PhoneKeysetStore::Entry entry;
    entry.plain_key = k.call_key.clone();
    store.insert(k.pair, k.index, std::move(entry));
  }
  return store;
}

// ---------------------------------------------------------------------------

CallSession::CallSession(PairId pair, std::uint32_t index, std::uint32_t self,
                         KeyMaterial call_key, const Cipher& cipher)
    : pair_(pair), index_(index), self_(self), call_key_(std::move(call_key)) {
  std::uint32_t peer = pair.other(self);
  outbound_ = cipher.keystream(call_key_, direction_nonce(cipher, self, peer));
  inbound_ = cipher.keystream(call_key_, direction_nonce(cipher, peer, self));
}

CallSession::~CallSession() { end(); }

Bytes CallSession::stream_chunk(Direction direction, ByteView chunk) {
  if (!open_) throw Error(ErrorCode::SessionClosed, "call session is closed");
  Bytes out(chunk.size());
  (direction == Direction::Outbound ? outbound_ : inbound_)->apply(chunk, out);
  return out;
}

const KeyMaterial& CallSession::call_key() const {
  if (!open_) throw Error(ErrorCode::SessionClosed, "call session is closed");
  return call_key_;
}

void CallSession::end() noexcept {
  open_ = false;
  call_key_.zeroize();
  outbound_.reset();
  inbound_.reset();
}

namespace {

PhoneKeysetStore::Entry& claim(PhoneKeysetStore& phone, PairId pair, std::uint32_t k) {
  PhoneKeysetStore::Entry* entry = phone.find(pair, k);
  if (entry == nullptr) {
    throw Error(ErrorCode::MissingEntry, "no keyset " + std::to_string(k) + " for pair " +
                                             std::to_string(pair.low) + "-" +
                                             std::to_string(pair.high));
  }
  if (entry->state == KeysetState::Consumed) {
    throw Error(ErrorCode::AlreadyConsumed, "keyset " + std::to_string(k) + " already used");
  }
  if (entry->in_use) {
    throw Error(ErrorCode::AlreadyConsumed, "keyset " + std::to_string(k) + " is in use");
  }
  return *entry;
}

}  // namespace

CallSession open_call(PhoneKeysetStore& phone, token::TokenClient& token,
                      const CipherRegistry& registry, std::uint32_t peer, std::uint32_t k) {
  PairId pair = PairId::of(phone.owner(), peer);
  PhoneKeysetStore::Entry& entry = claim(phone, pair, k);
  if (!entry.phone_part) {
    throw Error(ErrorCode::MissingEntry, "keyset holds no wrapped material (simple-mode store?)");
  }
  const Cipher& call = registry.for_role(CipherRole::Call);
  const Cipher& wrap = registry.for_role(CipherRole::CallWrap);

  std::optional<Bytes> blob;
  try {
    flush_pending_deletes(phone, token);
    blob = token.get(token_key(pair, k));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TokenUnreachable) throw;
    throw Error(ErrorCode::TokenUnreachable, std::string("token failure: ") + e.what());
  }
  if (!blob) throw Error(ErrorCode::MissingEntry, "token holds no part for keyset " + std::to_string(k));
  TokenPart part = decode_token_part(pair, k, *blob);
  secure_wipe(*blob);

  KeyMaterial half_a = KeyMaterial::adopt(decrypt(wrap, part.wrap_key, entry.phone_part->wrapped_half));
  KeyMaterial half_b = KeyMaterial::adopt(decrypt(wrap, entry.phone_part->wrap_key, part.wrapped_half));
  part.wrap_key.zeroize();
  CallSession session(pair, k, phone.owner(), combine(half_a, half_b), call);
  entry.in_use = true;
  return session;
}

CallSession open_simple_call(PhoneKeysetStore& phone, const CipherRegistry& registry,
                             std::uint32_t peer, std::uint32_t k) {
  PairId pair = PairId::of(phone.owner(), peer);
  PhoneKeysetStore::Entry& entry = claim(phone, pair, k);
  if (!entry.plain_key) {
    throw Error(ErrorCode::MissingEntry, "keyset holds no plain call key (split-mode store?)");
  }
  CallSession session(pair, k, phone.owner(), entry.plain_key->clone(),
                      registry.for_role(CipherRole::Call));
  entry.in_use = true;
  return session;
}

std::size_t flush_pending_deletes(PhoneKeysetStore& phone, token::TokenClient& token) {
  auto& pending = phone.pending_deletes();
  if (pending.empty()) return 0;
  std::vector<std::string> still;
  for (const auto& key : pending) {
    try {
      token.remove(key);
    } catch (const Error&) {
      still.push_back(key);
    }
  }
  bool changed = still.size() != pending.size();
  pending = std::move(still);
  if (changed) phone.save();
  return pending.size();
}

void close_call(CallSession& session, PhoneKeysetStore& phone, token::TokenClient* token,
                CallOutcome /*outcome: both consume the set*/) {
  PairId pair = session.pair();
  std::uint32_t k = session.index();
  session.end();

  if (PhoneKeysetStore::Entry* entry = phone.find(pair, k)) {
    entry->state = KeysetState::Consumed;
    entry->in_use = false;
    if (entry->phone_part) entry->phone_part->wrap_key.zeroize();
    entry->phone_part.reset();
    if (entry->plain_key) entry->plain_key->zeroize();
    entry->plain_key.reset();
  }

  if (token != nullptr) {
    std::string key = token_key(pair, k);
    bool deleted = false;
    for (int attempt = 0; attempt < kDeleteAttempts && !deleted; ++attempt) {
      try {
        token->remove(key);
        deleted = true;
      } catch (const Error&) {
      }
    }
    if (!deleted) phone.pending_deletes().push_back(key);
  }
  try {
    phone.save();
  } catch (const Error&) {
    // Consumed in memory; the next successful save persists it.
  }
}

}  // namespace splitvault::keysets
