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

#include "splitvault/cli.hpp"

#include <fcntl.h>
#include <pthread.h>
#include <signal.h>
#include <termios.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "splitvault/call_keysets.hpp"
#include "splitvault/config.hpp"
#include "splitvault/document_vault.hpp"
#include "splitvault/keygen_audit.hpp"
#include "splitvault/token_client.hpp"
#include "splitvault/token_store.hpp"

namespace splitvault::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code(ErrorCode code) {
  if (code == ErrorCode::UsageError) return kExitUsage;
  return 10 + static_cast<int>(code);
}

namespace {

// Collects command output and prints it as key=value lines or one JSON object.
class Report {
 public:
  explicit Report(bool json) : json_(json) {}

  template <typename T>
  Report& add(const std::string& key, const T& value) {
    doc_[key] = value;
    return *this;
  }
  Report& add_rows(const std::string& key, ordered_json rows) {
    doc_[key] = std::move(rows);
    return *this;
  }

  void print(std::ostream& out) const {
    if (json_) {
      out << doc_.dump() << '\n';
      return;
    }
    for (const auto& [key, value] : doc_.items()) {
      if (value.is_array()) {
        for (const auto& row : value) out << line(row) << '\n';
      } else {
        out << key << '=' << scalar(value) << '\n';
      }
    }
  }

 private:
  static std::string scalar(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "none";
    return v.dump();
  }
  static std::string line(const ordered_json& row) {
    std::string s;
    for (const auto& [k, v] : row.items()) {
      if (!s.empty()) s += ' ';
      s += k + '=' + scalar(v);
    }
    return s;
  }

  bool json_;
  ordered_json doc_ = ordered_json::object();
};

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::string read_password() {
  if (const char* env = std::getenv(kPasswordEnv)) return env;
  int fd = ::open("/dev/tty", O_RDWR | O_NOCTTY);
  if (fd < 0) {
    throw Error(ErrorCode::UsageError,
                std::string("no terminal for the password prompt; set ") + kPasswordEnv);
  }
  termios saved{};
  const bool have_termios = ::tcgetattr(fd, &saved) == 0;
  if (have_termios) {
    termios quiet = saved;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(fd, TCSAFLUSH, &quiet);
  }
  const char prompt[] = "Vault password: ";
  (void)!::write(fd, prompt, sizeof(prompt) - 1);
  std::string password;
  char c = 0;
  while (::read(fd, &c, 1) == 1 && c != '\n') password.push_back(c);
  (void)!::write(fd, "\n", 1);
  if (have_termios) ::tcsetattr(fd, TCSAFLUSH, &saved);
  ::close(fd);
  return password;
}

struct Globals {
  std::string config_path;
  bool json = false;
  std::string token_address;
  std::string device_id;
  std::string vault_path;
};

Config load_config(const Globals& g) {
  Config cfg;
  if (!g.config_path.empty()) {
    cfg = Config::load(g.config_path);
  } else if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
    cfg = Config::load(env);
  }
  if (!g.token_address.empty()) cfg.token_address = g.token_address;
  if (!g.device_id.empty()) cfg.device_id = g.device_id;
  if (!g.vault_path.empty()) cfg.vault_path = g.vault_path;
  return cfg;
}

std::unique_ptr<token::TcpTokenClient> connect_token(const Config& cfg) {
  auto [host, port] = token::parse_address(cfg.token_address);
  return std::make_unique<token::TcpTokenClient>(host, port, cfg.device_id);
}

// ---------------------------------------------------------------------------
// vault

struct VaultArgs {
  std::string id;
  std::string in;
  std::string out;
};

int vault_init(const Config& cfg, Report& report) {
  const auto password = read_password();
  Vault::initialize(cfg.vault_path, password, KdfParams{cfg.kdf_iterations});
  report.add("vault", cfg.vault_path.string()).add("iterations", cfg.kdf_iterations);
  return kExitOk;
}

int vault_encrypt(const Config& cfg, const VaultArgs& a, Report& report) {
  const auto registry = cfg.registry();
  Bytes plaintext = read_file(a.in);
  Vault vault(cfg.vault_path, registry);
  vault.unlock(read_password());
  auto token = connect_token(cfg);
  SystemRandom rng;
  auto record = vault.encrypt_document(*token, a.id, plaintext, rng);
  secure_wipe(plaintext);
  report.add("encrypted", record.doc_id)
      .add("bytes", record.d_prime.body.size())
      .add("document_cipher", record.d_prime.cipher_id)
      .add("wrap_cipher", record.s1.cipher_id);
  return kExitOk;
}

int vault_read(const Config& cfg, const VaultArgs& a, bool json, std::ostream& out) {
  const auto registry = cfg.registry();
  Vault vault(cfg.vault_path, registry);
  vault.unlock(read_password());
  auto token = connect_token(cfg);
  auto plaintext = vault.read_document(*token, a.id);
  if (!a.out.empty()) {
    write_file(a.out, plaintext.bytes());
    Report(json).add("read", a.id).add("bytes", plaintext.size()).add("out", a.out).print(out);
  } else if (json) {
    Report(json).add("read", a.id).add("bytes", plaintext.size())
        .add("data_hex", to_hex(plaintext.bytes())).print(out);
  } else {
    const auto data = plaintext.bytes();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
  }
  plaintext.destroy();
  return kExitOk;
}

int vault_rm(const Config& cfg, const VaultArgs& a, Report& report) {
  const auto registry = cfg.registry();
  Vault vault(cfg.vault_path, registry);
  vault.unlock(read_password());
  auto token = connect_token(cfg);
  vault.remove_document(*token, a.id);
  report.add("removed", a.id);
  return kExitOk;
}

int vault_list(const Config& cfg, Report& report) {
  const auto registry = cfg.registry();
  Vault vault(cfg.vault_path, registry);
  vault.unlock(read_password());
  ordered_json rows = ordered_json::array();
  for (const auto& id : vault.list()) {
    auto rec = vault.find(id);
    rows.push_back({{"id", id}, {"bytes", rec ? rec->d_prime.body.size() : 0}});
  }
  report.add("count", rows.size()).add_rows("documents", std::move(rows));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// token

struct TokenArgs {
  std::string bind = "127.0.0.1:7441";
  std::string mode;
  std::string store;
  std::string device;
};

int token_serve(const Config& cfg, const TokenArgs& a, bool json, std::ostream& out) {
  const auto mode_text = a.mode.empty() ? cfg.token_mode : a.mode;
  auto mode = token::parse_mode(mode_text);
  if (!mode) throw Error(ErrorCode::UsageError, "unknown token mode: " + mode_text);
  const fs::path store_path = a.store.empty() ? cfg.token_store : fs::path(a.store);
  auto [host, port] = token::parse_address(a.bind);

  // Block the stop signals before any server thread exists so only sigwait
  // below receives them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  auto service = std::make_shared<token::TokenService>(
      *mode, token::BlobStore::open(store_path),
      token::DeviceRegistry(token::DeviceRegistry::path_for_store(store_path)));
  token::TokenServer server(service);
  server.start(host, port);
  Report(json)
      .add("listening", host + ":" + std::to_string(server.port()))
      .add("mode", std::string(token::mode_name(*mode)))
      .add("store", store_path.string())
      .print(out);
  out.flush();

  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
  return kExitOk;
}

int token_device(const Config& cfg, const TokenArgs& a, bool revoke, Report& report) {
  const fs::path store_path = a.store.empty() ? cfg.token_store : fs::path(a.store);
  token::DeviceRegistry registry(token::DeviceRegistry::path_for_store(store_path));
  if (revoke) {
    registry.revoke(a.device);
    report.add("revoked", a.device);
  } else {
    registry.enroll(a.device);
    report.add("enrolled", a.device);
  }
  report.add("registry", token::DeviceRegistry::path_for_store(store_path).string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// keysets

struct KeysetArgs {
  std::string dir;
  std::uint32_t employees = 0;
  std::uint32_t sets = 0;
  bool simple = false;
  std::uint32_t employee = 0;
  std::uint32_t caller = 0;
  std::uint32_t callee = 0;
  std::uint32_t index = 0;
  bool fail = false;
  std::string message = "splitvault call test";
};

fs::path phone_file(const fs::path& dir, std::uint32_t e) {
  return dir / ("phone_" + std::to_string(e) + ".sks");
}
fs::path token_file(const fs::path& dir, std::uint32_t e) {
  return dir / ("token_" + std::to_string(e) + ".log");
}

int keysets_provision(const Config& cfg, const KeysetArgs& a, Report& report) {
  const fs::path dir = a.dir.empty() ? cfg.keysets_dir : fs::path(a.dir);
  const auto registry = cfg.registry();
  fs::create_directories(dir);
  if (fs::exists(phone_file(dir, 1))) {
    throw Error(ErrorCode::IoError, "keysets already provisioned in " + dir.string());
  }
  SystemRandom rng;
  std::size_t entries = 0;
  if (a.simple) {
    auto dist = keysets::provision_simple(a.employees, a.sets, registry, rng);
    entries = dist.keys.size();
    for (std::uint32_t e = 1; e <= a.employees; ++e) {
      dist.phone_store_for(e).save_as(phone_file(dir, e));
    }
  } else {
    auto dist = keysets::provision(a.employees, a.sets, registry, rng);
    entries = dist.entries.size();
    for (std::uint32_t e = 1; e <= a.employees; ++e) {
      dist.phone_store_for(e).save_as(phone_file(dir, e));
      auto store = token::BlobStore::open(token_file(dir, e));
      for (auto& [key, blob] : dist.token_blobs_for(e)) {
        store.put(key, blob, true);
        secure_wipe(blob);
      }
    }
  }
  report.add("provisioned", entries)
      .add("employees", a.employees)
      .add("sets_per_pair", a.sets)
      .add("mode", a.simple ? "simple" : "split")
      .add("dir", dir.string());
  return kExitOk;
}

int keysets_status(const Config& cfg, const KeysetArgs& a, Report& report) {
  const fs::path dir = a.dir.empty() ? cfg.keysets_dir : fs::path(a.dir);
  auto phone = keysets::PhoneKeysetStore::load(phone_file(dir, a.employee));
  ordered_json rows = ordered_json::array();
  for (auto peer : phone.peers()) {
    rows.push_back({{"peer", peer},
                    {"fresh", phone.count(peer, keysets::KeysetState::Fresh)},
                    {"consumed", phone.count(peer, keysets::KeysetState::Consumed)}});
  }
  report.add("employee", a.employee)
      .add("pending_deletes", phone.pending_deletes().size())
      .add_rows("peers", std::move(rows));
  return kExitOk;
}

// Runs one call between two employees over their own token servers.
int keysets_call_sim(const Config& cfg, const KeysetArgs& a, Report& report) {
  if (a.caller == a.callee) throw Error(ErrorCode::UsageError, "caller and callee must differ");
  const fs::path dir = a.dir.empty() ? cfg.keysets_dir : fs::path(a.dir);
  const auto registry = cfg.registry();
  auto phone_a = keysets::PhoneKeysetStore::load(phone_file(dir, a.caller));
  auto phone_b = keysets::PhoneKeysetStore::load(phone_file(dir, a.callee));

  std::uint32_t k = a.index;
  if (k == 0) {
    auto next = phone_a.next_fresh(a.callee);
    if (!next) {
      throw Error(ErrorCode::MissingEntry, "no fresh keyset left for pair " +
                                               std::to_string(a.caller) + "-" +
                                               std::to_string(a.callee));
    }
    k = *next;
  }
  const auto* probe = phone_a.find(keysets::PairId::of(a.caller, a.callee), k);
  const bool simple = probe != nullptr && probe->plain_key.has_value();

  std::unique_ptr<token::TokenServer> server_a, server_b;
  std::unique_ptr<token::TcpTokenClient> token_a, token_b;
  auto start = [&](std::uint32_t e, std::unique_ptr<token::TokenServer>& server,
                   std::unique_ptr<token::TcpTokenClient>& client) {
    auto service = std::make_shared<token::TokenService>(token::ServiceMode::Wristband,
                                                         token::BlobStore::open(token_file(dir, e)));
    server = std::make_unique<token::TokenServer>(service);
    server->start("127.0.0.1", 0);
    client = std::make_unique<token::TcpTokenClient>("127.0.0.1", server->port());
  };
  if (!simple) {
    start(a.caller, server_a, token_a);
    start(a.callee, server_b, token_b);
  }

  auto open = [&](keysets::PhoneKeysetStore& phone, token::TcpTokenClient* client,
                  std::uint32_t peer) {
    return simple ? keysets::open_simple_call(phone, registry, peer, k)
                  : keysets::open_call(phone, *client, registry, peer, k);
  };
  auto session_a = open(phone_a, token_a.get(), a.callee);
  std::optional<keysets::CallSession> session_b;
  try {
    session_b.emplace(open(phone_b, token_b.get(), a.caller));
  } catch (...) {
    keysets::close_call(session_a, phone_a, token_a.get(), keysets::CallOutcome::ConnectionFailed);
    throw;
  }

  std::string roundtrip = "skipped";
  if (!a.fail) {
    const Bytes message = to_bytes(a.message);
    Bytes wire = session_a.stream_chunk(keysets::Direction::Outbound, message);
    Bytes heard = session_b->stream_chunk(keysets::Direction::Inbound, wire);
    Bytes reply_wire = session_b->stream_chunk(keysets::Direction::Outbound, message);
    Bytes reply = session_a.stream_chunk(keysets::Direction::Inbound, reply_wire);
    const bool ok = heard == message && reply == message && wire != message;
    roundtrip = ok ? "ok" : "mismatch";
  }
  const auto outcome =
      a.fail ? keysets::CallOutcome::ConnectionFailed : keysets::CallOutcome::Completed;
  keysets::close_call(session_a, phone_a, token_a.get(), outcome);
  keysets::close_call(*session_b, phone_b, token_b.get(), outcome);

  report.add("pair", std::to_string(std::min(a.caller, a.callee)) + "-" +
                         std::to_string(std::max(a.caller, a.callee)))
      .add("index", k)
      .add("mode", simple ? "simple" : "split")
      .add("outcome", a.fail ? "connection_failed" : "completed")
      .add("roundtrip", roundtrip)
      .add("fresh_remaining", phone_a.count(a.callee, keysets::KeysetState::Fresh));
  return roundtrip == "mismatch" ? kExitInternal : kExitOk;
}

// ---------------------------------------------------------------------------
// keygen

struct KeygenArgs {
  std::string transcript;
  bool csprng = false;
  std::size_t bits = 0;
  std::string out;
  unsigned n = 0;
  unsigned deck = 0;
  unsigned discarded = 0;
  unsigned passes = 1;
  std::string generator = "csprng";
  unsigned space_bits = 64;
  std::uint64_t seed = 0;
  bool seeded = false;
  std::size_t key_bytes = 32;
  double claim = 0;
  std::size_t samples = 0;
  std::string keys_file;
  double threshold = 0;
};

int keygen_cards(const KeygenArgs& a, Report& report) {
  keygen::BitKey key;
  std::size_t passes = 0;
  if (a.csprng) {
    SystemRandom rng;
    key = keygen::generate_key(a.bits, std::ref<RandomSource>(rng));
  } else {
    if (a.transcript.empty()) throw Error(ErrorCode::UsageError, "--transcript or --csprng required");
    std::ifstream in(a.transcript);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + a.transcript);
    const auto parsed = keygen::parse_transcript(in);
    passes = parsed.size();
    std::vector<std::vector<bool>> bits;
    for (const auto& p : parsed) bits.push_back(keygen::pass_to_bits(p));
    key = a.bits == 0 ? keygen::combine_passes(bits)
                      : keygen::generate_key(a.bits, std::span<const keygen::CardPass>(parsed));
  }
  write_file(a.out, key.material.bytes());
  report.add("method", a.csprng ? "csprng" : "card_transcript");
  if (!a.csprng) report.add("passes", passes);
  report.add("bits", key.bits)
      .add("bytes", key.material.size())
      .add("pad_bits", key.pad_bits())
      .add("out", a.out);
  return kExitOk;
}

int keygen_entropy(const KeygenArgs& a, Report& report) {
  unsigned deck = a.deck;
  if (a.n != 0 && deck != 0 && deck != 2 * a.n) {
    throw Error(ErrorCode::UsageError, "--n and --deck disagree");
  }
  if (deck == 0) deck = 2 * a.n;
  const auto r = keygen::entropy_estimate(deck, a.discarded, a.passes);
  report.add("n", r.n)
      .add("deck_size", 2 * r.n)
      .add("discarded", r.discarded)
      .add("passes", r.passes)
      .add("exact_log2", r.exact_log2)
      .add("asymptotic_log2", r.asymptotic_log2)
      .add("refined_log2", r.refined_log2)
      .add("upper_bound_log2", r.upper_bound_log2)
      .add("combined_exact_log2", r.combined_exact_log2)
      .add("combined_asymptotic_log2", r.combined_asymptotic_log2)
      .add("combined_refined_log2", r.combined_refined_log2);
  return kExitOk;
}

int keygen_audit(const Config& cfg, const KeygenArgs& a, Report& report) {
  const double threshold = a.threshold > 0 ? a.threshold : cfg.audit_threshold;
  keygen::KeyGenerator generator;
  std::size_t samples = a.samples;
  SystemRandom system;
  std::optional<SeededRandom> seeded;
  std::string source = a.generator;

  if (!a.keys_file.empty()) {
    std::ifstream in(a.keys_file);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + a.keys_file);
    auto keys = std::make_shared<std::vector<Bytes>>();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      keys->push_back(from_hex(line));
    }
    if (samples == 0 || samples > keys->size()) samples = keys->size();
    auto pos = std::make_shared<std::size_t>(0);
    generator = [keys, pos] { return (*keys)[(*pos)++]; };
    source = "file:" + a.keys_file;
  } else if (a.generator == "toy") {
    generator = keygen::toy_generator(a.space_bits, a.seed, a.key_bytes);
  } else if (a.generator == "csprng") {
    RandomSource* rng = &system;
    if (a.seeded) rng = &seeded.emplace(a.seed);
    generator = keygen::random_generator(*rng, a.key_bytes);
  } else {
    throw Error(ErrorCode::UsageError, "unknown generator: " + a.generator);
  }

  const auto r = keygen::collision_audit(generator, a.claim, samples, threshold);
  report.add("generator", source)
      .add("samples", r.samples)
      .add("key_bytes", r.key_bytes)
      .add("claimed_log2_space", r.claimed_log2_space)
      .add("observed_collisions", r.observed_collisions)
      .add("expected_collisions", r.expected_collisions)
      .add("collision_probability", r.collision_probability)
      .add("tail_probability", r.tail_probability)
      .add("threshold", r.threshold);
  if (r.fitted_log2_space) {
    report.add("fitted_log2_space", *r.fitted_log2_space);
  } else {
    report.add("fitted_log2_space", nullptr);
  }
  report.add("verdict", std::string(keygen::verdict_name(r.verdict)));
  return kExitOk;
}

void print_error(std::ostream& err, bool json, std::string_view name, int code,
                 const std::string& message) {
  if (json) {
    err << ordered_json{{"error", name}, {"exit", code}, {"message", message}}.dump() << '\n';
  } else {
    err << "error code=" << name << " exit=" << code << " message=" << message << '\n';
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"splitvault: split-key document protection, pairwise call keys and key generation audits",
               "splitvault"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (default: $SPLITVAULT_CONFIG)");
  app.add_flag("--json", g.json, "Structured JSON output");

  VaultArgs va;
  auto* vault = app.add_subcommand("vault", "Phone-side document store")->require_subcommand(1);
  auto add_vault_common = [&](CLI::App* c) {
    c->add_option("--vault", g.vault_path, "Vault file");
    c->add_option("--token", g.token_address, "Token address host:port");
    c->add_option("--device", g.device_id, "Device id presented to an enterprise token");
  };
  auto* v_init = vault->add_subcommand("init", "Create an empty vault");
  v_init->add_option("--vault", g.vault_path, "Vault file");
  auto* v_enc = vault->add_subcommand("encrypt", "Encrypt a file into the vault");
  v_enc->add_option("--id", va.id, "Document id")->required();
  v_enc->add_option("--in", va.in, "Plaintext file")->required();
  add_vault_common(v_enc);
  auto* v_read = vault->add_subcommand("read", "Decrypt a document to stdout or --out");
  v_read->add_option("--id", va.id, "Document id")->required();
  v_read->add_option("--out", va.out, "Write plaintext here instead of stdout");
  add_vault_common(v_read);
  auto* v_rm = vault->add_subcommand("rm", "Remove a document from vault and token");
  v_rm->add_option("--id", va.id, "Document id")->required();
  add_vault_common(v_rm);
  auto* v_ls = vault->add_subcommand("list", "List document ids");
  v_ls->add_option("--vault", g.vault_path, "Vault file");

  TokenArgs ta;
  auto* tok = app.add_subcommand("token", "Token service and administration")->require_subcommand(1);
  auto* t_serve = tok->add_subcommand("serve", "Run the token service until SIGINT/SIGTERM");
  t_serve->add_option("--bind", ta.bind, "Listen address host:port (port 0 picks one)");
  t_serve->add_option("--mode", ta.mode, "wristband or enterprise");
  t_serve->add_option("--store", ta.store, "Token store log file");
  auto* t_revoke = tok->add_subcommand("revoke", "Revoke a device (enterprise mode)");
  auto* t_enroll = tok->add_subcommand("enroll", "Enroll a device (enterprise mode)");
  for (auto* c : {t_revoke, t_enroll}) {
    c->add_option("--device", ta.device, "Device id")->required();
    c->add_option("--store", ta.store, "Token store log file");
  }

  KeysetArgs ka;
  auto* ks = app.add_subcommand("keysets", "Pairwise one-time call keys")->require_subcommand(1);
  auto* k_prov = ks->add_subcommand("provision", "Generate keysets for all employee pairs");
  k_prov->add_option("--employees", ka.employees, "Number of employees")->required();
  k_prov->add_option("--sets", ka.sets, "Keysets per pair")->required();
  k_prov->add_option("--dir", ka.dir, "Output directory");
  k_prov->add_flag("--simple", ka.simple, "Plain phone-resident call keys, no token");
  auto* k_status = ks->add_subcommand("status", "Fresh/consumed counts per peer");
  k_status->add_option("--employee", ka.employee, "Employee number")->required();
  k_status->add_option("--dir", ka.dir, "Keyset directory");
  auto* k_sim = ks->add_subcommand("call-sim", "Run one call between two employees");
  k_sim->add_option("--caller", ka.caller, "Calling employee")->required();
  k_sim->add_option("--callee", ka.callee, "Called employee")->required();
  k_sim->add_option("--index", ka.index, "Keyset index (default: next fresh)");
  k_sim->add_option("--message", ka.message, "Payload sent in each direction");
  k_sim->add_flag("--fail", ka.fail, "Simulate an unsuccessful connection");
  k_sim->add_option("--dir", ka.dir, "Keyset directory");

  KeygenArgs ga;
  auto* kg = app.add_subcommand("keygen", "Key generation and entropy auditing")->require_subcommand(1);
  auto* g_cards = kg->add_subcommand("cards", "Build a key from a card transcript");
  g_cards->add_option("--transcript", ga.transcript, "One pass per line, 'r'/'b' per card");
  g_cards->add_flag("--csprng", ga.csprng, "Use the system generator instead of cards");
  g_cards->add_option("--bits", ga.bits, "Key length in bits (default: whole transcript)");
  g_cards->add_option("--out", ga.out, "Raw key output file")->required();
  auto* g_entropy = kg->add_subcommand("entropy", "Entropy of the card method");
  g_entropy->add_option("--n", ga.n, "Half the number of cards per pass");
  g_entropy->add_option("--deck", ga.deck, "Cards per pass (2n)");
  g_entropy->add_option("--discarded", ga.discarded, "Cards thrown out before each pass");
  g_entropy->add_option("--passes", ga.passes, "Number of passes");
  auto* g_audit = kg->add_subcommand("audit", "Birthday-bound collision audit of a generator");
  g_audit->add_option("--generator", ga.generator, "csprng or toy");
  g_audit->add_option("--keys", ga.keys_file, "Audit hex keys from a file instead");
  g_audit->add_option("--space-bits", ga.space_bits, "True keyspace of the toy generator");
  auto* seed_opt = g_audit->add_option("--seed", ga.seed, "Seed for toy or csprng generators");
  g_audit->add_option("--key-bytes", ga.key_bytes, "Key length in bytes");
  g_audit->add_option("--claim", ga.claim, "Claimed keyspace in bits")->required();
  g_audit->add_option("--samples", ga.samples, "Number of keys to draw");
  g_audit->add_option("--threshold", ga.threshold, "Tail probability threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help is also delivered as CallForHelp from nested apps.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    print_error(err, g.json, error_name(ErrorCode::UsageError), kExitUsage, e.what());
    return kExitUsage;
  }
  ga.seeded = seed_opt->count() > 0;

  try {
    Config cfg = load_config(g);
    Report report(g.json);
    int rc = kExitOk;
    if (v_init->parsed()) {
      rc = vault_init(cfg, report);
    } else if (v_enc->parsed()) {
      rc = vault_encrypt(cfg, va, report);
    } else if (v_read->parsed()) {
      return vault_read(cfg, va, g.json, out);
    } else if (v_rm->parsed()) {
      rc = vault_rm(cfg, va, report);
    } else if (v_ls->parsed()) {
      rc = vault_list(cfg, report);
    } else if (t_serve->parsed()) {
      return token_serve(cfg, ta, g.json, out);
    } else if (t_revoke->parsed()) {
      rc = token_device(cfg, ta, true, report);
    } else if (t_enroll->parsed()) {
      rc = token_device(cfg, ta, false, report);
    } else if (k_prov->parsed()) {
      rc = keysets_provision(cfg, ka, report);
    } else if (k_status->parsed()) {
      rc = keysets_status(cfg, ka, report);
    } else if (k_sim->parsed()) {
      rc = keysets_call_sim(cfg, ka, report);
    } else if (g_cards->parsed()) {
      rc = keygen_cards(ga, report);
    } else if (g_entropy->parsed()) {
      rc = keygen_entropy(ga, report);
    } else if (g_audit->parsed()) {
      rc = keygen_audit(cfg, ga, report);
    }
    report.print(out);
    return rc;
  } catch (const Error& e) {
    const int rc = exit_code(e.code());
    print_error(err, g.json, error_name(e.code()), rc, e.what());
    return rc;
  } catch (const std::exception& e) {
    print_error(err, g.json, "Internal", kExitInternal, e.what());
    return kExitInternal;
  }
}

}  // namespace splitvault::cli
