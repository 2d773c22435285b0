#include "pon/crypto_chain.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <unordered_map>
#include <stdexcept>

#include "pon/error.hpp"

namespace pon {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) {
      throw std::runtime_error("libsodium initialisation failed");
    }
    return true;
  }();
  (void)ready;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

class Ed25519Scheme final : public SignatureScheme {
 public:
  std::string_view name() const override { return "ed25519"; }

  Keypair keypair_from_seed(const Digest& seed) const override {
    ensure_sodium();
    Keypair key;
    key.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    key.private_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(key.public_key.data(), key.private_key.data(),
                             seed.bytes.data());
    key.node_id = hash_bytes(key.public_key);
    return key;
  }

  Signature sign(const Keypair& key, ByteView message) const override {
    ensure_sodium();
    if (key.private_key.size() != crypto_sign_SECRETKEYBYTES) {
      throw Error(ErrorCode::kInvalidArgument, "ed25519: bad private key size");
    }
    Signature sig;
    sig.bytes.resize(crypto_sign_BYTES);
    crypto_sign_detached(sig.bytes.data(), nullptr, message.data(),
                         message.size(), key.private_key.data());
    return sig;
  }

  bool verify(ByteView public_key, ByteView message,
              const Signature& signature) const override {
    ensure_sodium();
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES ||
        signature.bytes.size() != crypto_sign_BYTES) {
      return false;
    }
    // Every vehicle re-checks the same few signatures each round; remember
    // recent verdicts keyed by a digest of (key, message, signature).
    thread_local std::unordered_map<Digest, bool, DigestHash> memo;
    const Digest key = hash_bytes({public_key, message, ByteView(signature.bytes)});
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const bool ok = crypto_sign_verify_detached(signature.bytes.data(), message.data(),
                                                message.size(), public_key.data()) == 0;
    if (memo.size() >= kMemoLimit) memo.clear();
    memo.emplace(key, ok);
    return ok;
  }

 private:
  struct DigestHash {
    std::size_t operator()(const Digest& d) const {
      std::size_t h;
      std::memcpy(&h, d.bytes.data(), sizeof h);
      return h;
    }
  };
  static constexpr std::size_t kMemoLimit = 1 << 16;
};

}  // namespace

bool Digest::is_zero() const {
  return std::all_of(bytes.begin(), bytes.end(),
                     [](std::uint8_t b) { return b == 0; });
}

std::string Digest::hex() const { return to_hex(view()); }

Digest Digest::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kDigestSize) {
    throw ParseError("digest must be 64 hex characters, got " +
                     std::to_string(hex.size()));
  }
  const Bytes raw = pon::from_hex(hex);
  Digest d;
  std::copy(raw.begin(), raw.end(), d.bytes.begin());
  return d;
}

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    throw ParseError("hex string has odd length");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw ParseError("invalid hex character");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

void append(Bytes& out, ByteView data) {
  out.insert(out.end(), data.begin(), data.end());
}

void append_u32_be(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void append_u64_be(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

Digest hash_bytes(ByteView data) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

Digest hash_bytes(std::initializer_list<ByteView> parts) {
  ensure_sodium();
  crypto_hash_sha256_state state;
  crypto_hash_sha256_init(&state);
  for (ByteView p : parts) {
    crypto_hash_sha256_update(&state, p.data(), p.size());
  }
  Digest d;
  crypto_hash_sha256_final(&state, d.bytes.data());
  return d;
}

Digest hash_iter(const Digest& seed, std::uint64_t n) {
  Digest cur = seed;
  for (std::uint64_t i = 0; i < n; ++i) {
    cur = hash_bytes(cur.view());
  }
  return cur;
}

const SignatureScheme& ed25519_scheme() {
  static const Ed25519Scheme scheme;
  return scheme;
}

Keypair keypair_from_seed(const Digest& seed) {
  return ed25519_scheme().keypair_from_seed(seed);
}

Signature sign(const Keypair& key, ByteView message) {
  return ed25519_scheme().sign(key, message);
}

bool verify(ByteView public_key, ByteView message, const Signature& signature) {
  return ed25519_scheme().verify(public_key, message, signature);
}

Digest chain_base(const Digest& master_key) {
  return hash_bytes({master_key.view(), as_bytes("base")});
}

NonceChain NonceChain::generate(const Digest& master_key, std::uint32_t m,
                                std::uint64_t start_height) {
  if (m == 0) {
    throw Error(ErrorCode::kInvalidArgument, "nonce chain length must be >= 1");
  }
  NonceChain chain;
  chain.m_ = m;
  chain.start_height_ = start_height;
  chain.elements_.resize(static_cast<std::size_t>(m) + 1);
  // Fill from the base outward: elements_[m] = base, elements_[d-1] = H(elements_[d]).
  chain.elements_[m] = chain_base(master_key);
  for (std::uint32_t d = m; d > 0; --d) {
    chain.elements_[d - 1] = hash_bytes(chain.elements_[d].view());
  }
  return chain;
}

ChainReveal NonceChain::reveal(std::uint64_t height) const {
  if (!covers(height)) {
    throw Error(ErrorCode::kHeightOutOfRange,
                "height " + std::to_string(height) + " outside nonce chain window [" +
                    std::to_string(first_usable_height()) + ", " +
                    std::to_string(last_usable_height()) + "]");
  }
  const auto d = static_cast<std::uint32_t>(height - start_height_);
  return {elements_[d], d};
}

Digest chain_commitment(const NonceChain& chain) { return chain.commitment(); }

bool reveal_verify(const Digest& element, std::uint32_t d,
                   const Digest& commitment) {
  if (d == 0) return false;
  return hash_iter(element, d) == commitment;
}

Announcement announce(const Keypair& key, const NonceChain& chain) {
  return {key.node_id, chain.commitment(), chain.start_height(), chain.length(),
          key.public_key};
}

nlohmann::json to_json(const Announcement& a) {
  return {{"node_id", a.node_id.hex()},
          {"commitment", a.commitment.hex()},
          {"start_height", a.start_height},
          {"m", a.m},
          {"public_key", to_hex(a.public_key)}};
}

Announcement announcement_from_json(const nlohmann::json& j) {
  try {
    Announcement a;
    a.node_id = Digest::from_hex(j.at("node_id").get<std::string>());
    a.commitment = Digest::from_hex(j.at("commitment").get<std::string>());
    a.start_height = j.at("start_height").get<std::uint64_t>();
    a.m = j.at("m").get<std::uint32_t>();
    a.public_key = from_hex(j.at("public_key").get<std::string>());
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("announcement: ") + e.what());
  }
}

void CommitmentRegistry::register_node(const Announcement& a) {
  if (a.m == 0) {
    throw Error(ErrorCode::kInvalidArgument, "announcement with m = 0");
  }
  if (hash_bytes(a.public_key) != a.node_id) {
    throw Error(ErrorCode::kInvalidArgument,
                "node_id is not the hash of the public key");
  }
  auto& history = entries_[a.node_id];
  if (!history.empty()) {
    const Announcement& active = history.back();
    if (a.start_height < active.last_usable_height()) {
      throw Error(ErrorCode::kStaleRegistration,
                  "registration window starting at " +
                      std::to_string(a.start_height) +
                      " overlaps active window ending at " +
                      std::to_string(active.last_usable_height()));
    }
  }
  history.push_back(a);
}

const Announcement& CommitmentRegistry::lookup(const Digest& node_id) const {
  auto it = entries_.find(node_id);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kNotRegistered, "node " + node_id.hex() + " not registered");
  }
  return it->second.back();
}

const Announcement* CommitmentRegistry::find_for_height(
    const Digest& node_id, std::uint64_t height) const {
  auto it = entries_.find(node_id);
  if (it == entries_.end()) return nullptr;
  for (auto e = it->second.rbegin(); e != it->second.rend(); ++e) {
    if (e->covers(height)) return &*e;
  }
  return nullptr;
}

bool CommitmentRegistry::contains(const Digest& node_id) const {
  return entries_.contains(node_id);
}

std::vector<Announcement> CommitmentRegistry::announcements() const {
  std::vector<Announcement> out;
  for (const auto& [id, history] : entries_) {
    out.insert(out.end(), history.begin(), history.end());
  }
  return out;
}

nlohmann::json to_json(const CommitmentRegistry& registry) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : registry.announcements()) {
    arr.push_back(to_json(a));
  }
  return arr;
}

CommitmentRegistry registry_from_json(const nlohmann::json& j) {
  if (!j.is_array()) {
    throw ParseError("registry must be a JSON array of announcements");
  }
  CommitmentRegistry registry;
  for (const auto& item : j) {
    registry.register_node(announcement_from_json(item));
  }
  return registry;
}

}  // namespace pon
