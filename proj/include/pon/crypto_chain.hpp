#pragma once

// Hashing, deterministic signatures and nonce (hash) chains.
//
// A nonce chain is built by hashing a private base value m times. The last
// value, element(0) = hash^m(base), is published as the chain commitment
// together with the start height. At height start_height + d the owner
// reveals element(d) = hash^(m-d)(base); anyone holding the commitment checks
// the reveal with exactly d hash applications.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pon {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::size_t kDigestSize = 32;

struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  auto operator<=>(const Digest&) const = default;

  bool is_zero() const;
  ByteView view() const { return {bytes.data(), bytes.size()}; }
  std::string hex() const;

  static Digest zero() { return {}; }
  // Lowercase hex only, exactly 64 characters. Throws ParseError.
  static Digest from_hex(std::string_view hex);
};

std::string to_hex(ByteView data);
// Strict lowercase hex decoder. Throws ParseError on odd length or any
// character outside [0-9a-f].
Bytes from_hex(std::string_view hex);

ByteView as_bytes(std::string_view s);
void append(Bytes& out, ByteView data);
void append_u32_be(Bytes& out, std::uint32_t v);
void append_u64_be(Bytes& out, std::uint64_t v);

// SHA-256.
Digest hash_bytes(ByteView data);
Digest hash_bytes(std::initializer_list<ByteView> parts);
// n-fold composition of hash_bytes; n = 0 is the identity.
Digest hash_iter(const Digest& seed, std::uint64_t n);

struct Signature {
  Bytes bytes;
  bool operator==(const Signature&) const = default;
  std::string hex() const { return to_hex(bytes); }
};

struct Keypair {
  Bytes private_key;
  Bytes public_key;
  Digest node_id;  // hash_bytes(public_key)
};

// Signing backend. Implementations must be deterministic: the same key and
// message always produce the same signature, and a key has exactly one valid
// signature per message. A randomized scheme would let a node grind its
// eligibility score.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual std::string_view name() const = 0;
  virtual Keypair keypair_from_seed(const Digest& seed) const = 0;
  virtual Signature sign(const Keypair& key, ByteView message) const = 0;
  virtual bool verify(ByteView public_key, ByteView message,
                      const Signature& signature) const = 0;
};

// Ed25519 (RFC 8032) via libsodium.
const SignatureScheme& ed25519_scheme();

Keypair keypair_from_seed(const Digest& seed);
Signature sign(const Keypair& key, ByteView message);
bool verify(ByteView public_key, ByteView message, const Signature& signature);

struct ChainReveal {
  Digest element;
  std::uint32_t d = 0;
};

class NonceChain {
 public:
  // Throws Error(kInvalidArgument) when m == 0.
  static NonceChain generate(const Digest& master_key, std::uint32_t m,
                             std::uint64_t start_height);

  const Digest& commitment() const { return elements_.front(); }
  std::uint32_t length() const { return m_; }
  std::uint64_t start_height() const { return start_height_; }
  std::uint64_t first_usable_height() const { return start_height_ + 1; }
  std::uint64_t last_usable_height() const { return start_height_ + m_; }
  bool covers(std::uint64_t height) const {
    return height >= first_usable_height() && height <= last_usable_height();
  }

  // d = height - start_height, element = hash^(m-d)(base).
  // Throws Error(kHeightOutOfRange) outside [start+1, start+m]; the owner has
  // to register a fresh chain at that point.
  ChainReveal reveal(std::uint64_t height) const;

 private:
  NonceChain() = default;

  std::uint32_t m_ = 0;
  std::uint64_t start_height_ = 0;
  // elements_[d] = hash^(m-d)(base); elements_[0] is the commitment.
  std::vector<Digest> elements_;
};

Digest chain_base(const Digest& master_key);
Digest chain_commitment(const NonceChain& chain);

// True iff hash_iter(element, d) == commitment. d = 0 is never valid since
// element(0) is public.
bool reveal_verify(const Digest& element, std::uint32_t d,
                   const Digest& commitment);

// Public commitment announcement; the record every elite node publishes.
struct Announcement {
  Digest node_id;
  Digest commitment;
  std::uint64_t start_height = 0;
  std::uint32_t m = 0;
  Bytes public_key;

  std::uint64_t last_usable_height() const { return start_height + m; }
  bool covers(std::uint64_t height) const {
    return height > start_height && height <= last_usable_height();
  }
  bool operator==(const Announcement&) const = default;
};

Announcement announce(const Keypair& key, const NonceChain& chain);

nlohmann::json to_json(const Announcement& a);
Announcement announcement_from_json(const nlohmann::json& j);

class CommitmentRegistry {
 public:
  // Throws Error(kStaleRegistration) when the new window starts before the
  // active entry's last usable height, Error(kInvalidArgument) when node_id
  // is not the hash of the public key or m == 0.
  void register_node(const Announcement& a);

  // Active (most recent) entry. Throws Error(kNotRegistered).
  const Announcement& lookup(const Digest& node_id) const;
  // Entry whose usable window contains height, if any. Older entries stay
  // resolvable so historical blocks keep validating after a rollover.
  const Announcement* find_for_height(const Digest& node_id,
                                      std::uint64_t height) const;
  bool contains(const Digest& node_id) const;
  std::size_t size() const { return entries_.size(); }

  // Every announcement in registration order per node, nodes by id.
  std::vector<Announcement> announcements() const;

 private:
  std::map<Digest, std::vector<Announcement>> entries_;
};

nlohmann::json to_json(const CommitmentRegistry& registry);
CommitmentRegistry registry_from_json(const nlohmann::json& j);

}  // namespace pon
