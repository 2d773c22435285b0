#pragma once

// The Proof-of-Nonce lottery.
//
// A node's score for a height is a digest read as a big-endian 256-bit
// integer. It is eligible to propose when score < threshold, so a threshold
// of 2^k selects each node with probability 2^(k-256).

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "pon/crypto_chain.hpp"

namespace pon {

// Unsigned 256-bit integer stored big-endian, so byte-wise lexicographic
// order is numeric order.
struct Uint256 {
  std::array<std::uint8_t, 32> be{};

  auto operator<=>(const Uint256&) const = default;

  static Uint256 from_digest(const Digest& d) { return {d.bytes}; }
  // 2^k for k in [0, 255]. Throws Error(kInvalidArgument) otherwise.
  static Uint256 pow2(unsigned k);
  static Uint256 max();
  static Uint256 from_hex(std::string_view hex);

  std::string hex() const;
  // value / 2^256 in [0, 1).
  long double fraction() const;
  // Most significant `bits` bits (1..8) as an integer.
  unsigned top_bits(unsigned bits) const;
};

struct EligibilityScore {
  Uint256 value;
  auto operator<=>(const EligibilityScore&) const = default;
};

struct Threshold {
  Uint256 value;

  // k in [0, 256]; 256 maps to 2^256 - 1 (every score but the maximum wins).
  static Threshold from_exponent(unsigned k);
  long double probability() const { return value.fraction(); }
};

// Which public value feeds the score.
//  kReveal:    hash(prev_hash || nonce-chain element)
//  kSignature: hash(sign(private_key, prev_hash))
enum class ScoreMode { kReveal, kSignature };

std::string_view to_string(ScoreMode mode);
ScoreMode score_mode_from_string(std::string_view s);

// Retry r > 0 re-draws the lottery over hash(prev_hash || "retry" || r).
Digest salted_prev_hash(const Digest& prev_hash, std::uint32_t retry);

EligibilityScore score_from_reveal(const Digest& prev_hash, const Digest& element);
EligibilityScore score_from_signature(const Keypair& key, const Digest& prev_hash);
EligibilityScore score_from_signature_bytes(const Signature& signature);

// Strict: a score equal to the threshold is not eligible.
bool is_eligible(const EligibilityScore& score, const Threshold& threshold);

double expected_proposers(std::uint64_t n_nodes, const Threshold& threshold);

struct CandidateProof {
  Digest node_id;
  std::uint64_t height = 0;
  Digest reveal_element;
  std::uint32_t d = 0;
  EligibilityScore score;
  std::optional<Signature> signature;
  std::uint32_t retry = 0;

  bool operator==(const CandidateProof&) const = default;
};

// Message the optional proof signature covers in reveal mode:
// prev_hash || height (8 bytes big-endian).
Bytes candidacy_message(const Digest& prev_hash, std::uint64_t height);

// Builds the proof a node publishes for `height`. In kSignature mode the
// signature over the salted prev hash is mandatory and `sign` is ignored.
// Throws Error(kHeightOutOfRange) if the chain does not cover `height`.
CandidateProof make_proof(const Keypair& key, const NonceChain& chain,
                          const Digest& prev_hash, std::uint64_t height,
                          std::uint32_t retry, ScoreMode mode, bool sign);

// Checks, against the node's registered commitment:
//  (a) the reveal hashes to the commitment in d steps,
//  (b) d == height - start_height,
//  (c) the recomputed score equals proof.score and is eligible,
//  (d) the signature, if present (mandatory in kSignature mode), verifies.
// Throws Error(kNotRegistered) for an unknown node.
bool verify_candidacy(const CandidateProof& proof, const Digest& prev_hash,
                      const CommitmentRegistry& registry,
                      const Threshold& threshold,
                      ScoreMode mode = ScoreMode::kReveal);

nlohmann::json to_json(const CandidateProof& proof);
CandidateProof proof_from_json(const nlohmann::json& j);

}  // namespace pon
