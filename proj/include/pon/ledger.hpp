#pragma once

// Blocks of traffic transactions and the append-only chain.
//
// The header hash is taken over a fixed big-endian byte layout (156 bytes):
//   version(4) | prev_hash(32) | timestamp_ms(8) | reveal_element(32) | d(4) |
//   height(8) | tx_root(32) | proposer_id(32) | secrecy_capacity_milli(4)
// so JSON field order or formatting never affects it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pon/crypto_chain.hpp"
#include "pon/eligibility.hpp"

namespace pon {

inline constexpr std::uint32_t kBlockVersion = 1;
inline constexpr std::size_t kHeaderBytes = 156;
inline constexpr std::uint32_t kMaxLotteryRetries = 10;

struct TrafficRecord {
  Digest vehicle_id;
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
  double speed = 0.0;      // m/s
  double heading = 0.0;    // degrees, [0, 360)
  std::uint64_t timestamp_ms = 0;
  std::optional<std::string> link_id;

  bool operator==(const TrafficRecord&) const = default;
  bool valid() const;
};

enum class TxKind : std::uint8_t { kBsm = 0, kLinkUpdate = 1 };

struct Transaction {
  TxKind kind = TxKind::kBsm;
  TrafficRecord record;
  Digest tx_id;

  bool operator==(const Transaction&) const = default;
};

// Canonical record bytes: kind(1) | vehicle_id(32) | latitude, longitude,
// speed, heading as IEEE-754 binary64 big-endian (8 each) | timestamp_ms(8) |
// link flag(1) [| link length(4) | link utf-8].
Bytes canonical_record_bytes(TxKind kind, const TrafficRecord& record);
Transaction make_transaction(TxKind kind, const TrafficRecord& record);
Digest compute_tx_id(const Transaction& tx);

struct BlockHeader {
  std::uint32_t version = kBlockVersion;
  Digest prev_hash;
  std::uint64_t timestamp_ms = 0;
  Digest reveal_element;
  std::uint32_t d = 0;
  std::uint64_t height = 0;
  Digest tx_root;
  Digest proposer_id;
  std::uint32_t secrecy_capacity_milli = 0;

  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;
  // Proposer's candidacy signature; outside the hashed header.
  std::optional<Signature> signature;

  bool operator==(const Block&) const = default;
  bool is_genesis() const { return header.height == 0; }
};

// Binary Merkle root over tx_ids. An odd node is paired with itself at every
// level (a single leaf t gives hash(t || t)); the empty list gives zero.
Digest tx_root(const std::vector<Transaction>& transactions);
Digest merkle_root(const std::vector<Digest>& leaves);

struct MerkleStep {
  Digest sibling;
  bool sibling_left = false;
};
std::vector<MerkleStep> merkle_proof(const std::vector<Digest>& leaves,
                                     std::size_t index);
bool merkle_verify(const Digest& leaf, const std::vector<MerkleStep>& path,
                   const Digest& root);

std::array<std::uint8_t, kHeaderBytes> header_bytes(const BlockHeader& header);
Digest header_hash(const BlockHeader& header);
inline Digest block_hash(const Block& b) { return header_hash(b.header); }

std::uint32_t capacity_to_milli(double capacity_bits);

Block genesis_block(std::uint64_t timestamp_ms = 0);

// Throws Error(kHeightMismatch) unless height == prev.height + 1 and
// proof.height == height.
Block block_build(const BlockHeader& prev_header, std::uint64_t height,
                  std::vector<Transaction> transactions,
                  const CandidateProof& proof, double secrecy_capacity,
                  std::uint64_t timestamp_ms);

enum class RejectReason {
  kNone,
  kLink,
  kHeight,
  kTxRoot,
  kRecord,
  kCandidacy,
  kSecrecyGate,
  kTimestamp,
  kGenesis,
  kVersion,
  kCorrupt,
};

std::string_view to_string(RejectReason reason);

struct Verdict {
  RejectReason reason = RejectReason::kNone;
  std::uint64_t height = 0;
  std::string detail;

  bool ok() const { return reason == RejectReason::kNone; }
  explicit operator bool() const { return ok(); }

  static Verdict accept(std::uint64_t height) { return {RejectReason::kNone, height, {}}; }
  static Verdict reject(RejectReason r, std::uint64_t height, std::string detail) {
    return {r, height, std::move(detail)};
  }
};

struct ValidationOptions {
  ScoreMode mode = ScoreMode::kReveal;
  // The header does not record which lottery retry produced the block, so a
  // verifier accepts any retry in [0, max_retries] unless `retry` pins it.
  std::uint32_t max_retries = kMaxLotteryRetries;
  std::optional<std::uint32_t> retry;
};

// Proof embedded in a block, with the score recomputed for `retry`.
CandidateProof embedded_proof(const Block& block, const Digest& prev_hash,
                              std::uint32_t retry, ScoreMode mode);

// Checks the proof data embedded in the header (reveal, d, score, optional
// signature) against prev_hash, trying the retries allowed by `opts`.
Verdict candidacy_validate(const Block& block, const Digest& prev_hash,
                           const CommitmentRegistry& registry,
                           const Threshold& threshold,
                           const ValidationOptions& opts = {});

// Accepts a genesis block (prev header ignored) or a successor of `prev`.
Verdict block_validate(const Block& block, const BlockHeader& prev,
                       const CommitmentRegistry& registry,
                       const Threshold& threshold, double c_ref,
                       const ValidationOptions& opts = {});
Verdict genesis_validate(const Block& block);

class Chain {
 public:
  Chain() = default;
  static Chain with_genesis(std::uint64_t timestamp_ms = 0);

  const std::vector<Block>& blocks() const { return blocks_; }
  bool empty() const { return blocks_.empty(); }
  std::size_t size() const { return blocks_.size(); }
  const Block& head_block() const { return blocks_.back(); }
  // Zero digest for an empty chain.
  Digest head() const;
  std::uint64_t height() const { return empty() ? 0 : head_block().header.height; }

  // Validates against the current head (or as genesis when empty) and
  // appends on success. Existing blocks are never touched.
  Verdict append(Block block, const CommitmentRegistry& registry,
                 const Threshold& threshold, double c_ref,
                 const ValidationOptions& opts = {});

  // For loaders: no validation.
  void push_unchecked(Block block) { blocks_.push_back(std::move(block)); }

  bool is_prefix_of(const Chain& other) const;

 private:
  std::vector<Block> blocks_;
};

Verdict chain_validate(const Chain& chain, const CommitmentRegistry& registry,
                       const Threshold& threshold, double c_ref,
                       const ValidationOptions& opts = {});

nlohmann::json to_json(const TrafficRecord& r);
TrafficRecord traffic_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BlockHeader& h);
BlockHeader header_from_json(const nlohmann::json& j);
// {"hash", "header", "signature", "transactions"}; "hash" is the header hash
// and is checked on load.
nlohmann::json to_json(const Block& b);
Block block_from_json(const nlohmann::json& j);

std::string block_to_line(const Block& block);
// Throws ParseError(line) on malformed JSON, schema violations or a stored
// hash that does not match the header, and on any line that is not the
// canonical encoding of the block it parses to.
Block block_from_line(std::string_view line, std::size_t line_no);

// JSON Lines, one block per line. Throws Error(kIoError).
void chain_save(const Chain& chain, const std::filesystem::path& path);
// Empty file -> empty chain. Throws Error(kIoError) or ParseError(line).
Chain chain_load(const std::filesystem::path& path);

}  // namespace pon
