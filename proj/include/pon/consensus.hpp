#pragma once

// One Proof-of-Nonce round per height:
//
//   1. every elite node draws the lottery; an eligible node builds a
//      temporary block and runs the secrecy controller against the
//      strongest eavesdropper. If the capacity cannot reach c_ref the block
//      is discarded, otherwise it is broadcast as a candidate;
//   2. reporters check each candidate's qualification (t_q) and the block
//      itself including an independent secrecy recomputation (t_v), then
//      vote for the candidate with the smallest distance;
//   3. the master (proposer of the previous block, the anchor at height 1)
//      tallies and locks the candidate backed by a quorum (t_s);
//   4. the anchor appends the locked block and broadcasts it. A height is
//      locked at most once, so no competing block can be finalized.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pon/crypto_chain.hpp"
#include "pon/eligibility.hpp"
#include "pon/ledger.hpp"
#include "pon/secrecy.hpp"

namespace pon {

enum class Role : unsigned {
  kElite = 1U << 0,
  kProposer = 1U << 1,
  kReporter = 1U << 2,
  kAnchor = 1U << 3,
};

std::string_view to_string(Role role);

struct NodeState {
  Keypair keypair;
  Digest master_key;
  NonceChain nonce_chain;
  Chain chain;
  RadioParams radio;
  ControlBounds bounds;
  // height -> Role bitmask; Proposer/Reporter are per height.
  std::map<std::uint64_t, unsigned> roles;

  const Digest& node_id() const { return keypair.node_id; }
  bool has_role(std::uint64_t height, Role role) const;
  void add_role(std::uint64_t height, Role role);
};

// Nonce chain master key for `generation` (0 for the first chain); later
// generations are used after rollover.
Digest chain_master_key(const Digest& master_key, std::uint32_t generation);

struct LinkGeometry {
  double main_distance_m = 1.0;                 // to the anchor
  double eve_distance_m = kNoEavesdropper;      // strongest eavesdropper
  EavesdropperRadio eve;
};

// Ground truth about the radio world. Times are header timestamps.
class ChannelOracle {
 public:
  virtual ~ChannelOracle() = default;
  virtual const ChannelEnv& env() const = 0;
  virtual LinkGeometry geometry(const Digest& node, std::uint64_t timestamp_ms) const = 0;
  virtual RadioParams radio(const Digest& node, std::uint64_t timestamp_ms) const = 0;

  SecrecyReport secrecy(const Digest& node, std::uint64_t timestamp_ms) const;
};

// Slack between a claimed header capacity and the oracle's recomputation.
inline constexpr double kCapacityTolerance = 1e-3;

struct ProposalConfig {
  Threshold threshold;
  double c_ref = 1.0;
  ScoreMode mode = ScoreMode::kReveal;
  bool sign = true;
};

enum class ProposeStatus { kIneligible, kGateRejected, kProposed };

struct Proposal {
  ProposeStatus status = ProposeStatus::kIneligible;
  CandidateProof proof;
  ControlOutcome control;
  std::optional<Block> block;
  std::uint64_t control_ms = 0;
};

// The block generator / secrecy calculator / discriminator / controller
// pipeline for one node. Updates node.radio with the controller's result
// and records the Proposer role when eligible. Throws
// Error(kHeightOutOfRange) when the node's nonce chain is exhausted.
Proposal round_propose(NodeState& node, const BlockHeader& prev_header,
                       std::vector<Transaction> pending_txs,
                       const ProposalConfig& config, const ChannelOracle& oracle,
                       std::uint64_t now_ms, std::uint32_t retry = 0);

bool verify_qualification(const Block& candidate, const BlockHeader& prev_header,
                          const CommitmentRegistry& registry,
                          const Threshold& threshold,
                          const ValidationOptions& opts = {});

// block_validate plus the oracle check: the claimed capacity may not exceed
// the recomputed one by more than kCapacityTolerance.
bool verify_candidate(const Block& candidate, const BlockHeader& prev_header,
                      const CommitmentRegistry& registry,
                      const Threshold& threshold, double c_ref,
                      const ChannelOracle& oracle,
                      const ValidationOptions& opts = {});

enum class DistanceRule { kMin, kMax };

std::string_view to_string(DistanceRule rule);
DistanceRule distance_rule_from_string(std::string_view s);

struct VerifiedCandidate {
  Block block;
  Digest hash;
  EligibilityScore score;
  std::uint32_t retry = 0;
};

struct Vote {
  Digest reporter_id;
  std::uint64_t height = 0;
  std::uint32_t retry = 0;
  Uint256 distance;
  Digest candidate_hash;

  bool operator==(const Vote&) const = default;
};

// Vote for the best-distance candidate; ties go to the lexicographically
// smaller header hash. nullopt when there is nothing to vote for.
std::optional<Vote> vote(const Digest& reporter_id,
                         std::span<const VerifiedCandidate> verified,
                         DistanceRule rule = DistanceRule::kMin);

struct LockCertificate {
  std::uint64_t height = 0;
  std::uint32_t retry = 0;
  Digest candidate_hash;
  Uint256 distance;
  std::vector<Digest> supporters;  // sorted
  double quorum_ratio = 2.0 / 3.0;
  Digest master_id;

  bool operator==(const LockCertificate&) const = default;
};

// ceil(ratio * reporters), robust to the rounding of ratios like 2/3.
std::size_t quorum_size(std::size_t reporters_count, double quorum_ratio);

// nullopt means NoQuorum. Throws Error(kMixedHeights) when votes disagree on
// (height, retry), Error(kInvalidArgument) for a ratio outside (0.5, 1].
// A reporter's repeated votes count once.
std::optional<LockCertificate> tally_and_lock(const Digest& master_id,
                                              std::span<const Vote> votes,
                                              std::size_t reporters_count,
                                              double quorum_ratio,
                                              DistanceRule rule = DistanceRule::kMin);

struct AnchorPolicy {
  Threshold threshold;
  double c_ref = 1.0;
  ValidationOptions validation;
};

// The roadside unit. Owns the canonical chain and the per-height locks.
class Anchor {
 public:
  Anchor(Chain chain, AnchorPolicy policy)
      : chain_(std::move(chain)), policy_(std::move(policy)) {}

  const Chain& chain() const { return chain_; }
  const std::map<std::uint64_t, LockCertificate>& locks() const { return locks_; }
  bool locked(std::uint64_t height) const { return locks_.contains(height); }

  // Throws Error(kLockHeld) if the height is already locked,
  // Error(kCertificateMismatch) if the certificate does not name this block,
  // Error(kHeightMismatch) unless the block extends the head, and
  // Error(kBlockRejected) if it fails validation.
  void finalize(const LockCertificate& certificate, const Block& candidate,
                const CommitmentRegistry& registry);

 private:
  Chain chain_;
  AnchorPolicy policy_;
  std::map<std::uint64_t, LockCertificate> locks_;
};

inline void anchor_finalize(Anchor& anchor, const LockCertificate& certificate,
                            const Block& candidate, const CommitmentRegistry& registry) {
  anchor.finalize(certificate, candidate, registry);
}

struct TimingModel {
  std::uint64_t t_b_ms = 0;  // block generation incl. secrecy control
  std::uint64_t t_q_ms = 0;  // qualification check
  std::uint64_t t_v_ms = 0;  // block check
  std::uint64_t t_s_ms = 0;  // final selection
};

struct PowModel {
  std::uint64_t z = 1;     // blocks to wait
  std::uint64_t t_ms = 0;  // per-block generation time
};

std::uint64_t confirmation_time(const TimingModel& model);
std::uint64_t pow_confirmation_time(const PowModel& model);

// Wire messages.
struct CandidateMsg {
  Block block;
  std::uint32_t retry = 0;
  bool operator==(const CandidateMsg&) const = default;
};
struct VoteMsg {
  Vote vote;
  bool operator==(const VoteMsg&) const = default;
};
struct LockMsg {
  LockCertificate certificate;
  bool operator==(const LockMsg&) const = default;
};
struct FinalMsg {
  Block block;
  LockCertificate certificate;
  bool operator==(const FinalMsg&) const = default;
};
struct AnnounceMsg {
  Announcement record;
  bool operator==(const AnnounceMsg&) const = default;
};

using Message = std::variant<CandidateMsg, VoteMsg, LockMsg, FinalMsg, AnnounceMsg>;

nlohmann::json to_json(const Vote& v);
Vote vote_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LockCertificate& c);
LockCertificate certificate_from_json(const nlohmann::json& j);
// {"type": "Candidate" | "Vote" | "Lock" | "Final" | "Announce", ...}
nlohmann::json to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);

}  // namespace pon
