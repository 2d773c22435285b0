#include "pon/consensus.hpp"

#include <algorithm>
#include <cmath>

#include "pon/error.hpp"

namespace pon {

namespace {

using nlohmann::json;

bool better(const Uint256& a, const Uint256& b, DistanceRule rule) {
  return rule == DistanceRule::kMin ? a < b : a > b;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kElite: return "Elite";
    case Role::kProposer: return "Proposer";
    case Role::kReporter: return "Reporter";
    case Role::kAnchor: return "Anchor";
  }
  return "Unknown";
}

bool NodeState::has_role(std::uint64_t height, Role role) const {
  if (role == Role::kElite) return true;
  auto it = roles.find(height);
  return it != roles.end() && (it->second & static_cast<unsigned>(role)) != 0;
}

void NodeState::add_role(std::uint64_t height, Role role) {
  roles[height] |= static_cast<unsigned>(role);
}

Digest chain_master_key(const Digest& master_key, std::uint32_t generation) {
  if (generation == 0) return master_key;
  Bytes salt;
  append(salt, as_bytes("generation"));
  append_u32_be(salt, generation);
  return hash_bytes({master_key.view(), salt});
}

SecrecyReport ChannelOracle::secrecy(const Digest& node, std::uint64_t timestamp_ms) const {
  const LinkGeometry g = geometry(node, timestamp_ms);
  return evaluate_secrecy(radio(node, timestamp_ms), env(), g.main_distance_m,
                          g.eve_distance_m, g.eve);
}

Proposal round_propose(NodeState& node, const BlockHeader& prev_header,
                       std::vector<Transaction> pending_txs,
                       const ProposalConfig& config, const ChannelOracle& oracle,
                       std::uint64_t now_ms, std::uint32_t retry) {
  const std::uint64_t height = prev_header.height + 1;
  Proposal out;
  out.proof = make_proof(node.keypair, node.nonce_chain, header_hash(prev_header),
                         height, retry, config.mode, config.sign);
  if (!is_eligible(out.proof.score, config.threshold)) {
    out.status = ProposeStatus::kIneligible;
    return out;
  }
  node.add_role(height, Role::kProposer);

  const LinkGeometry g = oracle.geometry(node.node_id(), now_ms);
  out.control = control_until(node.radio, node.bounds, oracle.env(), g.main_distance_m,
                              g.eve_distance_m, config.c_ref, g.eve);
  out.control_ms = out.control.control_ms(node.bounds);
  node.radio = out.control.radio;
  if (!out.control.feasible) {
    // Temporary block is discarded.
    out.status = ProposeStatus::kGateRejected;
    return out;
  }
  out.block = block_build(prev_header, height, std::move(pending_txs), out.proof,
                          out.control.capacity_bits, now_ms);
  out.status = ProposeStatus::kProposed;
  return out;
}

bool verify_qualification(const Block& candidate, const BlockHeader& prev_header,
                          const CommitmentRegistry& registry,
                          const Threshold& threshold, const ValidationOptions& opts) {
  if (candidate.header.height != prev_header.height + 1) return false;
  return candidacy_validate(candidate, header_hash(prev_header), registry, threshold, opts)
      .ok();
}

bool verify_candidate(const Block& candidate, const BlockHeader& prev_header,
                      const CommitmentRegistry& registry, const Threshold& threshold,
                      double c_ref, const ChannelOracle& oracle,
                      const ValidationOptions& opts) {
  if (!block_validate(candidate, prev_header, registry, threshold, c_ref, opts)) {
    return false;
  }
  const double claimed = candidate.header.secrecy_capacity_milli / 1000.0;
  const double actual =
      oracle.secrecy(candidate.header.proposer_id, candidate.header.timestamp_ms)
          .capacity_bits;
  return claimed <= actual + kCapacityTolerance;
}

std::string_view to_string(DistanceRule rule) {
  return rule == DistanceRule::kMin ? "min" : "max";
}

DistanceRule distance_rule_from_string(std::string_view s) {
  if (s == "min") return DistanceRule::kMin;
  if (s == "max") return DistanceRule::kMax;
  throw Error(ErrorCode::kInvalidArgument, "unknown distance rule '" + std::string(s) + "'");
}

std::optional<Vote> vote(const Digest& reporter_id,
                         std::span<const VerifiedCandidate> verified, DistanceRule rule) {
  const VerifiedCandidate* best = nullptr;
  for (const auto& c : verified) {
    if (best == nullptr || better(c.score.value, best->score.value, rule) ||
        (c.score.value == best->score.value && c.hash < best->hash)) {
      best = &c;
    }
  }
  if (best == nullptr) return std::nullopt;
  return Vote{reporter_id, best->block.header.height, best->retry, best->score.value,
              best->hash};
}

std::size_t quorum_size(std::size_t reporters_count, double quorum_ratio) {
  const double exact = quorum_ratio * static_cast<double>(reporters_count);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

std::optional<LockCertificate> tally_and_lock(const Digest& master_id,
                                              std::span<const Vote> votes,
                                              std::size_t reporters_count,
                                              double quorum_ratio, DistanceRule rule) {
  if (!(quorum_ratio > 0.5 && quorum_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quorum ratio must lie in (0.5, 1]");
  }
  if (votes.empty()) return std::nullopt;
  const std::uint64_t height = votes.front().height;
  const std::uint32_t retry = votes.front().retry;

  struct Tally {
    Uint256 distance;
    std::vector<Digest> supporters;
  };
  std::map<Digest, Tally> by_candidate;
  std::map<Digest, bool> seen_reporter;
  for (const auto& v : votes) {
    if (v.height != height || v.retry != retry) {
      throw Error(ErrorCode::kMixedHeights, "votes for different heights in one tally");
    }
    if (seen_reporter[v.reporter_id]) continue;
    seen_reporter[v.reporter_id] = true;
    auto& t = by_candidate[v.candidate_hash];
    t.distance = v.distance;
    t.supporters.push_back(v.reporter_id);
  }

  const std::size_t need = quorum_size(reporters_count, quorum_ratio);
  const std::pair<const Digest, Tally>* winner = nullptr;
  for (const auto& entry : by_candidate) {
    if (entry.second.supporters.size() < need || entry.second.supporters.empty()) continue;
    if (winner == nullptr || better(entry.second.distance, winner->second.distance, rule)) {
      winner = &entry;
    }
  }
  if (winner == nullptr) return std::nullopt;

  LockCertificate cert;
  cert.height = height;
  cert.retry = retry;
  cert.candidate_hash = winner->first;
  cert.distance = winner->second.distance;
  cert.supporters = winner->second.supporters;
  std::sort(cert.supporters.begin(), cert.supporters.end());
  cert.quorum_ratio = quorum_ratio;
  cert.master_id = master_id;
  return cert;
}

void Anchor::finalize(const LockCertificate& certificate, const Block& candidate,
                      const CommitmentRegistry& registry) {
  if (locked(certificate.height)) {
    throw Error(ErrorCode::kLockHeld,
                "height " + std::to_string(certificate.height) + " is already locked");
  }
  if (header_hash(candidate.header) != certificate.candidate_hash ||
      candidate.header.height != certificate.height) {
    throw Error(ErrorCode::kCertificateMismatch, "certificate does not name this candidate");
  }
  if (candidate.header.height != chain_.height() + 1 || chain_.empty()) {
    throw Error(ErrorCode::kHeightMismatch,
                "candidate height " + std::to_string(candidate.header.height) +
                    " does not extend head " + std::to_string(chain_.height()));
  }
  ValidationOptions opts = policy_.validation;
  opts.retry = certificate.retry;
  const Verdict v =
      chain_.append(candidate, registry, policy_.threshold, policy_.c_ref, opts);
  if (!v) {
    throw Error(ErrorCode::kBlockRejected,
                std::string("anchor rejected block: ") + std::string(to_string(v.reason)) +
                    " " + v.detail);
  }
  locks_.emplace(certificate.height, certificate);
}

std::uint64_t confirmation_time(const TimingModel& m) {
  return m.t_b_ms + m.t_q_ms + m.t_v_ms + m.t_s_ms;
}

std::uint64_t pow_confirmation_time(const PowModel& m) { return m.z * m.t_ms; }

nlohmann::json to_json(const Vote& v) {
  return {{"reporter_id", v.reporter_id.hex()},
          {"height", v.height},
          {"retry", v.retry},
          {"distance", v.distance.hex()},
          {"candidate_hash", v.candidate_hash.hex()}};
}

Vote vote_from_json(const nlohmann::json& j) {
  try {
    Vote v;
    v.reporter_id = Digest::from_hex(j.at("reporter_id").get<std::string>());
    v.height = j.at("height").get<std::uint64_t>();
    v.retry = j.at("retry").get<std::uint32_t>();
    v.distance = Uint256::from_hex(j.at("distance").get<std::string>());
    v.candidate_hash = Digest::from_hex(j.at("candidate_hash").get<std::string>());
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("vote: ") + e.what());
  }
}

nlohmann::json to_json(const LockCertificate& c) {
  json supporters = json::array();
  for (const auto& s : c.supporters) supporters.push_back(s.hex());
  return {{"height", c.height},
          {"retry", c.retry},
          {"candidate_hash", c.candidate_hash.hex()},
          {"distance", c.distance.hex()},
          {"supporters", std::move(supporters)},
          {"quorum_ratio", c.quorum_ratio},
          {"master_id", c.master_id.hex()}};
}

LockCertificate certificate_from_json(const nlohmann::json& j) {
  try {
    LockCertificate c;
    c.height = j.at("height").get<std::uint64_t>();
    c.retry = j.at("retry").get<std::uint32_t>();
    c.candidate_hash = Digest::from_hex(j.at("candidate_hash").get<std::string>());
    c.distance = Uint256::from_hex(j.at("distance").get<std::string>());
    for (const auto& s : j.at("supporters")) {
      c.supporters.push_back(Digest::from_hex(s.get<std::string>()));
    }
    c.quorum_ratio = j.at("quorum_ratio").get<double>();
    c.master_id = Digest::from_hex(j.at("master_id").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("lock certificate: ") + e.what());
  }
}

nlohmann::json to_json(const Message& m) {
  return std::visit(
      [](const auto& msg) -> json {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, CandidateMsg>) {
          return {{"type", "Candidate"}, {"block", to_json(msg.block)}, {"retry", msg.retry}};
        } else if constexpr (std::is_same_v<T, VoteMsg>) {
          return {{"type", "Vote"}, {"vote", to_json(msg.vote)}};
        } else if constexpr (std::is_same_v<T, LockMsg>) {
          return {{"type", "Lock"}, {"certificate", to_json(msg.certificate)}};
        } else if constexpr (std::is_same_v<T, FinalMsg>) {
          return {{"type", "Final"},
                  {"block", to_json(msg.block)},
                  {"certificate", to_json(msg.certificate)}};
        } else {
          return {{"type", "Announce"}, {"record", to_json(msg.record)}};
        }
      },
      m);
}

Message message_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "Candidate") {
      return CandidateMsg{block_from_json(j.at("block")), j.at("retry").get<std::uint32_t>()};
    }
    if (type == "Vote") return VoteMsg{vote_from_json(j.at("vote"))};
    if (type == "Lock") return LockMsg{certificate_from_json(j.at("certificate"))};
    if (type == "Final") {
      return FinalMsg{block_from_json(j.at("block")),
                      certificate_from_json(j.at("certificate"))};
    }
    if (type == "Announce") return AnnounceMsg{announcement_from_json(j.at("record"))};
    throw ParseError("unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("message: ") + e.what());
  }
}

}  // namespace pon
