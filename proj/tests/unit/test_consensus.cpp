#include "doctest.h"
#include "pon/consensus.hpp"
#include "pon/error.hpp"
#include "util.hpp"

using namespace pon;
using test::filled;
using test::FixedOracle;

namespace {

NodeState make_node(std::uint8_t seed, std::uint32_t m = 32) {
  return NodeState{keypair_from_seed(filled(seed)), filled(seed + 100),
                   NonceChain::generate(filled(seed + 100), m, 0),
                   Chain::with_genesis(0), RadioParams{}, ControlBounds{}, {}};
}

struct Round {
  std::vector<NodeState> nodes;
  CommitmentRegistry registry;
  ProposalConfig config;
  Block genesis = genesis_block(0);

  explicit Round(int n) {
    for (int i = 0; i < n; ++i) {
      nodes.push_back(make_node(static_cast<std::uint8_t>(i + 1)));
      registry.register_node(announce(nodes.back().keypair, nodes.back().nonce_chain));
    }
    config.threshold = Threshold::from_exponent(256);
  }
};

Vote make_vote(std::uint8_t reporter, std::uint8_t candidate, std::uint64_t dist,
               std::uint64_t height = 1, std::uint32_t retry = 0) {
  Vote v;
  v.reporter_id = filled(reporter);
  v.height = height;
  v.retry = retry;
  v.candidate_hash = filled(candidate);
  v.distance = Uint256::pow2(static_cast<unsigned>(dist));
  return v;
}

}  // namespace

TEST_CASE("roles") {
  NodeState n = make_node(1);
  CHECK_FALSE(n.has_role(3, Role::kProposer));
  n.add_role(3, Role::kProposer);
  n.add_role(3, Role::kReporter);
  CHECK(n.has_role(3, Role::kProposer));
  CHECK(n.has_role(3, Role::kReporter));
  CHECK_FALSE(n.has_role(4, Role::kProposer));
  CHECK(to_string(Role::kAnchor) == "Anchor");
}

TEST_CASE("chain master key per generation") {
  const Digest m = filled(4);
  CHECK(chain_master_key(m, 0) == m);
  CHECK(chain_master_key(m, 1) != m);
  CHECK(chain_master_key(m, 1) != chain_master_key(m, 2));
}

TEST_CASE("round_propose statuses") {
  Round r(1);
  NodeState& node = r.nodes[0];

  SUBCASE("proposed when the gate passes") {
    const FixedOracle oracle(50.0, 500.0);
    const Proposal p = round_propose(node, r.genesis.header, {}, r.config, oracle, 100);
    REQUIRE(p.status == ProposeStatus::kProposed);
    REQUIRE(p.block.has_value());
    CHECK(p.block->header.height == 1);
    CHECK(p.block->header.timestamp_ms == 100);
    CHECK(p.block->header.secrecy_capacity_milli == capacity_to_milli(p.control.capacity_bits));
    CHECK(p.control_ms == 0);
    CHECK(node.has_role(1, Role::kProposer));
    CHECK(verify_qualification(*p.block, r.genesis.header, r.registry, r.config.threshold));
    CHECK(verify_candidate(*p.block, r.genesis.header, r.registry, r.config.threshold, 1.0, oracle));
  }
  SUBCASE("gate rejection discards the block but keeps controller effort") {
    const FixedOracle oracle(50.0, 5.0);
    const Proposal p = round_propose(node, r.genesis.header, {}, r.config, oracle, 100);
    CHECK(p.status == ProposeStatus::kGateRejected);
    CHECK_FALSE(p.block.has_value());
    CHECK(p.control.iters > 0);
    CHECK(p.control_ms == p.control.iters * node.bounds.iter_cost_ms);
    CHECK(node.radio == p.control.radio);
  }
  SUBCASE("ineligible") {
    r.config.threshold = Threshold::from_exponent(0);
    const FixedOracle oracle(50.0, 500.0);
    const Proposal p = round_propose(node, r.genesis.header, {}, r.config, oracle, 100);
    CHECK(p.status == ProposeStatus::kIneligible);
    CHECK_FALSE(node.has_role(1, Role::kProposer));
  }
  SUBCASE("exhausted nonce chain") {
    BlockHeader far = r.genesis.header;
    far.height = 40;
    const FixedOracle oracle(50.0, 500.0);
    try {
      round_propose(node, far, {}, r.config, oracle, 100);
      FAIL("expected HeightOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kHeightOutOfRange);
    }
  }
}

TEST_CASE("verify_candidate recomputes secrecy independently") {
  Round r(1);
  const FixedOracle honest(50.0, 500.0);
  Proposal p = round_propose(r.nodes[0], r.genesis.header, {}, r.config, honest, 10);
  REQUIRE(p.block.has_value());

  // The eavesdropper is really much closer than the proposer claimed.
  const FixedOracle truth(50.0, 60.0);
  CHECK_FALSE(verify_candidate(*p.block, r.genesis.header, r.registry, r.config.threshold, 1.0, truth));

  // Inflating the claim breaks the hash and signature, but even a re-built
  // block with an inflated capacity is caught by the oracle.
  const CandidateProof proof = p.proof;
  const double actual = honest.secrecy(r.nodes[0].node_id(), 10).capacity_bits;
  const Block inflated = block_build(r.genesis.header, 1, {}, proof, actual + 0.01, 10);
  CHECK_FALSE(verify_candidate(inflated, r.genesis.header, r.registry, r.config.threshold, 1.0, honest));
  const Block slack = block_build(r.genesis.header, 1, {}, proof, actual + 0.0005, 10);
  CHECK(verify_candidate(slack, r.genesis.header, r.registry, r.config.threshold, 1.0, honest));

  BlockHeader other = r.genesis.header;
  other.timestamp_ms = 1;
  CHECK_FALSE(verify_qualification(*p.block, other, r.registry, r.config.threshold));
}

TEST_CASE("distance rule names") {
  CHECK(distance_rule_from_string("min") == DistanceRule::kMin);
  CHECK(to_string(DistanceRule::kMax) == "max");
  CHECK_THROWS_AS(distance_rule_from_string("median"), Error);
}

TEST_CASE("vote picks the best distance, ties by hash") {
  std::vector<VerifiedCandidate> vc(3);
  vc[0].hash = filled(3);
  vc[0].score.value = Uint256::pow2(100);
  vc[1].hash = filled(2);
  vc[1].score.value = Uint256::pow2(50);
  vc[2].hash = filled(1);
  vc[2].score.value = Uint256::pow2(200);
  for (auto& c : vc) c.block.header.height = 5;

  const auto lo = vote(filled(9), vc, DistanceRule::kMin);
  REQUIRE(lo);
  CHECK(lo->candidate_hash == filled(2));
  CHECK(lo->height == 5);
  CHECK(lo->reporter_id == filled(9));
  const auto hi = vote(filled(9), vc, DistanceRule::kMax);
  CHECK(hi->candidate_hash == filled(1));

  vc[0].score.value = Uint256::pow2(50);
  CHECK(vote(filled(9), vc)->candidate_hash == filled(2));
  vc[0].hash = filled(0);
  CHECK(vote(filled(9), vc)->candidate_hash == filled(0));

  CHECK_FALSE(vote(filled(9), std::span<const VerifiedCandidate>{}));
}

TEST_CASE("quorum size") {
  CHECK(quorum_size(3, 2.0 / 3.0) == 2);
  CHECK(quorum_size(6, 2.0 / 3.0) == 4);
  CHECK(quorum_size(7, 2.0 / 3.0) == 5);
  CHECK(quorum_size(1, 2.0 / 3.0) == 1);
  CHECK(quorum_size(10, 1.0) == 10);
  CHECK(quorum_size(4, 0.51) == 3);
}

TEST_CASE("tally_and_lock") {
  const Digest master = filled(0x77);

  SUBCASE("quorum reached") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3), make_vote(2, 0xa, 3), make_vote(3, 0xb, 9)};
    const auto c = tally_and_lock(master, votes, 3, 2.0 / 3.0);
    REQUIRE(c);
    CHECK(c->candidate_hash == filled(0xa));
    CHECK(c->supporters == std::vector<Digest>{filled(1), filled(2)});
    CHECK(c->master_id == master);
    CHECK(c->height == 1);
  }
  SUBCASE("no quorum") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3), make_vote(2, 0xb, 4), make_vote(3, 0xc, 9)};
    CHECK_FALSE(tally_and_lock(master, votes, 3, 2.0 / 3.0));
    CHECK_FALSE(tally_and_lock(master, {}, 3, 2.0 / 3.0));
  }
  SUBCASE("repeated votes count once") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3), make_vote(1, 0xa, 3), make_vote(3, 0xb, 9)};
    CHECK_FALSE(tally_and_lock(master, votes, 3, 2.0 / 3.0));
  }
  SUBCASE("absent reporters still count toward the denominator") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3), make_vote(2, 0xa, 3)};
    CHECK(tally_and_lock(master, votes, 3, 2.0 / 3.0));
    CHECK_FALSE(tally_and_lock(master, votes, 4, 2.0 / 3.0));
  }
  SUBCASE("mixed heights") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3, 1), make_vote(2, 0xa, 3, 2)};
    try {
      tally_and_lock(master, votes, 2, 2.0 / 3.0);
      FAIL("expected MixedHeights");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMixedHeights);
    }
    const std::vector<Vote> retries{make_vote(1, 0xa, 3, 1, 0), make_vote(2, 0xa, 3, 1, 1)};
    CHECK_THROWS_AS(tally_and_lock(master, retries, 2, 2.0 / 3.0), Error);
  }
  SUBCASE("ratio must be a strict majority") {
    const std::vector<Vote> votes{make_vote(1, 0xa, 3)};
    CHECK_THROWS_AS(tally_and_lock(master, votes, 1, 0.5), Error);
    CHECK_THROWS_AS(tally_and_lock(master, votes, 1, 1.01), Error);
  }
}

TEST_CASE("anchor finalization") {
  Round r(3);
  const FixedOracle oracle(50.0, 500.0);
  Proposal p = round_propose(r.nodes[0], r.genesis.header, {}, r.config, oracle, 10);
  REQUIRE(p.block);
  const Digest h = block_hash(*p.block);

  std::vector<Vote> votes;
  for (auto& n : r.nodes) {
    VerifiedCandidate vc{*p.block, h, p.proof.score, 0};
    votes.push_back(*vote(n.node_id(), std::span<const VerifiedCandidate>(&vc, 1)));
  }
  const auto cert = tally_and_lock(r.nodes[1].node_id(), votes, 3, 2.0 / 3.0);
  REQUIRE(cert);

  AnchorPolicy policy{r.config.threshold, 1.0, {}};
  policy.validation.retry = 0;
  Anchor anchor(Chain::with_genesis(0), policy);

  SUBCASE("wrong block for certificate") {
    Block other = *p.block;
    other.header.timestamp_ms += 1;
    try {
      anchor.finalize(*cert, other, r.registry);
      FAIL("expected CertificateMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCertificateMismatch);
    }
    CHECK_FALSE(anchor.locked(1));
  }
  SUBCASE("lock once") {
    anchor_finalize(anchor, *cert, *p.block, r.registry);
    CHECK(anchor.chain().height() == 1);
    CHECK(anchor.locked(1));
    CHECK(anchor.locks().at(1) == *cert);
    try {
      anchor.finalize(*cert, *p.block, r.registry);
      FAIL("expected LockHeld");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLockHeld);
    }
  }
  SUBCASE("height must extend the head") {
    LockCertificate c = *cert;
    Block b = *p.block;
    b.header.height = 2;
    c.height = 2;
    c.candidate_hash = block_hash(b);
    try {
      anchor.finalize(c, b, r.registry);
      FAIL("expected HeightMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kHeightMismatch);
    }
  }
  SUBCASE("invalid block") {
    LockCertificate c = *cert;
    Block b = *p.block;
    b.header.d = 7;
    c.candidate_hash = block_hash(b);
    try {
      anchor.finalize(c, b, r.registry);
      FAIL("expected BlockRejected");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBlockRejected);
    }
  }
}

TEST_CASE("timing model") {
  CHECK(confirmation_time({100, 2, 3, 5}) == 110);
  CHECK(confirmation_time({}) == 0);
  CHECK(pow_confirmation_time({6, 600000}) == 3600000);
  CHECK(pow_confirmation_time({1, 0}) == 0);
}

TEST_CASE("message JSON round trip") {
  Round r(1);
  const FixedOracle oracle(50.0, 500.0);
  const Proposal p = round_propose(r.nodes[0], r.genesis.header, {}, r.config, oracle, 10);
  REQUIRE(p.block);
  const Vote v = make_vote(1, 2, 3);
  CHECK(vote_from_json(to_json(v)) == v);
  LockCertificate c;
  c.height = 4;
  c.retry = 1;
  c.candidate_hash = filled(5);
  c.distance = Uint256::pow2(9);
  c.supporters = {filled(1), filled(2)};
  c.master_id = filled(8);
  CHECK(certificate_from_json(to_json(c)) == c);

  const std::vector<Message> msgs{CandidateMsg{*p.block, 2}, VoteMsg{v}, LockMsg{c},
                                  FinalMsg{*p.block, c},
                                  AnnounceMsg{announce(r.nodes[0].keypair, r.nodes[0].nonce_chain)}};
  for (const Message& m : msgs) CHECK(message_from_json(to_json(m)) == m);
  CHECK(to_json(msgs[1])["type"] == "Vote");
  CHECK_THROWS_AS(message_from_json(nlohmann::json{{"type", "Gossip"}}), ParseError);
}
