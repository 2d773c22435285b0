#include "doctest.h"
#include "pon/eligibility.hpp"
#include "pon/error.hpp"
#include "util.hpp"

using namespace pon;
using test::filled;

TEST_CASE("score is the hash of prev and element") {
  const Digest prev = hash_bytes(as_bytes("prev"));
  const Digest elem = hash_bytes(as_bytes("element"));
  CHECK(score_from_reveal(prev, elem).value.hex() ==
        "b9a91996a451d67ec30e3e713dcddcfd27622cad790db9e0e281a96737f9e8e3");
}

TEST_CASE("salted prev hash") {
  const Digest prev = hash_bytes(as_bytes("prev"));
  CHECK(salted_prev_hash(prev, 0) == prev);
  CHECK(salted_prev_hash(prev, 1).hex() ==
        "6b1c269632c7b8ba37e97dba7c35557a41b92c20ded38c365f28decfc8fb946d");
  CHECK(salted_prev_hash(prev, 2) != salted_prev_hash(prev, 1));
}

TEST_CASE("Uint256 arithmetic helpers") {
  CHECK(Uint256::pow2(0).be[31] == 1);
  CHECK(Uint256::pow2(255).be[0] == 0x80);
  CHECK(Uint256::pow2(9).be[30] == 2);
  CHECK_THROWS_AS(Uint256::pow2(256), Error);
  CHECK(Uint256::pow2(255).fraction() == doctest::Approx(0.5));
  CHECK(Uint256::pow2(253).fraction() == doctest::Approx(0.125));
  CHECK(Uint256::max().hex() == std::string(64, 'f'));
  CHECK(Uint256::from_hex(Uint256::pow2(100).hex()) == Uint256::pow2(100));
  CHECK(Uint256::pow2(200) < Uint256::pow2(201));
  CHECK(Uint256::pow2(255).top_bits(4) == 8);
  CHECK_THROWS_AS(Uint256::max().top_bits(9), Error);
}

TEST_CASE("threshold from exponent") {
  CHECK(Threshold::from_exponent(256).value == Uint256::max());
  CHECK(Threshold::from_exponent(253).value == Uint256::pow2(253));
  CHECK(expected_proposers(16, Threshold::from_exponent(253)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(Threshold::from_exponent(257), Error);
}

TEST_CASE("eligibility is strict") {
  const Threshold t = Threshold::from_exponent(200);
  EligibilityScore at{t.value};
  CHECK_FALSE(is_eligible(at, t));
  EligibilityScore below{Uint256::pow2(199)};
  CHECK(is_eligible(below, t));
  // Threshold 2^256 - 1 rejects only the all-ones score.
  CHECK_FALSE(is_eligible({Uint256::max()}, Threshold::from_exponent(256)));
  CHECK(is_eligible({Uint256::pow2(255)}, Threshold::from_exponent(256)));
  // Exponent 0 admits only the zero score.
  CHECK(is_eligible({Uint256{}}, Threshold::from_exponent(0)));
  CHECK_FALSE(is_eligible({Uint256::pow2(0)}, Threshold::from_exponent(0)));
}

TEST_CASE("score mode names") {
  CHECK(score_mode_from_string("reveal") == ScoreMode::kReveal);
  CHECK(score_mode_from_string(to_string(ScoreMode::kSignature)) == ScoreMode::kSignature);
  CHECK_THROWS_AS(score_mode_from_string("vrf"), Error);
}

namespace {

struct Fixture {
  Keypair key = keypair_from_seed(filled(0x21));
  NonceChain chain = NonceChain::generate(filled(0x22), 16, 0);
  CommitmentRegistry registry;
  Digest prev = hash_bytes(as_bytes("block 4"));
  Threshold all = Threshold::from_exponent(256);

  Fixture() { registry.register_node(announce(key, chain)); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "reveal-mode proof verifies and tampering breaks it") {
  for (const bool signed_proof : {false, true}) {
    CandidateProof p = make_proof(key, chain, prev, 5, 0, ScoreMode::kReveal, signed_proof);
    CHECK(p.d == 5);
    CHECK(p.signature.has_value() == signed_proof);
    CHECK(p.score == score_from_reveal(prev, chain.reveal(5).element));
    CHECK(verify_candidacy(p, prev, registry, all));

    CandidateProof wrong_prev = p;
    CHECK_FALSE(verify_candidacy(wrong_prev, hash_bytes(as_bytes("other")), registry, all));
    CandidateProof wrong_d = p;
    wrong_d.d = 4;
    CHECK_FALSE(verify_candidacy(wrong_d, prev, registry, all));
    CandidateProof wrong_score = p;
    wrong_score.score.value.be[31] ^= 1;
    CHECK_FALSE(verify_candidacy(wrong_score, prev, registry, all));
    CandidateProof wrong_elem = p;
    wrong_elem.reveal_element = chain.reveal(6).element;
    CHECK_FALSE(verify_candidacy(wrong_elem, prev, registry, all));
  }
}

TEST_CASE_FIXTURE(Fixture, "bad signature is rejected") {
  CandidateProof p = make_proof(key, chain, prev, 3, 0, ScoreMode::kReveal, true);
  p.signature->bytes[0] ^= 0x80;
  CHECK_FALSE(verify_candidacy(p, prev, registry, all));
}

TEST_CASE_FIXTURE(Fixture, "signature-mode score is the hash of the signature") {
  CandidateProof p = make_proof(key, chain, prev, 2, 0, ScoreMode::kSignature, false);
  REQUIRE(p.signature.has_value());
  CHECK(p.score == score_from_signature(key, prev));
  CHECK(p.score == score_from_signature_bytes(*p.signature));
  CHECK(verify_candidacy(p, prev, registry, all, ScoreMode::kSignature));
  CandidateProof unsigned_proof = p;
  unsigned_proof.signature.reset();
  CHECK_FALSE(verify_candidacy(unsigned_proof, prev, registry, all, ScoreMode::kSignature));
  // Retries re-sign the salted prev hash, giving a fresh score.
  CandidateProof r1 = make_proof(key, chain, prev, 2, 1, ScoreMode::kSignature, false);
  CHECK(r1.score != p.score);
  CHECK(verify_candidacy(r1, prev, registry, all, ScoreMode::kSignature));
  CHECK_FALSE(verify_candidacy(r1, salted_prev_hash(prev, 1), registry, all, ScoreMode::kSignature));
}

TEST_CASE_FIXTURE(Fixture, "ineligible score fails verification") {
  const CandidateProof p = make_proof(key, chain, prev, 7, 0, ScoreMode::kReveal, false);
  const Threshold none = Threshold::from_exponent(0);
  CHECK_FALSE(verify_candidacy(p, prev, registry, none));
}

TEST_CASE_FIXTURE(Fixture, "unknown node and uncovered height") {
  const Keypair stranger = keypair_from_seed(filled(0x99));
  const CandidateProof p = make_proof(stranger, chain, prev, 1, 0, ScoreMode::kReveal, false);
  try {
    verify_candidacy(p, prev, registry, all);
    FAIL("expected NotRegistered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotRegistered);
  }
  CHECK_THROWS_AS(make_proof(key, chain, prev, 17, 0, ScoreMode::kReveal, false), Error);
}

TEST_CASE_FIXTURE(Fixture, "proof JSON round trip") {
  const CandidateProof p = make_proof(key, chain, prev, 9, 3, ScoreMode::kReveal, true);
  CHECK(proof_from_json(to_json(p)) == p);
  const CandidateProof q = make_proof(key, chain, prev, 9, 0, ScoreMode::kReveal, false);
  CHECK(proof_from_json(to_json(q)) == q);
}

TEST_CASE("scores are roughly uniform in the top bit") {
  const NonceChain c = NonceChain::generate(filled(0x31), 2000, 0);
  int high = 0;
  for (std::uint64_t h = 1; h <= 2000; ++h) {
    const Digest prev = hash_iter(filled(1), h % 7 + 1);
    high += static_cast<int>(score_from_reveal(prev, c.reveal(h).element).value.top_bits(1));
  }
  // Binomial(2000, 1/2): 5 sigma is about 112.
  CHECK(high > 1000 - 112);
  CHECK(high < 1000 + 112);
}
