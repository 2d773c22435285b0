#include "doctest.h"
#include "pon/crypto_chain.hpp"
#include "pon/error.hpp"
#include "util.hpp"

using namespace pon;
using test::dg;
using test::filled;

TEST_CASE("sha256 known vectors") {
  CHECK(hash_bytes(as_bytes("")).hex() ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hash_bytes(as_bytes("abc")).hex() ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // Streaming over parts equals hashing the concatenation.
  CHECK(hash_bytes({as_bytes("a"), as_bytes("bc")}) == hash_bytes(as_bytes("abc")));
}

TEST_CASE("hash_iter") {
  CHECK(hash_iter(Digest::zero(), 5).hex() ==
        "376da11fe3ab3d0eaaddb418ccb49b5426d5c2504f526f7766580f6e45984e3b");
  CHECK(hash_iter(filled(7), 0) == filled(7));
  CHECK(hash_iter(filled(7), 3) == hash_iter(hash_iter(filled(7), 1), 2));
}

TEST_CASE("hex parsing is strict") {
  const std::string ok(64, 'a');
  CHECK(Digest::from_hex(ok) == filled(0xaa));
  CHECK_THROWS_AS(Digest::from_hex(std::string(64, 'A')), ParseError);
  CHECK_THROWS_AS(Digest::from_hex(std::string(63, 'a')), ParseError);
  CHECK_THROWS_AS(Digest::from_hex(std::string(64, 'g')), ParseError);
  CHECK(to_hex(from_hex("00ff10")) == "00ff10");
}

TEST_CASE("nonce chain layout matches the oracle") {
  const Digest master = filled(0x11);
  CHECK(chain_base(master).hex() ==
        "6c38b325cb9fad2f22c7b27dca2f4877863cf43c1496577a1463dda9e3d7b54c");
  const NonceChain c = NonceChain::generate(master, 64, 0);
  CHECK(c.commitment().hex() ==
        "2d55d557e4127a97abbaf5834548542687324bb8d913c1abc85f419cee02c3e6");
  CHECK(chain_commitment(c) == c.commitment());
  const ChainReveal r = c.reveal(2);
  CHECK(r.d == 2);
  CHECK(r.element.hex() == "684c60388aa166a67704fbc4f90492ff7d4a138e727b8d76c201455fd9e3edb1");
  CHECK(NonceChain::generate(master, 1, 0).commitment().hex() ==
        "63cc40ef381ecce8e4e273af8c6c51819e0715dba4fcdfc235aa5169ddba2464");
}

TEST_CASE("nonce chain window and reveal errors") {
  const NonceChain c = NonceChain::generate(filled(3), 5, 10);
  CHECK(c.first_usable_height() == 11);
  CHECK(c.last_usable_height() == 15);
  CHECK_FALSE(c.covers(10));
  CHECK(c.covers(15));
  CHECK_FALSE(c.covers(16));
  try {
    c.reveal(16);
    FAIL("expected HeightOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kHeightOutOfRange);
  }
  CHECK_THROWS_AS(c.reveal(10), Error);
  try {
    NonceChain::generate(filled(3), 0, 0);
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("height 12 from start 10 is verified with two hashes") {
  const NonceChain c = NonceChain::generate(filled(0x42), 64, 10);
  const ChainReveal r = c.reveal(12);
  CHECK(r.d == 2);
  CHECK(hash_iter(r.element, 2) == c.commitment());
  CHECK(hash_iter(r.element, 1) != c.commitment());
  CHECK(reveal_verify(r.element, 2, c.commitment()));
  CHECK_FALSE(reveal_verify(r.element, 3, c.commitment()));
}

TEST_CASE("reveal_verify property: every d accepts, neighbours reject") {
  const NonceChain c = NonceChain::generate(filled(0x5a), 32, 0);
  for (std::uint32_t d = 1; d <= 32; ++d) {
    const ChainReveal r = c.reveal(d);
    CHECK(r.d == d);
    CHECK(reveal_verify(r.element, d, c.commitment()));
    CHECK_FALSE(reveal_verify(r.element, d + 1, c.commitment()));
    if (d > 1) CHECK_FALSE(reveal_verify(r.element, d - 1, c.commitment()));
  }
  // d = 0 would reveal the commitment itself.
  CHECK_FALSE(reveal_verify(c.commitment(), 0, c.commitment()));
}

TEST_CASE("ed25519 is deterministic and verifies") {
  const Keypair k = keypair_from_seed(filled(1));
  const Keypair k2 = keypair_from_seed(filled(1));
  CHECK(k.public_key == k2.public_key);
  CHECK(k.node_id == hash_bytes(k.public_key));
  const Signature s1 = sign(k, as_bytes("msg"));
  CHECK(s1 == sign(k, as_bytes("msg")));
  CHECK(s1.bytes.size() == 64);
  CHECK(verify(k.public_key, as_bytes("msg"), s1));
  CHECK_FALSE(verify(k.public_key, as_bytes("msh"), s1));
  Signature bad = s1;
  bad.bytes[3] ^= 1;
  CHECK_FALSE(verify(k.public_key, as_bytes("msg"), bad));
  CHECK_FALSE(verify(keypair_from_seed(filled(2)).public_key, as_bytes("msg"), s1));
  CHECK(ed25519_scheme().name() == "ed25519");
}

TEST_CASE("registry registration rules") {
  const Keypair k = keypair_from_seed(filled(9));
  const NonceChain c1 = NonceChain::generate(filled(8), 10, 0);
  CommitmentRegistry reg;
  CHECK_FALSE(reg.contains(k.node_id));
  try {
    reg.lookup(k.node_id);
    FAIL("expected NotRegistered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotRegistered);
  }
  reg.register_node(announce(k, c1));
  CHECK(reg.lookup(k.node_id).commitment == c1.commitment());

  SUBCASE("overlapping window is stale") {
    const NonceChain c2 = NonceChain::generate(filled(7), 10, 5);
    try {
      reg.register_node(announce(k, c2));
      FAIL("expected StaleRegistration");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kStaleRegistration);
    }
  }
  SUBCASE("rollover keeps history resolvable") {
    const NonceChain c2 = NonceChain::generate(filled(7), 10, 10);
    reg.register_node(announce(k, c2));
    CHECK(reg.lookup(k.node_id).commitment == c2.commitment());
    CHECK(reg.find_for_height(k.node_id, 3)->commitment == c1.commitment());
    CHECK(reg.find_for_height(k.node_id, 11)->commitment == c2.commitment());
    CHECK(reg.find_for_height(k.node_id, 21) == nullptr);
  }
  SUBCASE("node id must match the key") {
    Announcement a = announce(k, c1);
    a.node_id = filled(0);
    try {
      reg.register_node(a);
      FAIL("expected InvalidArgument");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
  }
}

TEST_CASE("announcement and registry JSON round trip") {
  CommitmentRegistry reg;
  for (std::uint8_t i = 1; i <= 3; ++i) {
    reg.register_node(announce(keypair_from_seed(filled(i)), NonceChain::generate(filled(i), 4, 0)));
  }
  const Announcement a = reg.announcements().front();
  CHECK(announcement_from_json(to_json(a)) == a);
  const CommitmentRegistry back = registry_from_json(to_json(reg));
  CHECK(back.announcements() == reg.announcements());
  CHECK_THROWS_AS(registry_from_json(nlohmann::json::object()), ParseError);
}
