#include "pon/eligibility.hpp"

#include <cmath>

#include "pon/error.hpp"

namespace pon {

Uint256 Uint256::pow2(unsigned k) {
  if (k > 255) {
    throw Error(ErrorCode::kInvalidArgument, "2^k needs k <= 255");
  }
  Uint256 v;
  v.be[31 - k / 8] = static_cast<std::uint8_t>(1u << (k % 8));
  return v;
}

Uint256 Uint256::max() {
  Uint256 v;
  v.be.fill(0xff);
  return v;
}

Uint256 Uint256::from_hex(std::string_view hex) {
  return from_digest(Digest::from_hex(hex));
}

std::string Uint256::hex() const { return to_hex({be.data(), be.size()}); }

long double Uint256::fraction() const {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < be.size(); ++i) {
    acc += std::ldexp(static_cast<long double>(be[i]), -8 * static_cast<int>(i + 1));
  }
  return acc;
}

unsigned Uint256::top_bits(unsigned bits) const {
  if (bits == 0 || bits > 8) {
    throw Error(ErrorCode::kInvalidArgument, "top_bits takes 1..8");
  }
  return be[0] >> (8 - bits);
}

Threshold Threshold::from_exponent(unsigned k) {
  if (k == 256) return {Uint256::max()};
  return {Uint256::pow2(k)};
}

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::kReveal ? "reveal" : "signature";
}

ScoreMode score_mode_from_string(std::string_view s) {
  if (s == "reveal") return ScoreMode::kReveal;
  if (s == "signature") return ScoreMode::kSignature;
  throw Error(ErrorCode::kInvalidArgument, "unknown score mode '" + std::string(s) + "'");
}

Digest salted_prev_hash(const Digest& prev_hash, std::uint32_t retry) {
  if (retry == 0) return prev_hash;
  Bytes salt;
  append(salt, as_bytes("retry"));
  append_u32_be(salt, retry);
  return hash_bytes({prev_hash.view(), salt});
}

EligibilityScore score_from_reveal(const Digest& prev_hash, const Digest& element) {
  return {Uint256::from_digest(hash_bytes({prev_hash.view(), element.view()}))};
}

EligibilityScore score_from_signature_bytes(const Signature& signature) {
  return {Uint256::from_digest(hash_bytes(signature.bytes))};
}

EligibilityScore score_from_signature(const Keypair& key, const Digest& prev_hash) {
  return score_from_signature_bytes(sign(key, prev_hash.view()));
}

bool is_eligible(const EligibilityScore& score, const Threshold& threshold) {
  return score.value < threshold.value;
}

double expected_proposers(std::uint64_t n_nodes, const Threshold& threshold) {
  return static_cast<double>(static_cast<long double>(n_nodes) * threshold.probability());
}

Bytes candidacy_message(const Digest& prev_hash, std::uint64_t height) {
  Bytes msg;
  append(msg, prev_hash.view());
  append_u64_be(msg, height);
  return msg;
}

CandidateProof make_proof(const Keypair& key, const NonceChain& chain,
                          const Digest& prev_hash, std::uint64_t height,
                          std::uint32_t retry, ScoreMode mode, bool sign_proof) {
  const ChainReveal r = chain.reveal(height);
  const Digest salted = salted_prev_hash(prev_hash, retry);

  CandidateProof proof;
  proof.node_id = key.node_id;
  proof.height = height;
  proof.reveal_element = r.element;
  proof.d = r.d;
  proof.retry = retry;
  if (mode == ScoreMode::kSignature) {
    proof.signature = sign(key, salted.view());
    proof.score = score_from_signature_bytes(*proof.signature);
  } else {
    proof.score = score_from_reveal(salted, r.element);
    if (sign_proof) {
      proof.signature = sign(key, candidacy_message(prev_hash, height));
    }
  }
  return proof;
}

bool verify_candidacy(const CandidateProof& proof, const Digest& prev_hash,
                      const CommitmentRegistry& registry,
                      const Threshold& threshold, ScoreMode mode) {
  const Announcement& active = registry.lookup(proof.node_id);
  const Announcement* entry = registry.find_for_height(proof.node_id, proof.height);
  if (entry == nullptr) {
    entry = &active;
  }
  if (proof.height < entry->start_height ||
      proof.d != proof.height - entry->start_height) {
    return false;
  }
  if (!reveal_verify(proof.reveal_element, proof.d, entry->commitment)) {
    return false;
  }
  const Digest salted = salted_prev_hash(prev_hash, proof.retry);
  EligibilityScore expected;
  if (mode == ScoreMode::kSignature) {
    if (!proof.signature || !verify(entry->public_key, salted.view(), *proof.signature)) {
      return false;
    }
    expected = score_from_signature_bytes(*proof.signature);
  } else {
    if (proof.signature &&
        !verify(entry->public_key, candidacy_message(prev_hash, proof.height),
                *proof.signature)) {
      return false;
    }
    expected = score_from_reveal(salted, proof.reveal_element);
  }
  return expected == proof.score && is_eligible(expected, threshold);
}

nlohmann::json to_json(const CandidateProof& proof) {
  return {{"node_id", proof.node_id.hex()},
          {"height", proof.height},
          {"reveal", proof.reveal_element.hex()},
          {"d", proof.d},
          {"score", proof.score.value.hex()},
          {"signature", proof.signature ? nlohmann::json(proof.signature->hex())
                                        : nlohmann::json(nullptr)},
          {"retry", proof.retry}};
}

CandidateProof proof_from_json(const nlohmann::json& j) {
  try {
    CandidateProof p;
    p.node_id = Digest::from_hex(j.at("node_id").get<std::string>());
    p.height = j.at("height").get<std::uint64_t>();
    p.reveal_element = Digest::from_hex(j.at("reveal").get<std::string>());
    p.d = j.at("d").get<std::uint32_t>();
    p.score.value = Uint256::from_hex(j.at("score").get<std::string>());
    const auto& sig = j.at("signature");
    if (!sig.is_null()) {
      p.signature = Signature{from_hex(sig.get<std::string>())};
    }
    p.retry = j.value("retry", 0u);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("candidate proof: ") + e.what());
  }
}

}  // namespace pon
