#include "pon/ledger.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pon/error.hpp"

namespace pon {

namespace {

using nlohmann::json;

void put_be(std::uint8_t* out, std::uint64_t v, int width) {
  for (int i = width - 1; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(v);
    v >>= 8;
  }
}

void append_f64_be(Bytes& out, double v) {
  append_u64_be(out, std::bit_cast<std::uint64_t>(v));
}

// Strict accessors: wrong type, missing key or out-of-range value throws
// ParseError so a corrupted record never decodes to a plausible value.
const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ParseError(std::string("expected object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

void expect_keys(const json& j, std::size_t n, const char* what) {
  if (!j.is_object() || j.size() != n) {
    throw ParseError(std::string(what) + ": unexpected field set");
  }
}

std::uint64_t get_u64(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned()) throw ParseError(std::string("'") + key + "' must be an unsigned integer");
  return v.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& j, const char* key) {
  const std::uint64_t v = get_u64(j, key);
  if (v > 0xffffffffULL) throw ParseError(std::string("'") + key + "' exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

double get_f64(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw ParseError(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::string get_str(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ParseError(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

Digest get_digest(const json& j, const char* key) {
  return Digest::from_hex(get_str(j, key));
}

std::string_view kind_name(TxKind k) { return k == TxKind::kBsm ? "BSM" : "LinkUpdate"; }

TxKind kind_from_name(const std::string& s) {
  if (s == "BSM") return TxKind::kBsm;
  if (s == "LinkUpdate") return TxKind::kLinkUpdate;
  throw ParseError("unknown transaction kind '" + s + "'");
}

}  // namespace

Verdict candidacy_validate(const Block& block, const Digest& prev_hash,
                           const CommitmentRegistry& registry,
                           const Threshold& threshold,
                           const ValidationOptions& opts) {
  const std::uint64_t h = block.header.height;
  if (!registry.contains(block.header.proposer_id)) {
    return Verdict::reject(RejectReason::kCandidacy, h, "proposer not registered");
  }
  std::uint32_t first = 0;
  std::uint32_t last = opts.max_retries;
  if (opts.retry) first = last = *opts.retry;
  for (std::uint32_t r = first; r <= last; ++r) {
    const CandidateProof proof = embedded_proof(block, prev_hash, r, opts.mode);
    // Cheap score test first; the full check hashes d times and verifies
    // the signature.
    if (!is_eligible(proof.score, threshold)) continue;
    if (verify_candidacy(proof, prev_hash, registry, threshold, opts.mode)) {
      return Verdict::accept(h);
    }
  }
  return Verdict::reject(RejectReason::kCandidacy, h, "candidacy proof does not verify");
}

bool TrafficRecord::valid() const {
  return std::isfinite(latitude) && std::isfinite(longitude) &&
         std::isfinite(speed) && std::isfinite(heading) &&
         std::fabs(latitude) <= 90.0 && std::fabs(longitude) <= 180.0 &&
         speed >= 0.0 && heading >= 0.0 && heading < 360.0;
}

Bytes canonical_record_bytes(TxKind kind, const TrafficRecord& r) {
  Bytes out;
  out.reserve(1 + 32 + 4 * 8 + 8 + 1 + (r.link_id ? 4 + r.link_id->size() : 0));
  out.push_back(static_cast<std::uint8_t>(kind));
  append(out, r.vehicle_id.view());
  append_f64_be(out, r.latitude);
  append_f64_be(out, r.longitude);
  append_f64_be(out, r.speed);
  append_f64_be(out, r.heading);
  append_u64_be(out, r.timestamp_ms);
  if (r.link_id) {
    out.push_back(1);
    append_u32_be(out, static_cast<std::uint32_t>(r.link_id->size()));
    append(out, as_bytes(*r.link_id));
  } else {
    out.push_back(0);
  }
  return out;
}

Digest compute_tx_id(const Transaction& tx) {
  return hash_bytes(canonical_record_bytes(tx.kind, tx.record));
}

Transaction make_transaction(TxKind kind, const TrafficRecord& record) {
  Transaction tx{kind, record, {}};
  tx.tx_id = compute_tx_id(tx);
  return tx;
}

Digest merkle_root(const std::vector<Digest>& leaves) {
  if (leaves.empty()) return Digest::zero();
  std::vector<Digest> level = leaves;
  do {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<Digest> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      next.push_back(hash_bytes({level[i].view(), level[i + 1].view()}));
    }
    level = std::move(next);
  } while (level.size() > 1);
  return level.front();
}

Digest tx_root(const std::vector<Transaction>& transactions) {
  std::vector<Digest> leaves;
  leaves.reserve(transactions.size());
  for (const auto& tx : transactions) leaves.push_back(tx.tx_id);
  return merkle_root(leaves);
}

std::vector<MerkleStep> merkle_proof(const std::vector<Digest>& leaves,
                                     std::size_t index) {
  if (index >= leaves.size()) {
    throw Error(ErrorCode::kInvalidArgument, "merkle_proof: index out of range");
  }
  std::vector<MerkleStep> path;
  std::vector<Digest> level = leaves;
  do {
    if (level.size() % 2 == 1) level.push_back(level.back());
    const std::size_t sib = index ^ 1U;
    path.push_back({level[sib], sib < index});
    std::vector<Digest> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      next.push_back(hash_bytes({level[i].view(), level[i + 1].view()}));
    }
    level = std::move(next);
    index /= 2;
  } while (level.size() > 1);
  return path;
}

bool merkle_verify(const Digest& leaf, const std::vector<MerkleStep>& path,
                   const Digest& root) {
  Digest cur = leaf;
  for (const auto& step : path) {
    cur = step.sibling_left ? hash_bytes({step.sibling.view(), cur.view()})
                            : hash_bytes({cur.view(), step.sibling.view()});
  }
  return cur == root;
}

std::array<std::uint8_t, kHeaderBytes> header_bytes(const BlockHeader& h) {
  std::array<std::uint8_t, kHeaderBytes> out{};
  std::uint8_t* p = out.data();
  put_be(p, h.version, 4);                p += 4;
  std::copy(h.prev_hash.bytes.begin(), h.prev_hash.bytes.end(), p);           p += 32;
  put_be(p, h.timestamp_ms, 8);           p += 8;
  std::copy(h.reveal_element.bytes.begin(), h.reveal_element.bytes.end(), p); p += 32;
  put_be(p, h.d, 4);                      p += 4;
  put_be(p, h.height, 8);                 p += 8;
  std::copy(h.tx_root.bytes.begin(), h.tx_root.bytes.end(), p);               p += 32;
  std::copy(h.proposer_id.bytes.begin(), h.proposer_id.bytes.end(), p);       p += 32;
  put_be(p, h.secrecy_capacity_milli, 4);
  return out;
}

Digest header_hash(const BlockHeader& header) {
  const auto bytes = header_bytes(header);
  return hash_bytes(ByteView{bytes.data(), bytes.size()});
}

std::uint32_t capacity_to_milli(double capacity_bits) {
  if (!(capacity_bits > 0.0)) return 0;
  const double milli = std::floor(capacity_bits * 1000.0);
  if (milli >= 4294967295.0) return 0xffffffffU;
  return static_cast<std::uint32_t>(milli);
}

Block genesis_block(std::uint64_t timestamp_ms) {
  Block g;
  g.header.timestamp_ms = timestamp_ms;
  return g;
}

Block block_build(const BlockHeader& prev_header, std::uint64_t height,
                  std::vector<Transaction> transactions,
                  const CandidateProof& proof, double secrecy_capacity,
                  std::uint64_t timestamp_ms) {
  if (height != prev_header.height + 1) {
    throw Error(ErrorCode::kHeightMismatch,
                "block height " + std::to_string(height) + " does not follow " +
                    std::to_string(prev_header.height));
  }
  if (proof.height != height) {
    throw Error(ErrorCode::kHeightMismatch, "candidate proof is for height " +
                                                std::to_string(proof.height));
  }
  Block b;
  b.header.version = kBlockVersion;
  b.header.prev_hash = header_hash(prev_header);
  b.header.timestamp_ms = timestamp_ms;
  b.header.reveal_element = proof.reveal_element;
  b.header.d = proof.d;
  b.header.height = height;
  b.header.tx_root = tx_root(transactions);
  b.header.proposer_id = proof.node_id;
  b.header.secrecy_capacity_milli = capacity_to_milli(secrecy_capacity);
  b.transactions = std::move(transactions);
  b.signature = proof.signature;
  return b;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kNone: return "Ok";
    case RejectReason::kLink: return "Link";
    case RejectReason::kHeight: return "Height";
    case RejectReason::kTxRoot: return "TxRoot";
    case RejectReason::kRecord: return "Record";
    case RejectReason::kCandidacy: return "Candidacy";
    case RejectReason::kSecrecyGate: return "SecrecyGate";
    case RejectReason::kTimestamp: return "Timestamp";
    case RejectReason::kGenesis: return "Genesis";
    case RejectReason::kVersion: return "Version";
    case RejectReason::kCorrupt: return "Corrupt";
  }
  return "Unknown";
}

CandidateProof embedded_proof(const Block& block, const Digest& prev_hash,
                              std::uint32_t retry, ScoreMode mode) {
  CandidateProof p;
  p.node_id = block.header.proposer_id;
  p.height = block.header.height;
  p.reveal_element = block.header.reveal_element;
  p.d = block.header.d;
  p.signature = block.signature;
  p.retry = retry;
  const Digest salted = salted_prev_hash(prev_hash, retry);
  if (mode == ScoreMode::kSignature && block.signature) {
    p.score = score_from_signature_bytes(*block.signature);
  } else {
    p.score = score_from_reveal(salted, block.header.reveal_element);
  }
  return p;
}

Verdict genesis_validate(const Block& block) {
  const BlockHeader& h = block.header;
  const bool ok = h.version == kBlockVersion && h.height == 0 && h.prev_hash.is_zero() &&
                  h.reveal_element.is_zero() && h.d == 0 && h.tx_root.is_zero() &&
                  h.proposer_id.is_zero() && h.secrecy_capacity_milli == 0 &&
                  block.transactions.empty() && !block.signature;
  if (!ok) return Verdict::reject(RejectReason::kGenesis, 0, "not a genesis block");
  return Verdict::accept(0);
}

Verdict block_validate(const Block& block, const BlockHeader& prev,
                       const CommitmentRegistry& registry,
                       const Threshold& threshold, double c_ref,
                       const ValidationOptions& opts) {
  const BlockHeader& h = block.header;
  if (h.height == 0) return genesis_validate(block);
  if (h.version != kBlockVersion) {
    return Verdict::reject(RejectReason::kVersion, h.height,
                           "unsupported version " + std::to_string(h.version));
  }
  const Digest prev_hash = header_hash(prev);
  if (h.prev_hash != prev_hash) {
    return Verdict::reject(RejectReason::kLink, h.height, "prev_hash does not link to predecessor");
  }
  if (h.height != prev.height + 1) {
    return Verdict::reject(RejectReason::kHeight, h.height,
                           "height does not follow " + std::to_string(prev.height));
  }
  for (const auto& tx : block.transactions) {
    if (!tx.record.valid()) {
      return Verdict::reject(RejectReason::kRecord, h.height, "traffic record out of range");
    }
    if (compute_tx_id(tx) != tx.tx_id) {
      return Verdict::reject(RejectReason::kTxRoot, h.height, "tx_id does not match record");
    }
  }
  if (tx_root(block.transactions) != h.tx_root) {
    return Verdict::reject(RejectReason::kTxRoot, h.height, "tx_root mismatch");
  }
  if (Verdict v = candidacy_validate(block, prev_hash, registry, threshold, opts); !v) {
    return v;
  }
  if (h.secrecy_capacity_milli < capacity_to_milli(c_ref)) {
    return Verdict::reject(RejectReason::kSecrecyGate, h.height,
                           "secrecy capacity " + std::to_string(h.secrecy_capacity_milli) +
                               " milli-bits below reference");
  }
  if (h.timestamp_ms < prev.timestamp_ms) {
    return Verdict::reject(RejectReason::kTimestamp, h.height, "timestamp precedes predecessor");
  }
  return Verdict::accept(h.height);
}

Chain Chain::with_genesis(std::uint64_t timestamp_ms) {
  Chain c;
  c.blocks_.push_back(genesis_block(timestamp_ms));
  return c;
}

Digest Chain::head() const {
  return empty() ? Digest::zero() : header_hash(head_block().header);
}

Verdict Chain::append(Block block, const CommitmentRegistry& registry,
                      const Threshold& threshold, double c_ref,
                      const ValidationOptions& opts) {
  Verdict v = empty() ? genesis_validate(block)
                      : block_validate(block, head_block().header, registry,
                                       threshold, c_ref, opts);
  if (v.ok() && !empty() && block.header.height == 0) {
    v = Verdict::reject(RejectReason::kHeight, 0, "second genesis block");
  }
  if (v) blocks_.push_back(std::move(block));
  return v;
}

bool Chain::is_prefix_of(const Chain& other) const {
  if (size() > other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (header_hash(blocks_[i].header) != header_hash(other.blocks_[i].header)) {
      return false;
    }
  }
  return true;
}

Verdict chain_validate(const Chain& chain, const CommitmentRegistry& registry,
                       const Threshold& threshold, double c_ref,
                       const ValidationOptions& opts) {
  const auto& blocks = chain.blocks();
  if (blocks.empty()) return Verdict::accept(0);
  if (Verdict v = genesis_validate(blocks.front()); !v) return v;
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    Verdict v = block_validate(blocks[i], blocks[i - 1].header, registry,
                               threshold, c_ref, opts);
    if (v.ok() && blocks[i].header.height == 0) {
      v = Verdict::reject(RejectReason::kHeight, 0, "genesis block after height 0");
    }
    if (!v) {
      // Position in the chain, even if the stored height field is bogus.
      v.height = i;
      return v;
    }
  }
  return Verdict::accept(chain.height());
}

nlohmann::json to_json(const TrafficRecord& r) {
  return {{"vehicle_id", r.vehicle_id.hex()},
          {"latitude", r.latitude},
          {"longitude", r.longitude},
          {"speed", r.speed},
          {"heading", r.heading},
          {"timestamp_ms", r.timestamp_ms},
          {"link_id", r.link_id ? json(*r.link_id) : json(nullptr)}};
}

TrafficRecord traffic_record_from_json(const nlohmann::json& j) {
  expect_keys(j, 7, "traffic record");
  TrafficRecord r;
  r.vehicle_id = get_digest(j, "vehicle_id");
  r.latitude = get_f64(j, "latitude");
  r.longitude = get_f64(j, "longitude");
  r.speed = get_f64(j, "speed");
  r.heading = get_f64(j, "heading");
  r.timestamp_ms = get_u64(j, "timestamp_ms");
  const json& link = field(j, "link_id");
  if (link.is_string()) {
    r.link_id = link.get<std::string>();
  } else if (!link.is_null()) {
    throw ParseError("'link_id' must be a string or null");
  }
  return r;
}

nlohmann::json to_json(const BlockHeader& h) {
  return {{"version", h.version},
          {"prev_hash", h.prev_hash.hex()},
          {"timestamp_ms", h.timestamp_ms},
          {"reveal", h.reveal_element.hex()},
          {"d", h.d},
          {"height", h.height},
          {"tx_root", h.tx_root.hex()},
          {"proposer_id", h.proposer_id.hex()},
          {"secrecy_capacity_milli", h.secrecy_capacity_milli}};
}

BlockHeader header_from_json(const nlohmann::json& j) {
  expect_keys(j, 9, "header");
  BlockHeader h;
  h.version = get_u32(j, "version");
  h.prev_hash = get_digest(j, "prev_hash");
  h.timestamp_ms = get_u64(j, "timestamp_ms");
  h.reveal_element = get_digest(j, "reveal");
  h.d = get_u32(j, "d");
  h.height = get_u64(j, "height");
  h.tx_root = get_digest(j, "tx_root");
  h.proposer_id = get_digest(j, "proposer_id");
  h.secrecy_capacity_milli = get_u32(j, "secrecy_capacity_milli");
  return h;
}

nlohmann::json to_json(const Block& b) {
  json txs = json::array();
  for (const auto& tx : b.transactions) {
    txs.push_back({{"kind", kind_name(tx.kind)},
                   {"record", to_json(tx.record)},
                   {"tx_id", tx.tx_id.hex()}});
  }
  return {{"hash", header_hash(b.header).hex()},
          {"header", to_json(b.header)},
          {"signature", b.signature ? json(b.signature->hex()) : json(nullptr)},
          {"transactions", std::move(txs)}};
}

Block block_from_json(const nlohmann::json& j) {
  expect_keys(j, 4, "block");
  Block b;
  b.header = header_from_json(field(j, "header"));
  const json& sig = field(j, "signature");
  if (sig.is_string()) {
    b.signature = Signature{from_hex(sig.get<std::string>())};
  } else if (!sig.is_null()) {
    throw ParseError("'signature' must be hex or null");
  }
  const json& txs = field(j, "transactions");
  if (!txs.is_array()) throw ParseError("'transactions' must be an array");
  for (const auto& t : txs) {
    expect_keys(t, 3, "transaction");
    Transaction tx;
    tx.kind = kind_from_name(get_str(t, "kind"));
    tx.record = traffic_record_from_json(field(t, "record"));
    tx.tx_id = get_digest(t, "tx_id");
    b.transactions.push_back(std::move(tx));
  }
  if (get_digest(j, "hash") != header_hash(b.header)) {
    throw ParseError("stored block hash does not match header");
  }
  return b;
}

std::string block_to_line(const Block& block) { return to_json(block).dump(); }

Block block_from_line(std::string_view line, std::size_t line_no) {
  try {
    Block b = block_from_json(json::parse(line));
    // Only the canonical encoding is accepted, so no byte of a stored line
    // can change without the load failing.
    if (block_to_line(b) != line) throw ParseError("non-canonical block encoding");
    return b;
  } catch (const ParseError& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
}

void chain_save(const Chain& chain, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  for (const auto& b : chain.blocks()) {
    out << block_to_line(b) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Chain chain_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  Chain chain;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chain.push_unchecked(block_from_line(line, line_no));
  }
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for " + path.string());
  return chain;
}

}  // namespace pon
