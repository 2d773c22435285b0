#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>

#include "pon/error.hpp"
#include "pon/simnet.hpp"

namespace pon {

namespace {

constexpr double kMetersPerDegree = 111320.0;

double quantize(double v, double unit) { return std::round(v / unit) * unit; }

Vec2 advance(Vec2 p, double speed, double heading_deg, std::uint64_t t_ms) {
  const double rad = heading_deg * std::numbers::pi / 180.0;
  const double s = speed * static_cast<double>(t_ms) / 1000.0;
  return {p.x + s * std::cos(rad), p.y + s * std::sin(rad)};
}

Digest seeded_digest(std::string_view tag, std::uint64_t a, std::uint64_t b) {
  Bytes buf;
  append(buf, as_bytes(tag));
  append_u64_be(buf, a);
  append_u64_be(buf, b);
  return hash_bytes(buf);
}

// Strongest eavesdropper as seen from vehicle `i` at time t. The transmit side
// of the budget is common to all eavesdroppers, so the choice does not depend
// on the vehicle's radio.
LinkGeometry geometry_at(const World& world, std::size_t i, std::uint64_t t) {
  LinkGeometry g;
  const Vec2 p = world.position_at(EntityId::vehicle(i), t);
  g.main_distance_m =
      std::max(kMinDistanceM, distance(p, world.position_at(EntityId::anchor(), t)));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < world.eavesdropper_count(); ++k) {
    const Vec2 q = world.position_at(EntityId::eavesdropper(k), t);
    const double dist = std::max(kMinDistanceM, distance(p, q));
    const EavesdropperRadio& er = world.eavesdropper_radio(k);
    const double rel = er.rx_gain_db - er.noise_figure_db - path_loss_db(world.env(), dist);
    if (rel > best) {
      best = rel;
      g.eve_distance_m = dist;
      g.eve = er;
    }
  }
  return g;
}

enum class Ev {
  kAttemptStart,
  kPropose,
  kCandidate,
  kWindowClose,
  kQualDone,
  kVerifyDone,
  kVote,
  kTallyDeadline,
  kLock,
  kFinal,
  kRetryTimer,
  kAnchorAttempt,
};

// Receivers: vehicles by index, the anchor as kAnchorNode.
constexpr std::size_t kAnchorNode = static_cast<std::size_t>(-1);

struct Event {
  Ev kind;
  std::size_t node = 0;
  std::uint64_t height = 0;
  std::uint32_t retry = 0;
  std::shared_ptr<const Message> msg;
};

struct Attempt {
  std::uint64_t start = 0;
  std::size_t eligible = 0;
  std::size_t candidates = 0;
  std::size_t votes = 0;
  std::size_t cluster = 0;
  std::uint64_t window_close = 0;
  std::uint64_t t_q = 0;
  std::uint64_t t_v = 0;
  std::uint64_t vote_sent = 0;
  bool finalized = false;
};

struct Vehicle {
  NodeState node;
  std::uint32_t generation = 0;
  std::uint64_t height = 0;  // height being worked on
  std::uint32_t retry = 0;
  bool stopped = false;
  std::vector<Block> inbox;
  std::vector<Block> qualified;
};

struct Tally {
  std::vector<Vote> votes;
  bool done = false;
};

class Simulation {
 public:
  explicit Simulation(const Scenario& s)
      : s_(s),
        world_(s),
        oracle_(s, {}, &out_.radio_history),
        drop_rng_(s.seed ^ 0x64726f70ULL),
        anchor_(Chain::with_genesis(s.epoch_ms), AnchorPolicy{}) {
    const std::size_t n = s.vehicles.size();
    out_.radio_history.resize(n);
    window_ms_ = s.timing.base_generation_ms + s.link_latency_ms + 1;
    std::uint64_t max_ctrl = 0;
    for (const auto& v : s.vehicles) {
      max_ctrl = std::max<std::uint64_t>(
          max_ctrl, static_cast<std::uint64_t>(v.bounds.max_iters) * v.bounds.iter_cost_ms);
    }
    window_ms_ += max_ctrl;
    attempt_ms_ = window_ms_ + s.timing.t_q_ms + s.timing.t_v_ms + s.timing.t_s_ms +
                  3 * s.link_latency_ms + 2;

    const std::uint32_t m = s.nonce_chain_length();
    std::set<Digest> seen;
    for (std::size_t i = 0; i < n; ++i) {
      const VehicleSpec& spec = s.vehicles[i];
      const Keypair kp = keypair_from_seed(vehicle_key_seed(s.seed, spec.seed));
      if (!seen.insert(kp.node_id).second) {
        throw InvalidScenario("vehicles", "duplicate vehicle seed");
      }
      const Digest master = vehicle_master_key(s.seed, spec.seed);
      Vehicle v{NodeState{kp, master, NonceChain::generate(chain_master_key(master, 0), m, 0),
                          Chain::with_genesis(s.epoch_ms), spec.radio, spec.bounds, {}},
                0, 0, 0, false, {}, {}};
      out_.registry.register_node(announce(v.node.keypair, v.node.nonce_chain));
      out_.node_ids.push_back(v.node.node_id());
      out_.radio_history[i].emplace_back(0, spec.radio);
      vehicles_.push_back(std::move(v));
    }
    oracle_ = ScenarioOracle(s, out_.node_ids, &out_.radio_history);

    AnchorPolicy policy;
    policy.threshold = s.threshold;
    policy.c_ref = s.c_ref;
    policy.validation.mode = s.score_mode;
    anchor_ = Anchor(Chain::with_genesis(s.epoch_ms), policy);
    anchor_id_ = seeded_digest("pon-anchor", s.seed, 0);
    config_.threshold = s.threshold;
    config_.c_ref = s.c_ref;
    config_.mode = s.score_mode;
    config_.sign = s.sign_candidates;
  }

  RunOutcome run() {
    out_.metrics.pow_compare = s_.pow_compare;
    round_start_ = 0;
    schedule(s_.link_latency_ms, {Ev::kAnchorAttempt, kAnchorNode, 1, 0, nullptr});
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      schedule(s_.link_latency_ms, {Ev::kAttemptStart, i, 1, 0, nullptr});
    }
    while (!queue_.empty() && !finished_) {
      auto item = queue_.pop();
      now_ = item.time;
      dispatch(item.payload);
    }
    finish();
    return std::move(out_);
  }

 private:
  void schedule(std::uint64_t at, Event e) { queue_.push(at, std::move(e)); }

  // Candidate and Vote messages may be dropped; self-delivery is immediate.
  void send(std::size_t from, std::size_t to, Ev kind, std::uint64_t height,
            std::uint32_t retry, std::shared_ptr<const Message> msg) {
    ++out_.metrics.messages_sent;
    if ((kind == Ev::kCandidate || kind == Ev::kVote) && s_.drop_rate > 0.0 && from != to &&
        unit_uniform(drop_rng_()) < s_.drop_rate) {
      ++out_.metrics.messages_dropped;
      return;
    }
    const std::uint64_t delay = from == to ? 0 : s_.link_latency_ms;
    schedule(now_ + delay, {kind, to, height, retry, std::move(msg)});
  }

  Attempt& attempt(std::uint64_t h, std::uint32_t r) { return attempts_[{h, r}]; }

  // Vehicles learn the master from their own head block: the proposer of
  // height h-1, or the anchor at height 1.
  std::size_t master_of(std::size_t node, std::uint64_t h) const {
    const Block& head = vehicles_[node].node.chain.head_block();
    if (h == 1 || head.header.height + 1 != h) return kAnchorNode;
    auto idx = oracle_.index_of(head.header.proposer_id);
    return idx ? *idx : kAnchorNode;
  }

  ValidationOptions opts(std::uint32_t retry) const {
    ValidationOptions o;
    o.mode = s_.score_mode;
    o.retry = retry;
    return o;
  }

  TrafficRecord traffic_record(std::size_t i, std::uint64_t t) const {
    const Vec2 p = world_.position_at(EntityId::vehicle(i), t);
    const double lat0 = s_.origin_lat * std::numbers::pi / 180.0;
    TrafficRecord r;
    r.vehicle_id = out_.node_ids[i];
    r.latitude = quantize(s_.origin_lat + p.y / kMetersPerDegree, 1e-7);
    r.longitude =
        quantize(s_.origin_lon + p.x / (kMetersPerDegree * std::cos(lat0)), 1e-7);
    r.speed = quantize(s_.vehicles[i].speed, 1e-3);
    double h = quantize(std::fmod(s_.vehicles[i].heading, 360.0), 1e-2);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    r.heading = h;
    r.timestamp_ms = s_.epoch_ms + t;
    return r;
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case Ev::kAttemptStart: on_attempt_start(e); break;
      case Ev::kPropose: on_propose(e); break;
      case Ev::kCandidate: on_candidate(e); break;
      case Ev::kWindowClose: on_window_close(e); break;
      case Ev::kQualDone: on_qual_done(e); break;
      case Ev::kVerifyDone: on_verify_done(e); break;
      case Ev::kVote: on_vote(e); break;
      case Ev::kTallyDeadline: tally(e.height, e.retry, e.node); break;
      case Ev::kLock: on_lock(e); break;
      case Ev::kFinal: on_final(e); break;
      case Ev::kRetryTimer: on_retry_timer(e); break;
      case Ev::kAnchorAttempt: on_anchor_attempt(e); break;
    }
  }

  bool current(const Vehicle& v, const Event& e) const {
    return !v.stopped && v.height == e.height && v.retry == e.retry;
  }

  void on_attempt_start(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    v.height = e.height;
    v.retry = e.retry;
    v.inbox.clear();
    v.qualified.clear();
    v.node.add_role(e.height, Role::kElite);
    Attempt& a = attempt(e.height, e.retry);
    a.start = now_;
    if (e.retry == 0) {
      const LinkGeometry g = geometry_at(world_, e.node, now_);
      const SecrecyReport rep = evaluate_secrecy(v.node.radio, s_.env, g.main_distance_m,
                                                 g.eve_distance_m, g.eve);
      if (discriminate(rep.capacity_bits, s_.c_ref)) ++a.cluster;
    }
    schedule(now_ + s_.timing.base_generation_ms, {Ev::kPropose, e.node, e.height, e.retry, nullptr});
    schedule(now_ + window_ms_, {Ev::kWindowClose, e.node, e.height, e.retry, nullptr});
    schedule(now_ + attempt_ms_, {Ev::kRetryTimer, e.node, e.height, e.retry, nullptr});
    if (master_of(e.node, e.height) == e.node) schedule_deadline(e.node, e.height, e.retry);
  }

  void schedule_deadline(std::size_t node, std::uint64_t h, std::uint32_t r) {
    tallies_.erase({h, r});
    const std::uint64_t at = now_ + window_ms_ + s_.timing.t_q_ms + s_.timing.t_v_ms +
                             s_.link_latency_ms + 1;
    schedule(at, {Ev::kTallyDeadline, node, h, r, nullptr});
  }

  void on_propose(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    if (!v.node.nonce_chain.covers(e.height)) {
      // Registration lapsed; the node cannot take part in this height.
      return;
    }
    const std::uint64_t ts = s_.epoch_ms + now_;
    std::vector<Transaction> txs{make_transaction(TxKind::kBsm, traffic_record(e.node, now_))};
    const RadioParams before = v.node.radio;
    Proposal p = round_propose(v.node, v.node.chain.head_block().header, std::move(txs),
                               config_, oracle_, ts, e.retry);
    if (p.status == ProposeStatus::kIneligible) return;

    Attempt& a = attempt(e.height, e.retry);
    ++a.eligible;
    out_.metrics.control_iters += p.control.iters;
    out_.metrics.energy_ms += p.control_ms;
    if (!(v.node.radio == before)) out_.radio_history[e.node].emplace_back(now_, v.node.radio);
    world_.set_radio(e.node, v.node.radio);
    if (p.status == ProposeStatus::kGateRejected) {
      ++out_.metrics.gate_rejections;
      return;
    }
    ++a.candidates;
    auto msg = std::make_shared<const Message>(CandidateMsg{std::move(*p.block), e.retry});
    const std::uint64_t send_at = now_ + p.control_ms;
    const std::uint64_t saved = now_;
    now_ = send_at;
    for (std::size_t j = 0; j < vehicles_.size(); ++j) {
      send(e.node, j, Ev::kCandidate, e.height, e.retry, msg);
    }
    send(e.node, kAnchorNode, Ev::kCandidate, e.height, e.retry, msg);
    now_ = saved;
  }

  void on_candidate(const Event& e) {
    const auto& c = std::get<CandidateMsg>(*e.msg);
    if (e.node == kAnchorNode) {
      anchor_inbox_[{e.height, e.retry}].push_back(c.block);
      return;
    }
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    v.inbox.push_back(c.block);
  }

  void on_window_close(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    Attempt& a = attempt(e.height, e.retry);
    a.window_close = now_;
    if (v.inbox.empty()) return;
    schedule(now_ + s_.timing.t_q_ms, {Ev::kQualDone, e.node, e.height, e.retry, nullptr});
  }

  void on_qual_done(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    const BlockHeader& prev = v.node.chain.head_block().header;
    for (const Block& b : v.inbox) {
      if (verify_qualification(b, prev, out_.registry, s_.threshold, opts(e.retry))) {
        v.qualified.push_back(b);
      }
    }
    attempt(e.height, e.retry).t_q = s_.timing.t_q_ms;
    schedule(now_ + s_.timing.t_v_ms, {Ev::kVerifyDone, e.node, e.height, e.retry, nullptr});
  }

  void on_verify_done(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    const BlockHeader& prev = v.node.chain.head_block().header;
    std::vector<VerifiedCandidate> verified;
    for (const Block& b : v.qualified) {
      if (!verify_candidate(b, prev, out_.registry, s_.threshold, s_.c_ref, oracle_,
                            opts(e.retry))) {
        continue;
      }
      const CandidateProof proof = embedded_proof(b, header_hash(prev), e.retry, s_.score_mode);
      verified.push_back({b, header_hash(b.header), proof.score, e.retry});
    }
    Attempt& a = attempt(e.height, e.retry);
    a.t_v = s_.timing.t_v_ms;
    a.vote_sent = now_;
    auto choice = vote(v.node.node_id(), verified, s_.distance_rule);
    if (!choice) return;
    v.node.add_role(e.height, Role::kReporter);
    send(e.node, master_of(e.node, e.height), Ev::kVote, e.height, e.retry,
         std::make_shared<const Message>(VoteMsg{*choice}));
  }

  void on_vote(const Event& e) {
    Tally& t = tallies_[{e.height, e.retry}];
    if (t.done) return;
    t.votes.push_back(std::get<VoteMsg>(*e.msg).vote);
    if (t.votes.size() >= vehicles_.size()) tally(e.height, e.retry, e.node);
  }

  void tally(std::uint64_t h, std::uint32_t r, std::size_t master) {
    Tally& t = tallies_[{h, r}];
    if (t.done) return;
    t.done = true;
    attempt(h, r).votes = t.votes.size();
    if (t.votes.empty()) return;
    const Digest master_id = master == kAnchorNode ? anchor_id_ : out_.node_ids[master];
    auto cert = tally_and_lock(master_id, t.votes, vehicles_.size(), s_.quorum_ratio,
                               s_.distance_rule);
    if (!cert) return;
    const std::uint64_t saved = now_;
    now_ += s_.timing.t_s_ms;
    send(master, kAnchorNode, Ev::kLock, h, r, std::make_shared<const Message>(LockMsg{*cert}));
    now_ = saved;
  }

  void on_lock(const Event& e) {
    const LockCertificate& cert = std::get<LockMsg>(*e.msg).certificate;
    const auto& inbox = anchor_inbox_[{e.height, e.retry}];
    auto it = std::find_if(inbox.begin(), inbox.end(), [&](const Block& b) {
      return header_hash(b.header) == cert.candidate_hash;
    });
    if (it == inbox.end()) return;
    try {
      anchor_.finalize(cert, *it, out_.registry);
    } catch (const Error&) {
      return;
    }
    finalized_[e.height].insert(cert.candidate_hash);
    record_height(e.height, e.retry, *it);
    auto msg = std::make_shared<const Message>(FinalMsg{*it, cert});
    for (std::size_t j = 0; j < vehicles_.size(); ++j) {
      send(kAnchorNode, j, Ev::kFinal, e.height, e.retry, msg);
    }
    round_start_ = now_;
    if (e.height < s_.heights) {
      schedule(now_ + s_.link_latency_ms,
               {Ev::kAnchorAttempt, kAnchorNode, e.height + 1, 0, nullptr});
    }
  }

  void record_height(std::uint64_t h, std::uint32_t r, const Block& b) {
    Attempt& a = attempt(h, r);
    a.finalized = true;
    HeightMetrics m;
    m.height = h;
    m.retries = r;
    m.round_start_ms = round_start_;
    m.append_ms = now_;
    m.timing.t_b_ms = a.window_close - round_start_;
    m.timing.t_q_ms = a.t_q;
    m.timing.t_v_ms = a.t_v;
    m.timing.t_s_ms = now_ - a.vote_sent;
    m.confirmation_ms = now_ - round_start_;
    m.eligible = a.eligible;
    m.candidates = a.candidates;
    m.votes = a.votes;
    m.cluster_size = attempt(h, 0).cluster;
    m.proposer_id = b.header.proposer_id;
    m.proposer_index = oracle_.index_of(b.header.proposer_id).value_or(0);
    m.timestamp_ms = b.header.timestamp_ms;
    m.claimed_capacity = b.header.secrecy_capacity_milli / 1000.0;
    m.oracle_capacity = oracle_.secrecy(b.header.proposer_id, b.header.timestamp_ms).capacity_bits;
    out_.metrics.heights.push_back(m);
  }

  void on_final(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (v.stopped) return;
    const auto& f = std::get<FinalMsg>(*e.msg);
    const Verdict verdict =
        v.node.chain.append(f.block, out_.registry, s_.threshold, s_.c_ref,
                            opts(f.certificate.retry));
    if (!verdict) ++out_.metrics.rejected_finals;
    if (f.block.header.proposer_id == v.node.node_id()) {
      v.node.add_role(e.height, Role::kProposer);
    }
    if (e.height == v.node.nonce_chain.last_usable_height() && e.height < s_.heights) {
      rollover(v, e.height);
    }
    v.height = e.height;  // invalidates timers of this height
    v.retry = kMaxLotteryRetries + 1;
    if (e.height < s_.heights) {
      schedule(now_, {Ev::kAttemptStart, e.node, e.height + 1, 0, nullptr});
    }
  }

  void rollover(Vehicle& v, std::uint64_t h) {
    ++v.generation;
    const std::uint32_t m = s_.nonce_chain_length();
    v.node.nonce_chain =
        NonceChain::generate(chain_master_key(v.node.master_key, v.generation), m, h);
    out_.registry.register_node(announce(v.node.keypair, v.node.nonce_chain));
  }

  void on_retry_timer(const Event& e) {
    Vehicle& v = vehicles_[e.node];
    if (!current(v, e)) return;
    if (e.retry + 1 > kMaxLotteryRetries) {
      v.stopped = true;
      return;
    }
    schedule(now_, {Ev::kAttemptStart, e.node, e.height, e.retry + 1, nullptr});
  }

  void on_anchor_attempt(const Event& e) {
    if (anchor_.chain().height() >= e.height) return;
    if (e.retry > kMaxLotteryRetries) {
      out_.metrics.stalled_at = e.height;
      finished_ = true;
      return;
    }
    if (e.height == 1) schedule_deadline(kAnchorNode, e.height, e.retry);
    schedule(now_ + attempt_ms_, {Ev::kAnchorAttempt, kAnchorNode, e.height, e.retry + 1, nullptr});
  }

  void finish() {
    Metrics& m = out_.metrics;
    for (const auto& [key, a] : attempts_) {
      if (a.eligible == 0) ++m.lottery_misses;
      if (!a.finalized) ++m.failed_attempts;
    }
    // A fork is a height where two different blocks were finalized or where
    // some vehicle holds a block the anchor does not. A certificate the
    // anchor never honored (its candidate was lost) finalizes nothing.
    std::set<std::uint64_t> forked;
    for (const auto& [h, hashes] : finalized_) {
      if (hashes.size() > 1) forked.insert(h);
    }
    const auto& canon = anchor_.chain().blocks();
    for (auto& v : vehicles_) {
      const auto& blocks = v.node.chain.blocks();
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i >= canon.size() || header_hash(blocks[i].header) != header_hash(canon[i].header)) {
          forked.insert(blocks[i].header.height);
        }
      }
      out_.node_chains.push_back(v.node.chain);
    }
    m.fork_count = forked.size();
    out_.chain = anchor_.chain();
    m.gate_violations = gate_audit(s_, out_);
  }

  const Scenario& s_;
  World world_;
  RunOutcome out_;
  ScenarioOracle oracle_;
  std::mt19937_64 drop_rng_;
  Anchor anchor_;
  Digest anchor_id_;
  ProposalConfig config_;
  std::vector<Vehicle> vehicles_;
  EventQueue<Event> queue_;
  std::uint64_t now_ = 0;
  std::uint64_t round_start_ = 0;
  std::uint64_t window_ms_ = 0;
  std::uint64_t attempt_ms_ = 0;
  bool finished_ = false;
  std::map<std::pair<std::uint64_t, std::uint32_t>, Attempt> attempts_;
  std::map<std::pair<std::uint64_t, std::uint32_t>, Tally> tallies_;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::vector<Block>> anchor_inbox_;
  std::map<std::uint64_t, std::set<Digest>> finalized_;
};

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

World::World(const Scenario& scenario) : scenario_(&scenario) {
  for (const auto& v : scenario.vehicles) radios_.push_back(v.radio);
}

void World::step(std::uint64_t dt_ms) {
  if (dt_ms == 0) throw Error(ErrorCode::kInvalidArgument, "step needs dt_ms > 0");
  clock_ms_ += dt_ms;
}

Vec2 World::position_at(EntityId e, std::uint64_t t_ms) const {
  switch (e.kind) {
    case EntityId::Kind::kAnchor:
      return scenario_->anchor;
    case EntityId::Kind::kVehicle: {
      const VehicleSpec& v = scenario_->vehicles.at(e.index);
      return advance(v.position, v.speed, v.heading, t_ms);
    }
    case EntityId::Kind::kEavesdropper: {
      const EavesdropperSpec& ev = scenario_->eavesdroppers.at(e.index);
      if (ev.follow) {
        const Vec2 p = position_at(EntityId::vehicle(*ev.follow), t_ms);
        return {p.x + ev.offset.x, p.y + ev.offset.y};
      }
      return advance(ev.position, ev.speed, ev.heading, t_ms);
    }
  }
  return {};
}

double World::speed(EntityId e) const {
  switch (e.kind) {
    case EntityId::Kind::kAnchor: return 0.0;
    case EntityId::Kind::kVehicle: return scenario_->vehicles.at(e.index).speed;
    case EntityId::Kind::kEavesdropper: {
      const auto& ev = scenario_->eavesdroppers.at(e.index);
      return ev.follow ? scenario_->vehicles.at(*ev.follow).speed : ev.speed;
    }
  }
  return 0.0;
}

double World::heading(EntityId e) const {
  switch (e.kind) {
    case EntityId::Kind::kAnchor: return 0.0;
    case EntityId::Kind::kVehicle: return scenario_->vehicles.at(e.index).heading;
    case EntityId::Kind::kEavesdropper: {
      const auto& ev = scenario_->eavesdroppers.at(e.index);
      return ev.follow ? scenario_->vehicles.at(*ev.follow).heading : ev.heading;
    }
  }
  return 0.0;
}

const EavesdropperRadio& World::eavesdropper_radio(std::size_t i) const {
  return scenario_->eavesdroppers.at(i).radio;
}

double channel_oracle(const World& world, EntityId a, EntityId b) {
  if (a.kind != EntityId::Kind::kVehicle) {
    throw Error(ErrorCode::kInvalidArgument, "transmitter must be a vehicle");
  }
  if (a == b) throw Error(ErrorCode::kInvalidArgument, "transmitter and receiver coincide");
  const double d = std::max(kMinDistanceM, distance(world.position(a), world.position(b)));
  const RadioParams& radio = world.radio(a.index);
  if (b.kind == EntityId::Kind::kEavesdropper) {
    return eavesdropper_snr_db(radio, world.eavesdropper_radio(b.index), world.env(), d);
  }
  return snr_db(radio, world.env(), d);
}

double nearest_eavesdropper_snr(const World& world, std::size_t vehicle) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < world.eavesdropper_count(); ++k) {
    best = std::max(best, channel_oracle(world, EntityId::vehicle(vehicle),
                                         EntityId::eavesdropper(k)));
  }
  return best;
}

Digest vehicle_key_seed(std::uint64_t scenario_seed, std::uint64_t vehicle_seed) {
  return seeded_digest("pon-key", scenario_seed, vehicle_seed);
}

Digest vehicle_master_key(std::uint64_t scenario_seed, std::uint64_t vehicle_seed) {
  return seeded_digest("pon-master", scenario_seed, vehicle_seed);
}

ScenarioOracle::ScenarioOracle(
    const Scenario& scenario, std::vector<Digest> node_ids,
    const std::vector<std::vector<std::pair<std::uint64_t, RadioParams>>>* history)
    : scenario_(&scenario), world_(scenario), node_ids_(std::move(node_ids)), history_(history) {}

std::optional<std::size_t> ScenarioOracle::index_of(const Digest& node) const {
  auto it = std::find(node_ids_.begin(), node_ids_.end(), node);
  if (it == node_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids_.begin());
}

std::uint64_t ScenarioOracle::sim_time(std::uint64_t timestamp_ms) const {
  return timestamp_ms > scenario_->epoch_ms ? timestamp_ms - scenario_->epoch_ms : 0;
}

LinkGeometry ScenarioOracle::geometry(const Digest& node, std::uint64_t timestamp_ms) const {
  auto idx = index_of(node);
  if (!idx) throw Error(ErrorCode::kNotRegistered, "unknown vehicle " + node.hex());
  return geometry_at(world_, *idx, sim_time(timestamp_ms));
}

RadioParams ScenarioOracle::radio(const Digest& node, std::uint64_t timestamp_ms) const {
  auto idx = index_of(node);
  if (!idx) throw Error(ErrorCode::kNotRegistered, "unknown vehicle " + node.hex());
  const std::uint64_t t = sim_time(timestamp_ms);
  RadioParams r = scenario_->vehicles[*idx].radio;
  if (history_ != nullptr && *idx < history_->size()) {
    for (const auto& [from, params] : (*history_)[*idx]) {
      if (from > t) break;
      r = params;
    }
  }
  return r;
}

RunOutcome run(const Scenario& scenario) {
  scenario.validate();
  Simulation sim(scenario);
  return sim.run();
}

std::uint64_t gate_audit(const Scenario& scenario, const RunOutcome& outcome) {
  ValidationOptions opts;
  opts.mode = scenario.score_mode;
  std::uint64_t violations = 0;
  if (!outcome.chain.empty() &&
      !chain_validate(outcome.chain, outcome.registry, scenario.threshold, scenario.c_ref, opts)) {
    ++violations;
  }
  const ScenarioOracle oracle(scenario, outcome.node_ids, &outcome.radio_history);
  for (const Block& b : outcome.chain.blocks()) {
    if (b.is_genesis()) continue;
    const double claimed = b.header.secrecy_capacity_milli / 1000.0;
    const double actual =
        oracle.secrecy(b.header.proposer_id, b.header.timestamp_ms).capacity_bits;
    if (actual + kCapacityTolerance < scenario.c_ref || claimed > actual + kCapacityTolerance) {
      ++violations;
    }
  }
  return violations;
}

}  // namespace pon
