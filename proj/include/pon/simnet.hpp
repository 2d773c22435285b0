#pragma once

// Deterministic discrete-event simulation of a vehicle cluster around one
// roadside anchor.
//
// Simulated time is integer milliseconds from 0; header timestamps are
// epoch_ms + simulated time. A height h runs in attempts r = 0..10:
//
//   S      = round_start(h) + L + r * attempt_len
//   S+base           every vehicle draws; eligible ones run the controller
//   S+base+ctrl      candidate broadcast (arrives after L)
//   W = S+window     reporters stop collecting, check qualification (t_q)
//   W+t_q            block check incl. secrecy recomputation (t_v)
//   W+t_q+t_v        vote sent to the master (arrives after L)
//   tally            master locks (t_s) and forwards the lock to the anchor
//   A                anchor appends and broadcasts the final block
//
// round_start(h) is the anchor append time of h-1 (0 for h = 1), so the
// confirmation time A - round_start(h) is exactly t_b + t_q + t_v + t_s with
// t_b = W - round_start(h) and t_s = A - (W + t_q + t_v).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "json.hpp"
#include "pon/consensus.hpp"
#include "pon/crypto_chain.hpp"
#include "pon/eligibility.hpp"
#include "pon/ledger.hpp"
#include "pon/secrecy.hpp"

namespace pon {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

struct VehicleSpec {
  std::uint64_t seed = 0;  // key derivation input
  Vec2 position;
  double speed = 0.0;    // m/s
  double heading = 0.0;  // degrees, 0 = +x, 90 = +y
  RadioParams radio;
  ControlBounds bounds;
};

struct EavesdropperSpec {
  Vec2 position;
  double speed = 0.0;
  double heading = 0.0;
  EavesdropperRadio radio;
  // Shadow a vehicle at a fixed offset instead of moving on its own.
  std::optional<std::size_t> follow;
  Vec2 offset;
};

struct TimingSpec {
  std::uint64_t t_q_ms = 2;
  std::uint64_t t_v_ms = 3;
  std::uint64_t t_s_ms = 5;
  std::uint64_t base_generation_ms = 100;
  std::uint64_t iter_cost_ms = 2;  // default for vehicle bounds
};

struct Scenario {
  std::uint64_t seed = 0;
  std::uint64_t heights = 1;
  std::optional<std::uint32_t> chain_length;  // defaults to heights
  std::uint64_t epoch_ms = 1700000000000ULL;
  double origin_lat = 37.5665;
  double origin_lon = 126.978;
  ChannelEnv env;
  Vec2 anchor;
  Threshold threshold = Threshold::from_exponent(256);
  double c_ref = 1.0;
  double quorum_ratio = 2.0 / 3.0;
  DistanceRule distance_rule = DistanceRule::kMin;
  ScoreMode score_mode = ScoreMode::kReveal;
  bool sign_candidates = true;
  std::uint64_t link_latency_ms = 1;
  double drop_rate = 0.0;  // Candidate and Vote messages only
  TimingSpec timing;
  PowModel pow_compare{6, 600000};
  std::vector<VehicleSpec> vehicles;
  std::vector<EavesdropperSpec> eavesdroppers;

  // Throws InvalidScenario(field).
  void validate() const;
  std::uint32_t nonce_chain_length() const {
    return chain_length ? *chain_length : static_cast<std::uint32_t>(heights);
  }
};

// Missing optional fields take the defaults above. "fleet": {"count",
// "area": [w, h], "speed": [lo, hi]} generates seeded vehicles around the
// anchor. Throws ParseError or InvalidScenario(field).
Scenario scenario_from_json(const nlohmann::json& j);
Scenario scenario_load(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& s);

nlohmann::json to_json(const RadioParams& r);
nlohmann::json to_json(const ControlBounds& b);

// Uniform [0, 1) from the top 53 bits; independent of the standard library's
// distribution implementations.
double unit_uniform(std::uint64_t bits);

struct EntityId {
  enum class Kind { kVehicle, kEavesdropper, kAnchor };
  Kind kind = Kind::kVehicle;
  std::size_t index = 0;

  static EntityId vehicle(std::size_t i) { return {Kind::kVehicle, i}; }
  static EntityId eavesdropper(std::size_t i) { return {Kind::kEavesdropper, i}; }
  static EntityId anchor() { return {Kind::kAnchor, 0}; }
  bool operator==(const EntityId&) const = default;
};

// Positions follow straight constant-velocity tracks, so the state at any
// time is a closed-form function of the scenario.
class World {
 public:
  explicit World(const Scenario& scenario);

  std::uint64_t clock_ms() const { return clock_ms_; }
  // Throws Error(kInvalidArgument) for dt_ms == 0.
  void step(std::uint64_t dt_ms);

  std::size_t vehicle_count() const { return scenario_->vehicles.size(); }
  std::size_t eavesdropper_count() const { return scenario_->eavesdroppers.size(); }
  const ChannelEnv& env() const { return scenario_->env; }

  Vec2 position(EntityId e) const { return position_at(e, clock_ms_); }
  Vec2 position_at(EntityId e, std::uint64_t t_ms) const;
  double speed(EntityId e) const;
  double heading(EntityId e) const;
  const EavesdropperRadio& eavesdropper_radio(std::size_t i) const;

  const RadioParams& radio(std::size_t vehicle) const { return radios_.at(vehicle); }
  void set_radio(std::size_t vehicle, const RadioParams& r) { radios_.at(vehicle) = r; }

 private:
  const Scenario* scenario_;
  std::uint64_t clock_ms_ = 0;
  std::vector<RadioParams> radios_;
};

// Distances below this are clamped so coincident entities stay finite.
inline constexpr double kMinDistanceM = 0.1;

// SNR of a transmission from vehicle `a` to entity `b` with a's current
// radio. An eavesdropper receiver uses its own gain and noise figure.
double channel_oracle(const World& world, EntityId a, EntityId b);
// Strongest eavesdropper SNR from the vehicle; -inf without eavesdroppers.
double nearest_eavesdropper_snr(const World& world, std::size_t vehicle);

template <typename Payload>
class EventQueue {
 public:
  struct Item {
    std::uint64_t time = 0;
    std::uint64_t seq = 0;
    Payload payload;
  };

  void push(std::uint64_t time, Payload p) { heap_.push(Item{time, next_seq_++, std::move(p)}); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const Item& top() const { return heap_.top(); }
  Item pop() {
    Item it = heap_.top();
    heap_.pop();
    return it;
  }

 private:
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

struct HeightMetrics {
  std::uint64_t height = 0;
  std::uint32_t retries = 0;  // attempts before the finalized one
  std::uint64_t round_start_ms = 0;
  std::uint64_t append_ms = 0;
  TimingModel timing;
  std::uint64_t confirmation_ms = 0;
  std::size_t eligible = 0;  // eligible draws in the finalized attempt
  std::size_t candidates = 0;
  std::size_t votes = 0;
  std::size_t cluster_size = 0;  // vehicles with capacity >= c_ref to the anchor
  std::size_t proposer_index = 0;
  Digest proposer_id;
  std::uint64_t timestamp_ms = 0;
  double claimed_capacity = 0.0;
  double oracle_capacity = 0.0;
};

struct Metrics {
  std::vector<HeightMetrics> heights;
  std::uint64_t fork_count = 0;       // heights with more than one finalized block
  std::uint64_t gate_rejections = 0;  // eligible draws discarded by the discriminator
  std::uint64_t lottery_misses = 0;   // attempts in which nobody was eligible
  std::uint64_t failed_attempts = 0;
  std::uint64_t control_iters = 0;
  std::uint64_t energy_ms = 0;  // control_iters x iter_cost_ms, summed per vehicle
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_dropped = 0;
  std::uint64_t rejected_finals = 0;  // final blocks a vehicle refused to append
  std::uint64_t gate_violations = 0;  // post-run audit
  std::optional<std::uint64_t> stalled_at;
  PowModel pow_compare;
};

// Summary record: means and maxima of the decomposition plus counters.
nlohmann::json metrics_report(const Metrics& metrics);
// Summary plus the per-height table.
nlohmann::json to_json(const Metrics& metrics);

struct RunOutcome {
  Chain chain;  // anchor's chain
  Metrics metrics;
  std::vector<Chain> node_chains;
  CommitmentRegistry registry;
  std::vector<Digest> node_ids;
  // Radio history per vehicle: (from_ms, radio) in simulated time.
  std::vector<std::vector<std::pair<std::uint64_t, RadioParams>>> radio_history;

  bool stalled() const { return metrics.stalled_at.has_value(); }
};

// Key material derived from the scenario seed and the vehicle seed.
Digest vehicle_key_seed(std::uint64_t scenario_seed, std::uint64_t vehicle_seed);
Digest vehicle_master_key(std::uint64_t scenario_seed, std::uint64_t vehicle_seed);

// Oracle backed by the scenario's trajectories and a recorded radio history.
class ScenarioOracle : public ChannelOracle {
 public:
  ScenarioOracle(const Scenario& scenario, std::vector<Digest> node_ids,
                 const std::vector<std::vector<std::pair<std::uint64_t, RadioParams>>>* history);

  const ChannelEnv& env() const override { return scenario_->env; }
  LinkGeometry geometry(const Digest& node, std::uint64_t timestamp_ms) const override;
  RadioParams radio(const Digest& node, std::uint64_t timestamp_ms) const override;

  std::optional<std::size_t> index_of(const Digest& node) const;

 private:
  std::uint64_t sim_time(std::uint64_t timestamp_ms) const;

  const Scenario* scenario_;
  World world_;
  std::vector<Digest> node_ids_;
  const std::vector<std::vector<std::pair<std::uint64_t, RadioParams>>>* history_;
};

// Runs the scenario to completion or until a height stalls after
// kMaxLotteryRetries retries. Pure function of the scenario.
RunOutcome run(const Scenario& scenario);

// Re-validates the anchor chain and recomputes every header's capacity with
// the recorded trajectory. Returns the number of violating heights.
std::uint64_t gate_audit(const Scenario& scenario, const RunOutcome& outcome);

}  // namespace pon
