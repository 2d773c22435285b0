#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "pon/error.hpp"
#include "pon/simnet.hpp"

namespace pon {

namespace {

using nlohmann::json;

[[noreturn]] void bad_type(const std::string& field, const char* want) {
  throw InvalidScenario(field, field + ": expected " + want);
}

double get_double(const json& j, const std::string& field) {
  if (!j.is_number()) bad_type(field, "a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad_type(field, "a finite number");
  return v;
}

std::uint64_t get_u64(const json& j, const std::string& field) {
  // Values built in code arrive as signed integers.
  if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (!j.is_number_unsigned()) bad_type(field, "a non-negative integer");
  return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) bad_type(field, "a boolean");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) bad_type(field, "a string");
  return j.get<std::string>();
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void expect_object(const json& j, const std::string& field) {
  if (!j.is_object()) bad_type(field, "an object");
}

void read_double(const json& obj, const char* key, double& out, const std::string& field) {
  if (const json* v = find(obj, key)) out = get_double(*v, field + "." + key);
}

Vec2 read_vec2(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) bad_type(field, "[x, y]");
  return {get_double(j[0], field), get_double(j[1], field)};
}

RadioParams read_radio(const json& j, RadioParams r, const std::string& field) {
  expect_object(j, field);
  read_double(j, "tx_power_dbm", r.tx_power_dbm, field);
  read_double(j, "tx_gain_db", r.tx_gain_db, field);
  read_double(j, "rx_gain_db", r.rx_gain_db, field);
  read_double(j, "noise_figure_db", r.noise_figure_db, field);
  return r;
}

KnobRange read_knob(const json& j, KnobRange k, const std::string& field) {
  expect_object(j, field);
  read_double(j, "min", k.min, field);
  read_double(j, "max", k.max, field);
  read_double(j, "step", k.step, field);
  return k;
}

ControlBounds read_bounds(const json& j, ControlBounds b, const std::string& field) {
  expect_object(j, field);
  if (const json* v = find(j, "tx_power_dbm")) b.tx_power_dbm = read_knob(*v, b.tx_power_dbm, field);
  if (const json* v = find(j, "tx_gain_db")) b.tx_gain_db = read_knob(*v, b.tx_gain_db, field);
  if (const json* v = find(j, "rx_gain_db")) b.rx_gain_db = read_knob(*v, b.rx_gain_db, field);
  if (const json* v = find(j, "noise_figure_db")) {
    b.noise_figure_db = read_knob(*v, b.noise_figure_db, field);
  }
  if (const json* v = find(j, "max_iters")) {
    const std::uint64_t n = get_u64(*v, field + ".max_iters");
    if (n > 1000000) throw InvalidScenario("bounds", "max_iters too large");
    b.max_iters = static_cast<std::uint32_t>(n);
  }
  if (const json* v = find(j, "iter_cost_ms")) {
    const std::uint64_t n = get_u64(*v, field + ".iter_cost_ms");
    if (n > 1000000) throw InvalidScenario("bounds", "iter_cost_ms too large");
    b.iter_cost_ms = static_cast<std::uint32_t>(n);
  }
  return b;
}

ChannelEnv read_env(const json& j) {
  expect_object(j, "env");
  ChannelEnv e;
  read_double(j, "path_loss_exponent", e.path_loss_exponent, "env");
  read_double(j, "ref_loss_db", e.ref_loss_db, "env");
  read_double(j, "ref_distance_m", e.ref_distance_m, "env");
  read_double(j, "noise_floor_dbm", e.noise_floor_dbm, "env");
  return e;
}

EavesdropperSpec read_eavesdropper(const json& j, std::size_t i) {
  const std::string field = "eavesdroppers[" + std::to_string(i) + "]";
  expect_object(j, field);
  EavesdropperSpec e;
  if (const json* v = find(j, "follow")) {
    e.follow = static_cast<std::size_t>(get_u64(*v, field + ".follow"));
    if (const json* o = find(j, "offset")) e.offset = read_vec2(*o, field + ".offset");
  } else if (const json* p = find(j, "position")) {
    e.position = read_vec2(*p, field + ".position");
  } else {
    throw InvalidScenario("eavesdroppers", field + ": needs position or follow");
  }
  read_double(j, "speed", e.speed, field);
  read_double(j, "heading", e.heading, field);
  read_double(j, "rx_gain_db", e.radio.rx_gain_db, field);
  read_double(j, "noise_figure_db", e.radio.noise_figure_db, field);
  return e;
}

void generate_fleet(const json& j, Scenario& s, const RadioParams& radio,
                    const ControlBounds& bounds) {
  expect_object(j, "fleet");
  const json* count = find(j, "count");
  if (count == nullptr) throw InvalidScenario("fleet", "fleet.count is required");
  const std::uint64_t n = get_u64(*count, "fleet.count");
  if (n > 100000) throw InvalidScenario("fleet", "fleet.count too large");
  Vec2 area{200.0, 200.0};
  if (const json* a = find(j, "area")) area = read_vec2(*a, "fleet.area");
  Vec2 speed{0.0, 0.0};
  if (const json* v = find(j, "speed")) speed = read_vec2(*v, "fleet.speed");
  if (area.x < 0 || area.y < 0 || speed.x < 0 || speed.y < speed.x) {
    throw InvalidScenario("fleet", "fleet.area must be non-negative and speed [lo, hi]");
  }

  std::set<std::uint64_t> taken;
  for (const auto& v : s.vehicles) taken.insert(v.seed);
  std::uint64_t next_seed = s.vehicles.size();
  std::mt19937_64 rng(s.seed ^ 0x666c656574ULL);
  for (std::uint64_t k = 0; k < n; ++k) {
    VehicleSpec v;
    // Skip seeds already used by explicitly listed vehicles.
    while (taken.contains(next_seed)) ++next_seed;
    v.seed = next_seed;
    taken.insert(next_seed);
    v.position.x = s.anchor.x + (unit_uniform(rng()) - 0.5) * area.x;
    v.position.y = s.anchor.y + (unit_uniform(rng()) - 0.5) * area.y;
    v.speed = speed.x + unit_uniform(rng()) * (speed.y - speed.x);
    v.heading = unit_uniform(rng()) * 360.0;
    v.radio = radio;
    v.bounds = bounds;
    s.vehicles.push_back(v);
  }
}

}  // namespace

double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void Scenario::validate() const {
  if (vehicles.empty()) throw InvalidScenario("vehicles", "at least one vehicle is required");
  if (heights < 1) throw InvalidScenario("heights", "heights must be >= 1");
  if (heights > 10000000) throw InvalidScenario("heights", "heights too large");
  if (chain_length && *chain_length == 0) {
    throw InvalidScenario("chain_length", "chain_length must be >= 1");
  }
  if (!chain_length && heights > 0xffffffffULL) {
    throw InvalidScenario("heights", "heights exceeds the nonce chain length range");
  }
  if (!env.valid() || !std::isfinite(env.ref_loss_db) || !std::isfinite(env.noise_floor_dbm)) {
    throw InvalidScenario("env", "path_loss_exponent and ref_distance_m must be positive");
  }
  if (!(c_ref >= 0.0) || !std::isfinite(c_ref)) {
    throw InvalidScenario("c_ref", "c_ref must be a non-negative number");
  }
  if (!(quorum_ratio > 0.5 && quorum_ratio <= 1.0)) {
    throw InvalidScenario("quorum_ratio", "quorum_ratio must lie in (0.5, 1]");
  }
  if (link_latency_ms < 1) {
    throw InvalidScenario("link_latency_ms", "link_latency_ms must be >= 1");
  }
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw InvalidScenario("drop_rate", "drop_rate must lie in [0, 1)");
  }
  if (pow_compare.z < 1) throw InvalidScenario("pow_compare", "pow_compare.z must be >= 1");
  for (const auto& v : vehicles) {
    if (!v.bounds.valid()) throw InvalidScenario("bounds", "invalid control bounds");
    if (!v.bounds.contains(v.radio)) {
      throw InvalidScenario("radio", "radio parameters outside their bounds");
    }
    if (!std::isfinite(v.speed) || v.speed < 0.0) {
      throw InvalidScenario("vehicles", "vehicle speed must be non-negative");
    }
  }
  for (const auto& e : eavesdroppers) {
    if (e.follow && *e.follow >= vehicles.size()) {
      throw InvalidScenario("eavesdroppers", "follow index out of range");
    }
    if (e.speed < 0.0) throw InvalidScenario("eavesdroppers", "speed must be non-negative");
  }
}

Scenario scenario_from_json(const json& j) {
  expect_object(j, "scenario");
  Scenario s;
  if (const json* v = find(j, "seed")) s.seed = get_u64(*v, "seed");
  if (const json* v = find(j, "heights")) s.heights = get_u64(*v, "heights");
  if (const json* v = find(j, "chain_length")) {
    const std::uint64_t m = get_u64(*v, "chain_length");
    if (m > 0xffffffffULL) throw InvalidScenario("chain_length", "chain_length too large");
    s.chain_length = static_cast<std::uint32_t>(m);
  }
  if (const json* v = find(j, "epoch_ms")) s.epoch_ms = get_u64(*v, "epoch_ms");
  if (const json* v = find(j, "origin")) {
    const Vec2 o = read_vec2(*v, "origin");
    s.origin_lat = o.x;
    s.origin_lon = o.y;
  }
  if (const json* v = find(j, "env")) s.env = read_env(*v);
  if (const json* v = find(j, "anchor")) {
    expect_object(*v, "anchor");
    if (const json* p = find(*v, "position")) s.anchor = read_vec2(*p, "anchor.position");
  }
  const json* texp = find(j, "threshold_exp");
  const json* thex = find(j, "threshold_hex");
  if (texp && thex) {
    throw InvalidScenario("threshold", "give threshold_exp or threshold_hex, not both");
  }
  if (texp) {
    const std::uint64_t k = get_u64(*texp, "threshold_exp");
    if (k > 256) throw InvalidScenario("threshold", "threshold_exp must be <= 256");
    s.threshold = Threshold::from_exponent(static_cast<unsigned>(k));
  } else if (thex) {
    try {
      s.threshold = Threshold{Uint256::from_hex(get_string(*thex, "threshold_hex"))};
    } catch (const InvalidScenario&) {
      throw;
    } catch (const Error& e) {
      throw InvalidScenario("threshold", e.what());
    }
  }
  if (const json* v = find(j, "c_ref")) s.c_ref = get_double(*v, "c_ref");
  if (const json* v = find(j, "quorum_ratio")) s.quorum_ratio = get_double(*v, "quorum_ratio");
  try {
    if (const json* v = find(j, "distance_rule")) {
      s.distance_rule = distance_rule_from_string(get_string(*v, "distance_rule"));
    }
  } catch (const InvalidScenario&) {
    throw;
  } catch (const Error& e) {
    throw InvalidScenario("distance_rule", e.what());
  }
  try {
    if (const json* v = find(j, "score_mode")) {
      s.score_mode = score_mode_from_string(get_string(*v, "score_mode"));
    }
  } catch (const InvalidScenario&) {
    throw;
  } catch (const Error& e) {
    throw InvalidScenario("score_mode", e.what());
  }
  if (const json* v = find(j, "sign_candidates")) {
    s.sign_candidates = get_bool(*v, "sign_candidates");
  }
  if (const json* v = find(j, "link_latency_ms")) {
    s.link_latency_ms = get_u64(*v, "link_latency_ms");
  }
  if (const json* v = find(j, "drop_rate")) s.drop_rate = get_double(*v, "drop_rate");
  if (const json* v = find(j, "pow_compare")) {
    expect_object(*v, "pow_compare");
    if (const json* z = find(*v, "z")) s.pow_compare.z = get_u64(*z, "pow_compare.z");
    if (const json* t = find(*v, "t_ms")) s.pow_compare.t_ms = get_u64(*t, "pow_compare.t_ms");
  }
  if (const json* v = find(j, "timing")) {
    expect_object(*v, "timing");
    auto rd = [&](const char* key, std::uint64_t& out) {
      if (const json* x = find(*v, key)) out = get_u64(*x, std::string("timing.") + key);
    };
    rd("t_q_ms", s.timing.t_q_ms);
    rd("t_v_ms", s.timing.t_v_ms);
    rd("t_s_ms", s.timing.t_s_ms);
    rd("base_generation_ms", s.timing.base_generation_ms);
    rd("iter_cost_ms", s.timing.iter_cost_ms);
    if (s.timing.iter_cost_ms > 1000000) {
      throw InvalidScenario("timing", "iter_cost_ms too large");
    }
  }

  RadioParams default_radio;
  ControlBounds default_bounds;
  default_bounds.iter_cost_ms = static_cast<std::uint32_t>(s.timing.iter_cost_ms);
  if (const json* d = find(j, "defaults")) {
    expect_object(*d, "defaults");
    if (const json* r = find(*d, "radio")) default_radio = read_radio(*r, default_radio, "radio");
    if (const json* b = find(*d, "bounds")) {
      default_bounds = read_bounds(*b, default_bounds, "bounds");
    }
  }

  if (const json* vs = find(j, "vehicles")) {
    if (!vs->is_array()) bad_type("vehicles", "an array");
    for (std::size_t i = 0; i < vs->size(); ++i) {
      const json& vj = (*vs)[i];
      const std::string field = "vehicles[" + std::to_string(i) + "]";
      expect_object(vj, field);
      VehicleSpec v;
      v.seed = i;
      if (const json* x = find(vj, "seed")) v.seed = get_u64(*x, field + ".seed");
      if (const json* x = find(vj, "position")) v.position = read_vec2(*x, field + ".position");
      read_double(vj, "speed", v.speed, field);
      read_double(vj, "heading", v.heading, field);
      v.radio = default_radio;
      v.bounds = default_bounds;
      if (const json* x = find(vj, "radio")) v.radio = read_radio(*x, v.radio, "radio");
      if (const json* x = find(vj, "bounds")) v.bounds = read_bounds(*x, v.bounds, "bounds");
      s.vehicles.push_back(v);
    }
  }
  if (const json* f = find(j, "fleet")) generate_fleet(*f, s, default_radio, default_bounds);

  if (const json* es = find(j, "eavesdroppers")) {
    if (!es->is_array()) bad_type("eavesdroppers", "an array");
    for (std::size_t i = 0; i < es->size(); ++i) {
      s.eavesdroppers.push_back(read_eavesdropper((*es)[i], i));
    }
  }

  s.validate();
  return s;
}

Scenario scenario_load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open scenario '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

nlohmann::json to_json(const RadioParams& r) {
  return {{"tx_power_dbm", r.tx_power_dbm},
          {"tx_gain_db", r.tx_gain_db},
          {"rx_gain_db", r.rx_gain_db},
          {"noise_figure_db", r.noise_figure_db}};
}

nlohmann::json to_json(const ControlBounds& b) {
  auto knob = [](const KnobRange& k) {
    return json{{"min", k.min}, {"max", k.max}, {"step", k.step}};
  };
  return {{"tx_power_dbm", knob(b.tx_power_dbm)},
          {"tx_gain_db", knob(b.tx_gain_db)},
          {"rx_gain_db", knob(b.rx_gain_db)},
          {"noise_figure_db", knob(b.noise_figure_db)},
          {"max_iters", b.max_iters},
          {"iter_cost_ms", b.iter_cost_ms}};
}

nlohmann::json to_json(const Scenario& s) {
  json vehicles = json::array();
  for (const auto& v : s.vehicles) {
    vehicles.push_back({{"seed", v.seed},
                        {"position", {v.position.x, v.position.y}},
                        {"speed", v.speed},
                        {"heading", v.heading},
                        {"radio", to_json(v.radio)},
                        {"bounds", to_json(v.bounds)}});
  }
  json eaves = json::array();
  for (const auto& e : s.eavesdroppers) {
    json ej{{"speed", e.speed},
            {"heading", e.heading},
            {"rx_gain_db", e.radio.rx_gain_db},
            {"noise_figure_db", e.radio.noise_figure_db}};
    if (e.follow) {
      ej["follow"] = *e.follow;
      ej["offset"] = {e.offset.x, e.offset.y};
    } else {
      ej["position"] = {e.position.x, e.position.y};
    }
    eaves.push_back(std::move(ej));
  }
  json j{{"seed", s.seed},
         {"heights", s.heights},
         {"epoch_ms", s.epoch_ms},
         {"origin", {s.origin_lat, s.origin_lon}},
         {"env",
          {{"path_loss_exponent", s.env.path_loss_exponent},
           {"ref_loss_db", s.env.ref_loss_db},
           {"ref_distance_m", s.env.ref_distance_m},
           {"noise_floor_dbm", s.env.noise_floor_dbm}}},
         {"anchor", {{"position", {s.anchor.x, s.anchor.y}}}},
         {"threshold_hex", s.threshold.value.hex()},
         {"c_ref", s.c_ref},
         {"quorum_ratio", s.quorum_ratio},
         {"distance_rule", std::string(to_string(s.distance_rule))},
         {"score_mode", std::string(to_string(s.score_mode))},
         {"sign_candidates", s.sign_candidates},
         {"link_latency_ms", s.link_latency_ms},
         {"drop_rate", s.drop_rate},
         {"pow_compare", {{"z", s.pow_compare.z}, {"t_ms", s.pow_compare.t_ms}}},
         {"timing",
          {{"t_q_ms", s.timing.t_q_ms},
           {"t_v_ms", s.timing.t_v_ms},
           {"t_s_ms", s.timing.t_s_ms},
           {"base_generation_ms", s.timing.base_generation_ms},
           {"iter_cost_ms", s.timing.iter_cost_ms}}},
         {"vehicles", std::move(vehicles)},
         {"eavesdroppers", std::move(eaves)}};
  if (s.chain_length) j["chain_length"] = *s.chain_length;
  return j;
}

}  // namespace pon
