#include "pon/secrecy.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pon/error.hpp"

namespace pon {

namespace {

void check_distance(double d) {
  if (!(d > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDistance,
                "distance must be positive, got " + std::to_string(d));
  }
}

double capacity_of(const RadioParams& radio, const ChannelEnv& env,
                   double main_distance_m, double eve_distance_m,
                   const EavesdropperRadio& eve) {
  return secrecy_capacity(snr_db(radio, env, main_distance_m),
                          eavesdropper_snr_db(radio, eve, env, eve_distance_m));
}

}  // namespace

bool ControlBounds::valid() const {
  return tx_power_dbm.valid() && tx_gain_db.valid() && rx_gain_db.valid() &&
         noise_figure_db.valid() && noise_figure_db.min >= 0.0 && max_iters >= 1;
}

bool ControlBounds::contains(const RadioParams& r) const {
  return tx_power_dbm.contains(r.tx_power_dbm) && tx_gain_db.contains(r.tx_gain_db) &&
         rx_gain_db.contains(r.rx_gain_db) && noise_figure_db.contains(r.noise_figure_db);
}

double path_loss_db(const ChannelEnv& env, double distance_m) {
  check_distance(distance_m);
  return env.ref_loss_db +
         10.0 * env.path_loss_exponent * std::log10(distance_m / env.ref_distance_m);
}

double snr_db(const RadioParams& radio, const ChannelEnv& env, double distance_m) {
  return radio.tx_power_dbm + radio.tx_gain_db + radio.rx_gain_db -
         path_loss_db(env, distance_m) - (env.noise_floor_dbm + radio.noise_figure_db);
}

double eavesdropper_snr_db(const RadioParams& radio, const EavesdropperRadio& eve,
                           const ChannelEnv& env, double distance_m) {
  if (std::isinf(distance_m) && distance_m > 0) {
    return -std::numeric_limits<double>::infinity();
  }
  return radio.tx_power_dbm + radio.tx_gain_db + eve.rx_gain_db -
         path_loss_db(env, distance_m) - (env.noise_floor_dbm + eve.noise_figure_db);
}

double secrecy_capacity(double snr_main_db, double snr_eve_db) {
  const double main = std::log2(1.0 + std::pow(10.0, snr_main_db / 10.0));
  const double eve = std::log2(1.0 + std::pow(10.0, snr_eve_db / 10.0));
  return std::max(0.0, main - eve);
}

bool discriminate(double capacity_bits, double c_ref) { return capacity_bits >= c_ref; }

SecrecyReport evaluate_secrecy(const RadioParams& radio, const ChannelEnv& env,
                               double main_distance_m, double eve_distance_m,
                               const EavesdropperRadio& eve) {
  SecrecyReport r;
  r.snr_main_db = snr_db(radio, env, main_distance_m);
  r.snr_eve_db = eavesdropper_snr_db(radio, eve, env, eve_distance_m);
  r.capacity_bits = secrecy_capacity(r.snr_main_db, r.snr_eve_db);
  return r;
}

ControlStep control_step(const RadioParams& radio, const ControlBounds& bounds,
                         const ChannelEnv& env, double main_distance_m,
                         double eve_distance_m, const EavesdropperRadio& eve) {
  if (!bounds.contains(radio)) {
    throw Error(ErrorCode::kOutOfBounds, "radio parameters outside control bounds");
  }
  const std::array<std::pair<double RadioParams::*, const KnobRange*>, 4> knobs{{
      {&RadioParams::tx_power_dbm, &bounds.tx_power_dbm},
      {&RadioParams::tx_gain_db, &bounds.tx_gain_db},
      {&RadioParams::rx_gain_db, &bounds.rx_gain_db},
      {&RadioParams::noise_figure_db, &bounds.noise_figure_db},
  }};

  const double base = capacity_of(radio, env, main_distance_m, eve_distance_m, eve);
  ControlStep best{radio, false};
  double best_capacity = base;
  for (const auto& [member, range] : knobs) {
    for (const double dir : {+1.0, -1.0}) {
      RadioParams cand = radio;
      cand.*member = std::clamp(radio.*member + dir * range->step, range->min, range->max);
      if (cand.*member == radio.*member) continue;
      const double c = capacity_of(cand, env, main_distance_m, eve_distance_m, eve);
      if (c > best_capacity) {
        best_capacity = c;
        best = {cand, true};
      }
    }
  }
  return best;
}

ControlOutcome control_until(const RadioParams& radio, const ControlBounds& bounds,
                             const ChannelEnv& env, double main_distance_m,
                             double eve_distance_m, double c_ref,
                             const EavesdropperRadio& eve) {
  if (!bounds.contains(radio)) {
    throw Error(ErrorCode::kOutOfBounds, "radio parameters outside control bounds");
  }
  ControlOutcome out;
  out.radio = radio;
  out.capacity_bits = capacity_of(radio, env, main_distance_m, eve_distance_m, eve);
  while (!discriminate(out.capacity_bits, c_ref) && out.iters < bounds.max_iters) {
    const ControlStep step =
        control_step(out.radio, bounds, env, main_distance_m, eve_distance_m, eve);
    ++out.iters;
    if (!step.improved) break;
    out.radio = step.radio;
    out.capacity_bits = capacity_of(out.radio, env, main_distance_m, eve_distance_m, eve);
  }
  out.feasible = discriminate(out.capacity_bits, c_ref);
  return out;
}

}  // namespace pon
