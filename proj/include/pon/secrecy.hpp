#pragma once

// Physical-layer model: log-distance path loss, link-budget SNR, Gaussian
// wiretap secrecy capacity, the reference-value discriminator and the knob
// controller that raises capacity when it falls short.

#include <cstdint>
#include <limits>

namespace pon {

struct ChannelEnv {
  double path_loss_exponent = 2.7;
  double ref_loss_db = 47.0;     // loss at ref_distance_m
  double ref_distance_m = 1.0;
  double noise_floor_dbm = -104.0;

  bool valid() const { return path_loss_exponent > 0.0 && ref_distance_m > 0.0; }
};

struct RadioParams {
  double tx_power_dbm = 10.0;
  double tx_gain_db = 0.0;
  double rx_gain_db = 0.0;
  double noise_figure_db = 6.0;

  bool operator==(const RadioParams&) const = default;
};

// Receiver characteristics of an eavesdropper; it sees the legitimate
// transmitter's power and antenna gain through the same environment.
struct EavesdropperRadio {
  double rx_gain_db = 0.0;
  double noise_figure_db = 6.0;

  bool operator==(const EavesdropperRadio&) const = default;
};

struct KnobRange {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  bool contains(double v) const { return v >= min && v <= max; }
  bool valid() const { return min <= max && step > 0.0; }
};

struct ControlBounds {
  KnobRange tx_power_dbm{0.0, 23.0, 1.0};
  KnobRange tx_gain_db{0.0, 6.0, 1.0};
  KnobRange rx_gain_db{0.0, 6.0, 1.0};
  KnobRange noise_figure_db{3.0, 9.0, 1.0};
  std::uint32_t max_iters = 50;
  std::uint32_t iter_cost_ms = 2;

  bool valid() const;
  bool contains(const RadioParams& radio) const;
};

struct SecrecyReport {
  double snr_main_db = 0.0;
  double snr_eve_db = 0.0;
  double capacity_bits = 0.0;
};

inline constexpr double kNoEavesdropper = std::numeric_limits<double>::infinity();

// ref_loss_db + 10 n log10(d / d0). Throws Error(kNonPositiveDistance).
double path_loss_db(const ChannelEnv& env, double distance_m);

// tx_power + tx_gain + rx_gain - path_loss - (noise_floor + noise_figure).
double snr_db(const RadioParams& radio, const ChannelEnv& env, double distance_m);

// Same budget seen by an eavesdropper receiver. An infinite distance yields
// -inf (no eavesdropper).
double eavesdropper_snr_db(const RadioParams& radio, const EavesdropperRadio& eve,
                           const ChannelEnv& env, double distance_m);

// max(0, log2(1 + 10^(main/10)) - log2(1 + 10^(eve/10))).
double secrecy_capacity(double snr_main_db, double snr_eve_db);

// Inclusive: capacity == c_ref passes.
bool discriminate(double capacity_bits, double c_ref);

SecrecyReport evaluate_secrecy(const RadioParams& radio, const ChannelEnv& env,
                               double main_distance_m, double eve_distance_m,
                               const EavesdropperRadio& eve = {});

struct ControlStep {
  RadioParams radio;
  bool improved = false;
};

// One greedy coordinate-ascent move. Candidates are +step then -step on
// tx_power, tx_gain, rx_gain, noise_figure (in that order), clamped to the
// bounds; the move with the largest capacity gain is applied, earliest
// candidate on ties. improved == false means no move increases capacity.
// Throws Error(kOutOfBounds) if `radio` is outside `bounds`.
ControlStep control_step(const RadioParams& radio, const ControlBounds& bounds,
                         const ChannelEnv& env, double main_distance_m,
                         double eve_distance_m, const EavesdropperRadio& eve = {});

struct ControlOutcome {
  RadioParams radio;
  std::uint32_t iters = 0;
  bool feasible = false;
  double capacity_bits = 0.0;

  std::uint64_t control_ms(const ControlBounds& bounds) const {
    return static_cast<std::uint64_t>(iters) * bounds.iter_cost_ms;
  }
};

// Runs control_step until the discriminator passes, the controller
// saturates or max_iters steps were spent. Each control_step call counts as
// one iteration, including a final one that finds no improving move.
ControlOutcome control_until(const RadioParams& radio, const ControlBounds& bounds,
                             const ChannelEnv& env, double main_distance_m,
                             double eve_distance_m, double c_ref,
                             const EavesdropperRadio& eve = {});

}  // namespace pon
