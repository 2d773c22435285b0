#pragma once

// Command handlers behind the `pon` executable. Each returns the process exit
// code and writes only to the given streams, so tests can drive them
// in-process.
//
// Exit codes:
//   0  success
//   1  configuration, flag, I/O or parse error
//   2  run stalled (a height did not finalize within the retry bound)
//   3  chain failed validation

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pon/eligibility.hpp"
#include "pon/secrecy.hpp"

namespace pon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitStalled = 2;
inline constexpr int kExitInvalid = 3;

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> heights;
  std::optional<double> c_ref;
  std::optional<unsigned> threshold_exp;
  std::optional<double> quorum;
};

// Writes chain.jsonl, metrics.json and registry.json into out_dir.
int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            const RunOverrides& overrides, bool json, std::ostream& out, std::ostream& err);

struct ValidateArgs {
  std::filesystem::path chain;
  std::filesystem::path registry;
  Threshold threshold = Threshold::from_exponent(256);
  double c_ref = 1.0;
  ScoreMode mode = ScoreMode::kReveal;
};

int cmd_validate(const ValidateArgs& args, bool json, std::ostream& out, std::ostream& err);

struct SecrecyArgs {
  RadioParams radio;
  ChannelEnv env;
  double main_distance_m = 0.0;
  double eve_distance_m = 0.0;
  double c_ref = 1.0;
  // Default to the main receiver's values.
  std::optional<double> eve_rx_gain_db;
  std::optional<double> eve_noise_figure_db;
};

int cmd_secrecy(const SecrecyArgs& args, bool json, std::ostream& out, std::ostream& err);

struct CompareArgs {
  std::int64_t t_b = 100;
  std::int64_t t_q = 2;
  std::int64_t t_v = 3;
  std::int64_t t_s = 5;
  std::int64_t z = 6;
  std::int64_t t = 600000;
};

int cmd_compare(const CompareArgs& args, bool json, std::ostream& out, std::ostream& err);

// Full command line without the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pon::cli
