#include "pon/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pon/error.hpp"
#include "pon/ledger.hpp"
#include "pon/simnet.hpp"

namespace pon::cli {

namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void apply_overrides(json& j, const RunOverrides& o) {
  if (!j.is_object()) return;
  if (o.seed) j["seed"] = *o.seed;
  if (o.heights) j["heights"] = *o.heights;
  if (o.c_ref) j["c_ref"] = *o.c_ref;
  if (o.threshold_exp) {
    j.erase("threshold_hex");
    j["threshold_exp"] = *o.threshold_exp;
  }
  if (o.quorum) j["quorum_ratio"] = *o.quorum;
}

}  // namespace

int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            const RunOverrides& overrides, bool as_json, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  try {
    json j = read_json_file(scenario_path);
    apply_overrides(j, overrides);
    scenario = scenario_from_json(j);
  } catch (const InvalidScenario& e) {
    err << "error: invalid scenario (" << e.field() << "): " << e.what() << "\n";
    return kExitError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }

  RunOutcome outcome;
  try {
    outcome = run(scenario);
  } catch (const InvalidScenario& e) {
    err << "error: invalid scenario (" << e.field() << "): " << e.what() << "\n";
    return kExitError;
  }

  const auto chain_path = out_dir / "chain.jsonl";
  const auto metrics_path = out_dir / "metrics.json";
  const auto registry_path = out_dir / "registry.json";
  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir.string());
    chain_save(outcome.chain, chain_path);
    write_text(metrics_path, to_json(outcome.metrics).dump(2) + "\n");
    write_text(registry_path, to_json(outcome.registry).dump(2) + "\n");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }

  const json summary = metrics_report(outcome.metrics);
  if (as_json) {
    json o{{"status", outcome.stalled() ? "stalled" : "ok"},
           {"chain", chain_path.string()},
           {"metrics", metrics_path.string()},
           {"registry", registry_path.string()},
           {"summary", summary}};
    out << o.dump() << "\n";
  } else {
    out << "finalized " << outcome.metrics.heights.size() << "/" << scenario.heights
        << " heights, forks " << outcome.metrics.fork_count << ", gate rejections "
        << outcome.metrics.gate_rejections << ", mean confirmation "
        << fixed(summary["confirmation_ms"]["mean"].get<double>(), 1) << " ms -> "
        << chain_path.string() << "\n";
  }
  if (outcome.stalled()) {
    err << "stalled at height " << *outcome.metrics.stalled_at << " after "
        << kMaxLotteryRetries << " retries\n";
    return kExitStalled;
  }
  return kExitOk;
}

int cmd_validate(const ValidateArgs& args, bool as_json, std::ostream& out, std::ostream& err) {
  CommitmentRegistry registry;
  try {
    registry = registry_from_json(read_json_file(args.registry));
  } catch (const Error& e) {
    err << "error: registry: " << e.what() << "\n";
    return kExitError;
  }

  auto report_invalid = [&](std::uint64_t height, std::string_view reason,
                            const std::string& detail) {
    if (as_json) {
      out << json{{"valid", false},
                  {"height", height},
                  {"reason", std::string(reason)},
                  {"detail", detail}}
                 // Parser messages can quote the damaged bytes.
                 .dump(-1, ' ', false, json::error_handler_t::replace)
          << "\n";
    } else {
      out << "INVALID height " << height << ": " << reason;
      if (!detail.empty()) out << " (" << detail << ")";
      out << "\n";
    }
    return kExitInvalid;
  };

  Chain chain;
  try {
    chain = chain_load(args.chain);
  } catch (const ParseError& e) {
    // A damaged record is evidence of tampering at that block.
    if (e.line() == 0) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
    return report_invalid(e.line() - 1, to_string(RejectReason::kCorrupt), e.what());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }

  ValidationOptions opts;
  opts.mode = args.mode;
  const Verdict v = chain.empty() ? Verdict::accept(0)
                                  : chain_validate(chain, registry, args.threshold, args.c_ref, opts);
  if (!v) return report_invalid(v.height, to_string(v.reason), v.detail);
  if (as_json) {
    out << json{{"valid", true}, {"blocks", chain.size()}, {"height", chain.height()}}.dump()
        << "\n";
  } else {
    out << "OK " << chain.size() << " blocks, head height " << chain.height() << "\n";
  }
  return kExitOk;
}

int cmd_secrecy(const SecrecyArgs& args, bool as_json, std::ostream& out, std::ostream& err) {
  if (!(args.main_distance_m > 0.0) || !(args.eve_distance_m > 0.0)) {
    err << "error: distances must be positive\n";
    return kExitError;
  }
  if (!args.env.valid()) {
    err << "error: path loss exponent and reference distance must be positive\n";
    return kExitError;
  }
  const EavesdropperRadio eve{args.eve_rx_gain_db.value_or(args.radio.rx_gain_db),
                              args.eve_noise_figure_db.value_or(args.radio.noise_figure_db)};
  SecrecyReport r;
  try {
    r = evaluate_secrecy(args.radio, args.env, args.main_distance_m, args.eve_distance_m, eve);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  const bool pass = discriminate(r.capacity_bits, args.c_ref);
  if (as_json) {
    out << json{{"snr_main_db", r.snr_main_db},
                {"snr_eve_db", std::isfinite(r.snr_eve_db) ? json(r.snr_eve_db) : json(nullptr)},
                {"capacity_bits", r.capacity_bits},
                {"c_ref", args.c_ref},
                {"pass", pass}}
               .dump()
        << "\n";
  } else {
    out << "snr_main_db   " << fixed(r.snr_main_db, 3) << "\n"
        << "snr_eve_db    " << (std::isfinite(r.snr_eve_db) ? fixed(r.snr_eve_db, 3) : "-inf")
        << "\n"
        << "capacity_bits " << fixed(r.capacity_bits, 3) << "\n"
        << "c_ref         " << fixed(args.c_ref, 3) << "\n"
        << (pass ? "PASS" : "FAIL") << "\n";
  }
  return kExitOk;
}

int cmd_compare(const CompareArgs& a, bool as_json, std::ostream& out, std::ostream& err) {
  for (std::int64_t v : {a.t_b, a.t_q, a.t_v, a.t_s, a.z, a.t}) {
    if (v < 0) {
      err << "error: inputs must be non-negative\n";
      return kExitError;
    }
  }
  const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v); };
  const std::uint64_t pow_ms = pow_confirmation_time({u(a.z), u(a.t)});
  const std::uint64_t pon_ms = confirmation_time({u(a.t_b), u(a.t_q), u(a.t_v), u(a.t_s)});
  struct Row {
    const char* name;
    const char* energy;
    const char* formula;
    std::uint64_t ms;
  };
  const Row rows[] = {
      {"PoW", "hash puzzle difficulty", "z*t", pow_ms},
      {"PoS", "hash puzzle difficulty", "z*t", pow_ms},
      {"PoN", "secrecy capacity control", "Tb+Tq+Tv+Ts", pon_ms},
  };
  if (as_json) {
    json arr = json::array();
    for (const Row& r : rows) {
      arr.push_back({{"algorithm", r.name},
                     {"energy", r.energy},
                     {"formula", r.formula},
                     {"confirmation_ms", r.ms}});
    }
    out << json{{"rows", arr}}.dump() << "\n";
    return kExitOk;
  }
  char line[160];
  std::snprintf(line, sizeof line, "%-9s  %-24s  %-12s  %s\n", "algorithm", "energy",
                "formula", "confirmation_ms");
  out << line;
  for (const Row& r : rows) {
    std::snprintf(line, sizeof line, "%-9s  %-24s  %-12s  %llu\n", r.name, r.energy, r.formula,
                  static_cast<unsigned long long>(r.ms));
    out << line;
  }
  return kExitOk;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Proof-of-Nonce vehicle cluster simulator"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable JSON on stdout");

  std::string scenario_path, out_dir;
  std::optional<std::uint64_t> seed, heights;
  std::optional<double> run_c_ref, quorum;
  std::optional<unsigned> run_texp;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario");
  run_cmd->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  run_cmd->add_option("--seed", seed);
  run_cmd->add_option("--heights", heights);
  run_cmd->add_option("--c-ref", run_c_ref);
  run_cmd->add_option("--threshold-exp", run_texp)->check(CLI::Range(0U, 256U));
  run_cmd->add_option("--quorum", quorum);
  run_cmd->add_flag("--json", as_json);

  std::string chain_path, registry_path, threshold_hex, score_mode = "reveal";
  unsigned texp = 256;
  double val_c_ref = 1.0;
  auto* val_cmd = app.add_subcommand("validate", "Validate a persisted chain");
  val_cmd->add_option("--chain", chain_path)->required();
  val_cmd->add_option("--registry", registry_path)->required();
  auto* texp_opt =
      val_cmd->add_option("--threshold-exp", texp, "Threshold 2^K")->check(CLI::Range(0U, 256U));
  val_cmd->add_option("--threshold-hex", threshold_hex, "Threshold as 64 hex digits")
      ->excludes(texp_opt);
  val_cmd->add_option("--c-ref", val_c_ref);
  val_cmd->add_option("--score-mode", score_mode)->check(CLI::IsMember({"reveal", "signature"}));
  val_cmd->add_flag("--json", as_json);

  SecrecyArgs sec;
  double eve_rx = 0.0, eve_nf = 0.0;
  auto* sec_cmd = app.add_subcommand("secrecy", "Evaluate secrecy capacity for one link");
  sec_cmd->add_option("--tx-dbm", sec.radio.tx_power_dbm);
  sec_cmd->add_option("--tx-gain", sec.radio.tx_gain_db);
  sec_cmd->add_option("--rx-gain", sec.radio.rx_gain_db);
  sec_cmd->add_option("--nf", sec.radio.noise_figure_db);
  sec_cmd->add_option("--pl-exp", sec.env.path_loss_exponent);
  sec_cmd->add_option("--ref-loss", sec.env.ref_loss_db);
  sec_cmd->add_option("--ref-dist", sec.env.ref_distance_m);
  sec_cmd->add_option("--noise-floor", sec.env.noise_floor_dbm);
  sec_cmd->add_option("--main-dist", sec.main_distance_m)->required();
  sec_cmd->add_option("--eve-dist", sec.eve_distance_m)->required();
  sec_cmd->add_option("--c-ref", sec.c_ref);
  auto* eve_rx_opt = sec_cmd->add_option("--eve-rx-gain", eve_rx);
  auto* eve_nf_opt = sec_cmd->add_option("--eve-nf", eve_nf);
  sec_cmd->add_flag("--json", as_json);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Confirmation time of PoW, PoS and PoN");
  cmp_cmd->add_option("--tb", cmp.t_b);
  cmp_cmd->add_option("--tq", cmp.t_q);
  cmp_cmd->add_option("--tv", cmp.t_v);
  cmp_cmd->add_option("--ts", cmp.t_s);
  cmp_cmd->add_option("--z", cmp.z);
  cmp_cmd->add_option("--t", cmp.t);
  cmp_cmd->add_flag("--json", as_json);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  if (run_cmd->parsed()) {
    RunOverrides o{seed, heights, run_c_ref, run_texp, quorum};
    return cmd_run(scenario_path, out_dir, o, as_json, out, err);
  }
  if (val_cmd->parsed()) {
    ValidateArgs v;
    v.chain = chain_path;
    v.registry = registry_path;
    v.c_ref = val_c_ref;
    v.mode = score_mode_from_string(score_mode);
    try {
      v.threshold = threshold_hex.empty() ? Threshold::from_exponent(texp)
                                          : Threshold{Uint256::from_hex(threshold_hex)};
    } catch (const Error& e) {
      err << "error: threshold: " << e.what() << "\n";
      return kExitError;
    }
    return cmd_validate(v, as_json, out, err);
  }
  if (sec_cmd->parsed()) {
    if (eve_rx_opt->count() > 0) sec.eve_rx_gain_db = eve_rx;
    if (eve_nf_opt->count() > 0) sec.eve_noise_figure_db = eve_nf;
    return cmd_secrecy(sec, as_json, out, err);
  }
  return cmd_compare(cmp, as_json, out, err);
}

}  // namespace pon::cli
