#include <algorithm>

#include "pon/simnet.hpp"

namespace pon {

namespace {

using nlohmann::json;

double mean(std::uint64_t sum, std::size_t n) {
  return n == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(n);
}

}  // namespace

nlohmann::json metrics_report(const Metrics& m) {
  const std::size_t n = m.heights.size();
  std::uint64_t tb = 0, tq = 0, tv = 0, ts = 0, conf = 0, conf_max = 0, retries = 0;
  std::uint64_t cluster = 0;
  for (const auto& h : m.heights) {
    tb += h.timing.t_b_ms;
    tq += h.timing.t_q_ms;
    tv += h.timing.t_v_ms;
    ts += h.timing.t_s_ms;
    conf += h.confirmation_ms;
    conf_max = std::max(conf_max, h.confirmation_ms);
    retries += h.retries;
    cluster += h.cluster_size;
  }
  const std::uint64_t pow_ms = n == 0 ? 0 : pow_confirmation_time(m.pow_compare);
  return {
      {"heights_finalized", n},
      {"stalled_at", m.stalled_at ? json(*m.stalled_at) : json(nullptr)},
      {"confirmation_ms", {{"mean", mean(conf, n)}, {"max", conf_max}}},
      {"decomposition_ms",
       {{"t_b", mean(tb, n)}, {"t_q", mean(tq, n)}, {"t_v", mean(tv, n)}, {"t_s", mean(ts, n)}}},
      {"fork_count", m.fork_count},
      {"gate_rejections", m.gate_rejections},
      {"lottery_misses", m.lottery_misses},
      {"failed_attempts", m.failed_attempts},
      {"retries", retries},
      {"mean_cluster_size", mean(cluster, n)},
      {"control_iters", m.control_iters},
      {"energy_ms", m.energy_ms},
      {"messages_sent", m.messages_sent},
      {"messages_dropped", m.messages_dropped},
      {"rejected_finals", m.rejected_finals},
      {"gate_violations", m.gate_violations},
      {"pow",
       {{"z", n == 0 ? 0 : m.pow_compare.z},
        {"t_ms", n == 0 ? 0 : m.pow_compare.t_ms},
        {"confirmation_ms", pow_ms}}},
  };
}

nlohmann::json to_json(const Metrics& m) {
  json rows = json::array();
  for (const auto& h : m.heights) {
    rows.push_back({{"height", h.height},
                    {"retries", h.retries},
                    {"round_start_ms", h.round_start_ms},
                    {"append_ms", h.append_ms},
                    {"confirmation_ms", h.confirmation_ms},
                    {"t_b_ms", h.timing.t_b_ms},
                    {"t_q_ms", h.timing.t_q_ms},
                    {"t_v_ms", h.timing.t_v_ms},
                    {"t_s_ms", h.timing.t_s_ms},
                    {"eligible", h.eligible},
                    {"candidates", h.candidates},
                    {"votes", h.votes},
                    {"cluster_size", h.cluster_size},
                    {"proposer_index", h.proposer_index},
                    {"proposer_id", h.proposer_id.hex()},
                    {"timestamp_ms", h.timestamp_ms},
                    {"claimed_capacity", h.claimed_capacity},
                    {"oracle_capacity", h.oracle_capacity}});
  }
  return {{"summary", metrics_report(m)}, {"heights", std::move(rows)}};
}

}  // namespace pon
