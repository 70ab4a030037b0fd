#pragma once

#include <json.hpp>

#include "swarmledger/netsim.hpp"

namespace swarmledger {

// Everything written to metrics.json must be a deterministic function
// of (config, seed): keys come out sorted, latency samples sorted,
// nothing derived from wall clocks or paths.

struct LatencySummary {
    uint64_t tracked = 0;
    uint64_t confirmed = 0;
    std::vector<uint64_t> samples;  // confirm_tick - submit_tick, sorted
    double mean = 0.0;
    double median = 0.0;
    uint64_t p95 = 0;
};

inline double percentile_median(const std::vector<uint64_t>& sorted) {
    size_t n = sorted.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
    return (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
}

// nearest-rank
inline uint64_t percentile_95(const std::vector<uint64_t>& sorted) {
    if (sorted.empty()) return 0;
    size_t rank = (sorted.size() * 95 + 99) / 100;
    return sorted[rank - 1];
}

inline LatencySummary summarize_latency(std::vector<uint64_t> samples, uint64_t tracked) {
    LatencySummary s;
    s.tracked = tracked;
    s.confirmed = samples.size();
    std::sort(samples.begin(), samples.end());
    s.samples = std::move(samples);
    if (!s.samples.empty()) {
        uint64_t sum = 0;
        for (uint64_t v : s.samples) sum += v;
        s.mean = static_cast<double>(sum) / static_cast<double>(s.samples.size());
        s.median = percentile_median(s.samples);
        s.p95 = percentile_95(s.samples);
    }
    return s;
}

inline LatencySummary confirmation_summary(const World& w) {
    std::vector<uint64_t> samples;
    for (const auto& [txid, t] : w.tracked())
        if (t.confirm_tick) samples.push_back(*t.confirm_tick - t.submit_tick);
    return summarize_latency(std::move(samples), w.tracked().size());
}

inline nlohmann::json latency_json(const LatencySummary& s) {
    return {{"tracked", s.tracked}, {"confirmed", s.confirmed}, {"mean", s.mean},
            {"median", s.median},   {"p95", s.p95},             {"samples", s.samples}};
}

inline nlohmann::json chain_metrics(const ChainState& cs, uint64_t duration) {
    // canonical tx counts bucketed by block interval; their sum must
    // equal canonical_txs, which report tooling can audit
    uint64_t win = cs.params().block_interval;
    std::vector<uint64_t> window_txs(duration / win + 1, 0);
    uint64_t txs = 0;
    for (uint64_t h = 1; h <= cs.head_height(); ++h) {
        const Block& b = cs.canonical_block(h);
        txs += b.txs.size();
        size_t idx = b.header.timestamp / win;
        if (idx >= window_txs.size()) window_txs.resize(idx + 1, 0);
        window_txs[idx] += b.txs.size();
    }
    uint64_t mined = cs.head_height() + cs.orphans().size();
    nlohmann::json j;
    j["head_height"] = cs.head_height();
    j["head"] = to_hex(cs.head());
    j["canonical_txs"] = txs;
    j["orphans"] = cs.orphans().size();
    j["orphan_rate"] = mined == 0 ? 0.0
                                  : static_cast<double>(cs.orphans().size()) /
                                        static_cast<double>(mined);
    j["total_balance"] = cs.total_balance();
    j["ledger_bytes"] = cs.encoded_size();
    j["txs_per_tick"] =
        duration == 0 ? 0.0 : static_cast<double>(txs) / static_cast<double>(duration);
    j["throughput"] = {{"window_ticks", win}, {"window_tx_counts", window_txs}};
    return j;
}

inline nlohmann::json world_metrics(const World& w, uint64_t duration) {
    nlohmann::json j;
    j["ticks"] = duration;
    nlohmann::json chains = nlohmann::json::object();
    uint64_t blocks = 0;
    for (const auto& [id, cs] : w.observer().chains()) {
        chains[id] = chain_metrics(cs, duration);
        blocks += cs.head_height() + cs.orphans().size();
    }
    j["chains"] = chains;
    j["blocks_stored"] = blocks;
    j["confirmation"] = latency_json(confirmation_summary(w));
    ConservationReport cons = w.observer().check_conservation();
    j["conservation"] = {{"ok", cons.ok},
                         {"total_balances", cons.total_balances},
                         {"total_created", cons.total_created}};
    return j;
}

// --------------------------------------------------------------------
// cross-run aggregation for the report command

struct ScenarioAggregate {
    uint64_t runs = 0;
    uint64_t tracked = 0;
    std::vector<uint64_t> samples;
    uint64_t canonical_txs = 0;
    uint64_t ticks = 0;
    uint64_t orphans = 0;
    uint64_t blocks = 0;
    uint64_t conservation_failures = 0;
    uint64_t vote_runs = 0;
    uint64_t vote_truth_wins = 0;
};

inline void fold_metrics(ScenarioAggregate& agg, const nlohmann::json& m) {
    agg.runs++;
    const auto& conf = m.at("confirmation");
    agg.tracked += conf.at("tracked").get<uint64_t>();
    for (const auto& s : conf.at("samples")) agg.samples.push_back(s.get<uint64_t>());
    agg.ticks += m.at("ticks").get<uint64_t>();
    for (const auto& [id, cj] : m.at("chains").items()) {
        agg.canonical_txs += cj.at("canonical_txs").get<uint64_t>();
        agg.orphans += cj.at("orphans").get<uint64_t>();
        agg.blocks += cj.at("head_height").get<uint64_t>() + cj.at("orphans").get<uint64_t>();
    }
    if (!m.at("conservation").at("ok").get<bool>()) agg.conservation_failures++;
    if (m.contains("scenario_result") && m.at("scenario_result").contains("winner_is_truth")) {
        agg.vote_runs++;
        if (m.at("scenario_result").at("winner_is_truth").get<bool>()) agg.vote_truth_wins++;
    }
}

inline nlohmann::json aggregate_json(const std::string& scenario, const ScenarioAggregate& agg) {
    LatencySummary lat = summarize_latency(agg.samples, agg.tracked);
    nlohmann::json j;
    j["scenario"] = scenario;
    j["runs"] = agg.runs;
    j["confirmation"] = {{"tracked", lat.tracked},
                         {"confirmed", lat.confirmed},
                         {"mean", lat.mean},
                         {"median", lat.median},
                         {"p95", lat.p95}};
    j["throughput_txs_per_tick"] =
        agg.ticks == 0 ? 0.0
                       : static_cast<double>(agg.canonical_txs) / static_cast<double>(agg.ticks);
    j["orphan_rate"] = agg.blocks == 0
                           ? 0.0
                           : static_cast<double>(agg.orphans) / static_cast<double>(agg.blocks);
    j["conservation_failures"] = agg.conservation_failures;
    if (agg.vote_runs > 0)
        j["vote_accuracy"] = {{"runs", agg.vote_runs}, {"winner_matches_truth", agg.vote_truth_wins}};
    return j;
}

}  // namespace swarmledger
