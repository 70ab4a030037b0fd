#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include "swarmledger/config.hpp"
#include "swarmledger/metrics.hpp"

namespace swarmledger {

// Builds the world a config describes, hosts whichever scenario it
// names, and writes the run directory: the resolved config, metrics,
// an event log, a binary dump plus a JSONL sidecar per chain, and the
// off-chain blobs. Artifact bytes depend only on (config, seed).

inline nlohmann::json to_json(const VotingResult& r) {
    nlohmann::json j;
    j["proposal"] = to_hex(r.proposal);
    j["truth_option"] = to_hex(r.truth_option);
    j["winner_is_truth"] = r.winner_is_truth;
    j["ballots_cast"] = r.ballots_cast;
    j["missed_window"] = r.missed_window;
    j["wrong_observations"] = r.wrong_observations;
    if (r.tally) {
        j["proposal_height"] = r.tally->proposal_height;
        j["window"] = r.tally->window;
        j["ballots"] = r.tally->ballots;
        j["late_ballots"] = r.tally->late;
        j["winner"] = to_hex(r.tally->winner);
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [opt, n] : r.tally->counts) counts[to_hex(opt)] = n;
        j["counts"] = counts;
    }
    return j;
}

inline nlohmann::json to_json(const AssistResult& r) {
    nlohmann::json j;
    j["call"] = to_hex(r.call);
    j["escrow"] = to_hex(r.escrow);
    j["reward"] = r.reward;
    j["refunded"] = r.refunded;
    j["escrow_balance"] = r.escrow_balance;
    if (r.paid_responder)
        j["paid_responder"] = *r.paid_responder;
    else
        j["paid_responder"] = nullptr;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& o : r.responders) {
        nlohmann::json e = {{"battery", o.battery},
                            {"decided", o.decided},
                            {"accepted", o.accepted},
                            {"location_ok", o.location_ok}};
        if (o.arrival_tick) e["arrival_tick"] = *o.arrival_tick;
        rs.push_back(e);
    }
    j["responders"] = rs;
    return j;
}

inline nlohmann::json to_json(const BehaviorSwitchResult& r) {
    return {{"side_blocks", r.side_blocks},
            {"side_single_miner", r.side_single_miner},
            {"main_blocks", r.main_blocks},
            {"main_slots_respected", r.main_slots_respected},
            {"widest_main_gap", r.widest_main_gap},
            {"beacons", r.beacons},
            {"funds_restored", r.funds_restored}};
}

inline nlohmann::json to_json(const S2aasResult& r) {
    return {{"steps", r.steps},
            {"provider_refused", r.provider_refused},
            {"delivered", r.delivered},
            {"decrypted", r.decrypted},
            {"paid", r.paid},
            {"refunded", r.refunded},
            {"escrow_balance", r.escrow_balance},
            {"plaintext_digest", to_hex(r.plaintext_digest)},
            {"received_digest", to_hex(r.received_digest)},
            {"ciphertext_key", to_hex(r.ciphertext_key)}};
}

inline nlohmann::json to_json(const AttestationResult& r) {
    nlohmann::json j = {{"observation", to_hex(r.observation)},
                        {"txid", to_hex(r.txid)},
                        {"verified", r.verified},
                        {"reason", r.reason},
                        {"height", r.height},
                        {"attester", to_hex(r.attester)},
                        {"attester_matches", r.attester_matches},
                        {"tamper_rejected", r.tamper_rejected}};
    if (r.first_seen_tick) j["first_seen_tick"] = *r.first_seen_tick;
    return j;
}

// holds whichever scenario the config picked; the object must not move
// once built, its tick hook points back into it
class ScenarioDriver {
  public:
    ScenarioDriver(const RunConfig& c, World& w, BlobStore& store) {
        if (c.scenario == "voting")
            voting_.emplace(c.voting, w, c.seed);
        else if (c.scenario == "assist")
            assist_.emplace(c.assist, w, c.seed);
        else if (c.scenario == "behavior_switch")
            behavior_.emplace(c.behavior_switch, w, c.seed);
        else if (c.scenario == "s2aas")
            s2aas_.emplace(c.s2aas, w, c.seed, store);
        else if (c.scenario == "attestation")
            attestation_.emplace(c.attestation, w, c.seed, store);
        else
            throw ConfigError("unknown scenario '" + c.scenario + "'");
    }

    ScenarioDriver(const ScenarioDriver&) = delete;
    ScenarioDriver& operator=(const ScenarioDriver&) = delete;

    nlohmann::json finalize(const World& w) const {
        if (voting_) return to_json(voting_->finalize(w));
        if (assist_) return to_json(assist_->finalize(w));
        if (behavior_) return to_json(behavior_->finalize(w));
        if (s2aas_) return to_json(s2aas_->finalize(w));
        return to_json(attestation_->finalize(w));
    }

  private:
    std::optional<VotingScenario> voting_;
    std::optional<AssistScenario> assist_;
    std::optional<BehaviorSwitchScenario> behavior_;
    std::optional<S2aasScenario> s2aas_;
    std::optional<AttestationScenario> attestation_;
};

inline ChainParams main_params_from(const RunConfig& c) {
    ChainParams p;
    p.chain_id = "main";
    p.block_interval = c.main.interval;
    p.max_tx_per_block = c.main.max_tx_per_block;
    p.confirmation_depth = c.main.confirmation_depth;
    std::vector<Address> addrs;
    for (uint32_t i = 0; i < c.nodes; ++i)
        addrs.push_back(derive_address(node_keypair(c.seed, i).pub));
    if (c.funds > 0)
        for (const auto& a : addrs) p.genesis_allocation.push_back({a, c.funds});
    if (c.main.policy == "round_robin")
        p.policy = RoundRobinPolicy{addrs};
    else if (c.main.policy == "single_miner")
        p.policy = SingleMinerPolicy{addrs.at(c.main.miner)};
    else
        p.policy = PowPolicy{pow_target_from_probability(c.main.pow_probability),
                             c.main.pow_attempts};
    return p;
}

inline WorldOptions world_options_from(const RunConfig& c) {
    WorldOptions o;
    o.nodes = c.nodes;
    o.seed = c.seed;
    if (c.latency.model == "fixed")
        o.latency = FixedLatency{c.latency.ticks};
    else
        o.latency = UniformLatency{c.latency.min, c.latency.max};
    o.partitions = c.partitions;
    return o;
}

namespace run_detail {

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
}

inline void write_file(const std::filesystem::path& p, const Bytes& body) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size()));
}

// stable naming, no wall clock: scenario-s<seed>, then -2, -3 on reuse
inline std::filesystem::path claim_run_dir(const std::filesystem::path& root,
                                           const RunConfig& cfg) {
    std::filesystem::create_directories(root);
    std::string base = cfg.scenario + "-s" + std::to_string(cfg.seed);
    std::filesystem::path dir = root / base;
    for (int i = 2; std::filesystem::exists(dir); ++i)
        dir = root / (base + "-" + std::to_string(i));
    std::filesystem::create_directories(dir);
    return dir;
}

// merged log: message deliveries in wire order, then the blocks mined
// that tick, then the confirmations those blocks caused
inline std::string event_lines(const World& w, const std::vector<Delivery>& deliveries) {
    struct Ev {
        uint64_t tick;
        int pri;
        uint64_t seq;
        std::string key;
        std::string line;
    };
    std::vector<Ev> evs;
    uint64_t seq = 0;
    for (const auto& d : deliveries) {
        nlohmann::json e = {{"type", "deliver"}, {"tick", d.tick}, {"kind", d.kind},
                            {"from", d.from},    {"to", d.to},     {"chain", d.chain_id}};
        if (d.kind == "inv_response")
            e["blocks"] = d.count;
        else
            e["id"] = to_hex(d.id);
        evs.push_back({d.tick, 0, seq++, "", e.dump()});
    }
    for (const auto& [id, cs] : w.observer().chains()) {
        for (uint64_t h = 1; h <= cs.head_height(); ++h) {
            const Block& b = cs.canonical_block(h);
            nlohmann::json e = {{"type", "block"},
                                {"tick", b.header.timestamp},
                                {"chain", id},
                                {"height", h},
                                {"miner", to_hex(b.header.miner)},
                                {"txs", b.txs.size()},
                                {"digest", to_hex(b.digest())},
                                {"canonical", true}};
            evs.push_back({b.header.timestamp, 1, 0, id + "/" + to_hex(b.digest()), e.dump()});
        }
        for (const auto& dg : cs.orphans()) {
            const Block& b = cs.block(dg);
            nlohmann::json e = {{"type", "block"},
                                {"tick", b.header.timestamp},
                                {"chain", id},
                                {"height", b.header.height},
                                {"miner", to_hex(b.header.miner)},
                                {"txs", b.txs.size()},
                                {"digest", to_hex(dg)},
                                {"canonical", false}};
            evs.push_back({b.header.timestamp, 1, 0, id + "/" + to_hex(dg), e.dump()});
        }
    }
    for (const auto& [txid, t] : w.tracked()) {
        if (!t.confirm_tick) continue;
        nlohmann::json e = {{"type", "confirmed"}, {"tick", *t.confirm_tick},
                            {"chain", t.chain_id}, {"txid", to_hex(txid)},
                            {"submit_tick", t.submit_tick}, {"height", t.confirm_height}};
        evs.push_back({*t.confirm_tick, 2, 0, to_hex(txid), e.dump()});
    }
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        return std::tie(a.tick, a.pri, a.seq, a.key) < std::tie(b.tick, b.pri, b.seq, b.key);
    });
    std::string out;
    for (const auto& e : evs) {
        out += e.line;
        out += '\n';
    }
    return out;
}

inline std::string chain_sidecar(const ChainState& cs) {
    std::string out;
    for (uint64_t h = 0; h <= cs.head_height(); ++h) {
        const Block& b = cs.canonical_block(h);
        nlohmann::json e = {{"height", h},
                            {"digest", to_hex(b.digest())},
                            {"parent", to_hex(b.header.parent)},
                            {"miner", to_hex(b.header.miner)},
                            {"txs", b.txs.size()},
                            {"timestamp", b.header.timestamp}};
        out += e.dump();
        out += '\n';
    }
    return out;
}

}  // namespace run_detail

struct RunArtifacts {
    std::filesystem::path dir;
    nlohmann::json metrics;
};

inline RunArtifacts run_simulation(const RunConfig& cfg, const std::filesystem::path& out_root) {
    WorldOptions opts = world_options_from(cfg);
    ChainParams main = main_params_from(cfg);
    std::optional<ChainParams> side;
    if (cfg.scenario == "behavior_switch") {
        ChainParams s;
        s.chain_id = cfg.behavior_switch.side_chain;
        s.block_interval = cfg.side.interval;
        s.max_tx_per_block = cfg.side.max_tx_per_block;
        s.confirmation_depth = cfg.side.confirmation_depth;
        s.policy = SingleMinerPolicy{
            derive_address(node_keypair(cfg.seed, cfg.behavior_switch.subgroup.front()).pub)};
        side = std::move(s);
    }

    World world(opts, [&](ChainSet& cs) {
        cs.register_chain(main);
        if (side) cs.declare_sidechain("main", *side);
    });
    std::vector<Delivery> deliveries;
    world.set_delivery_sink([&](const Delivery& d) { deliveries.push_back(d); });
    BlobStore store;
    ScenarioDriver driver(cfg, world, store);
    world.run(cfg.duration);

    nlohmann::json metrics = world_metrics(world, cfg.duration);
    metrics["scenario"] = cfg.scenario;
    metrics["seed"] = cfg.seed;
    metrics["scenario_result"] = driver.finalize(world);

    RunArtifacts art;
    art.metrics = metrics;
    art.dir = run_detail::claim_run_dir(out_root, cfg);
    run_detail::write_file(art.dir / "config.json", to_json(cfg).dump(2) + "\n");
    run_detail::write_file(art.dir / "metrics.json", metrics.dump(2) + "\n");
    run_detail::write_file(art.dir / "events.jsonl",
                           run_detail::event_lines(world, deliveries));
    for (const auto& [id, cs] : world.observer().chains()) {
        run_detail::write_file(art.dir / ("chain_" + id + ".bin"), cs.dump());
        run_detail::write_file(art.dir / ("chain_" + id + ".jsonl"),
                               run_detail::chain_sidecar(cs));
    }
    std::filesystem::create_directories(art.dir / "blobs");
    for (const auto& [key, bytes] : store.all())
        run_detail::write_file(art.dir / "blobs" / to_hex(key), bytes);
    return art;
}

// a scenario that ends without reaching the outcome it was configured
// for is negative: artifacts are still written, the result is still
// structured, but the run command exits nonzero with this reason
inline std::optional<std::string> scenario_failure(const std::string& scenario,
                                                   const nlohmann::json& r) {
    if (scenario == "voting") {
        if (!r.contains("winner")) return "no decision: the proposal never became canonical";
        if (r.at("ballots").get<uint64_t>() == 0)
            return "no decision: zero ballots landed inside the window";
        return std::nullopt;
    }
    if (scenario == "assist") {
        if (!r.at("paid_responder").is_null()) return std::nullopt;
        if (r.at("refunded").get<bool>())
            return "no responder: the call went unanswered, escrow refunded";
        return "no responder, and the escrow still holds the reward";
    }
    if (scenario == "behavior_switch") {
        if (r.at("side_blocks").get<uint64_t>() == 0)
            return "the sidechain never produced a block";
        if (!r.at("side_single_miner").get<bool>()) return "a non-leader mined the sidechain";
        if (!r.at("main_slots_respected").get<bool>()) return "the main rotation was violated";
        if (!r.at("funds_restored").get<bool>()) return "pegged funds did not round-trip";
        return std::nullopt;
    }
    if (scenario == "s2aas") {
        if (r.at("paid").get<bool>()) return std::nullopt;
        std::string at = r.at("provider_refused").get<bool>() ? "the provider refused the hold"
                         : !r.at("delivered").get<bool>()     ? "the reading was never delivered"
                         : !r.at("decrypted").get<bool>() ? "the buyer could not decrypt it"
                                                          : "the payout never completed";
        if (r.at("refunded").get<bool>()) return "deal failed (" + at + "), escrow refunded";
        return "deal failed (" + at + "), and the escrow is stranded";
    }
    if (!r.at("verified").get<bool>())
        return "the attestation never verified: " + r.at("reason").get<std::string>();
    if (!r.at("attester_matches").get<bool>()) return "the attester is not the discoverer";
    if (!r.at("tamper_rejected").get<bool>()) return "a mutated observation still verified";
    return std::nullopt;
}

// --------------------------------------------------------------------
// report: aggregate metrics files across runs

inline int report_files(const std::vector<std::string>& files, bool machine, std::ostream& out,
                        std::ostream& err) {
    // every unusable file is named before giving up, one pass fixes all
    std::map<std::string, ScenarioAggregate> by_scenario;
    bool rejected = false;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) {
            err << "cannot read " << f << "\n";
            rejected = true;
            continue;
        }
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        nlohmann::json m;
        try {
            m = nlohmann::json::parse(body);
            fold_metrics(by_scenario[m.at("scenario").get<std::string>()], m);
        } catch (const nlohmann::json::exception& e) {
            err << f << " is not a metrics file: " << e.what() << "\n";
            rejected = true;
        }
    }
    if (rejected) return 2;

    if (machine) {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& [name, agg] : by_scenario) all.push_back(aggregate_json(name, agg));
        out << all.dump(2) << "\n";
        return 0;
    }

    for (const auto& [name, agg] : by_scenario) {
        nlohmann::json a = aggregate_json(name, agg);
        const auto& conf = a.at("confirmation");
        out << name << ": " << agg.runs << (agg.runs == 1 ? " run\n" : " runs\n");
        out << "  confirmation: " << conf.at("confirmed").get<uint64_t>() << "/"
            << conf.at("tracked").get<uint64_t>() << " confirmed, mean "
            << conf.at("mean").get<double>() << ", median " << conf.at("median").get<double>()
            << ", p95 " << conf.at("p95").get<uint64_t>() << " ticks\n";
        out << "  throughput: " << a.at("throughput_txs_per_tick").get<double>()
            << " txs/tick\n";
        out << "  orphan rate: " << a.at("orphan_rate").get<double>() * 100.0 << "% ("
            << agg.orphans << "/" << agg.blocks << " blocks)\n";
        if (agg.conservation_failures > 0)
            out << "  conservation FAILED in " << agg.conservation_failures << " runs\n";
        if (a.contains("vote_accuracy"))
            out << "  vote accuracy: " << agg.vote_truth_wins << "/" << agg.vote_runs
                << " runs picked the ground truth\n";
    }
    return 0;
}

// --------------------------------------------------------------------
// validate-chain: full structural and semantic check of a dump

inline int validate_chain_file(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "cannot read " << path << "\n";
        return 2;
    }
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Bytes data(body.begin(), body.end());

    ValidationReport rep;
    auto state = ChainState::load_dump_checked(data, rep);
    if (!state || !rep.ok) {
        out << "status: invalid (" << rep.field << " at height " << rep.height << ")\n";
        return 1;
    }
    out << "chain: " << state->params().chain_id << "\n";
    out << "head: " << to_hex(state->head()) << " height " << state->head_height() << "\n";
    out << "blocks: " << state->head_height() + 1 << " canonical, " << state->orphans().size()
        << " orphaned\n";
    out << "status: valid\n";
    return 0;
}

}  // namespace swarmledger
