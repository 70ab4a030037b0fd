#pragma once

#include <json.hpp>

#include "swarmledger/scenarios.hpp"

namespace swarmledger {

// Run description parsed from JSON. Every knob has a default, and the
// resolved config (defaults filled in) is echoed into the run
// directory so an artifact can always be reproduced from what sits
// next to it. Anything malformed throws ConfigError, which the CLI
// maps to the usage exit code.

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"voting", "assist", "behavior_switch",
                                                   "s2aas", "attestation"};
    return names;
}

struct LatencyConfig {
    std::string model = "fixed";  // fixed | uniform
    uint64_t ticks = 1;
    uint64_t min = 1;
    uint64_t max = 3;
};

struct MainChainConfig {
    uint64_t interval = 10;
    uint32_t max_tx_per_block = 100;
    uint32_t confirmation_depth = 3;
    std::string policy = "round_robin";  // round_robin | single_miner | pow
    uint32_t miner = 0;                  // single_miner only
    double pow_probability = 0.2;
    uint32_t pow_attempts = 4;
};

struct SideChainConfig {
    uint64_t interval = 2;
    uint32_t max_tx_per_block = 50;
    uint32_t confirmation_depth = 1;
};

struct RunConfig {
    std::string scenario = "voting";
    uint64_t seed = 1;
    uint64_t duration = 200;
    uint32_t nodes = 5;
    uint64_t funds = 50;  // genesis allocation per robot
    LatencyConfig latency;
    std::vector<PartitionWindow> partitions;
    MainChainConfig main;
    VotingConfig voting;
    AssistConfig assist;
    BehaviorSwitchConfig behavior_switch;
    SideChainConfig side;
    S2aasConfig s2aas;
    AttestationConfig attestation;
};

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) known = true;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T num(const json& j, const std::string& where, const char* key, T def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    return v.get<T>();
}

inline std::string text(const json& j, const std::string& where, const char* key,
                        const std::string& def) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_string()) throw ConfigError(where + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

}  // namespace cfg_detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using namespace cfg_detail;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(j, "config",
               {"scenario", "seed", "duration", "nodes", "funds", "latency", "partitions",
                "main", "voting", "assist", "behavior_switch", "s2aas", "attestation"});

    RunConfig c;
    // every broken rule is collected so one round trip reports them all
    std::vector<std::string> violations;
    auto bad = [&](const std::string& rule) { violations.push_back(rule); };

    c.scenario = text(j, "config", "scenario", c.scenario);
    bool known = false;
    for (const auto& n : scenario_names()) known |= n == c.scenario;
    if (!known) {
        std::string msg = "unknown scenario '" + c.scenario + "'; expected one of:";
        for (const auto& n : scenario_names()) msg += " " + n;
        bad(msg);
    }
    c.seed = num<uint64_t>(j, "config", "seed", c.seed);
    c.duration = num<uint64_t>(j, "config", "duration", c.duration);
    c.nodes = num<uint32_t>(j, "config", "nodes", c.nodes);
    c.funds = num<uint64_t>(j, "config", "funds", c.funds);
    if (c.nodes < 1) bad("nodes must be at least 1");

    if (j.contains("latency")) {
        const auto& l = j.at("latency");
        check_keys(l, "latency", {"model", "ticks", "min", "max"});
        c.latency.model = text(l, "latency", "model", c.latency.model);
        c.latency.ticks = num<uint64_t>(l, "latency", "ticks", c.latency.ticks);
        c.latency.min = num<uint64_t>(l, "latency", "min", c.latency.min);
        c.latency.max = num<uint64_t>(l, "latency", "max", c.latency.max);
        if (c.latency.model != "fixed" && c.latency.model != "uniform")
            bad("latency.model must be 'fixed' or 'uniform'");
        if (c.latency.ticks < 1 || c.latency.min < 1 || c.latency.min > c.latency.max)
            bad("latency must be at least one tick, with min <= max");
    }

    if (j.contains("partitions")) {
        const auto& ps = j.at("partitions");
        if (!ps.is_array()) throw ConfigError("partitions must be an array");
        for (const auto& p : ps) {
            check_keys(p, "partitions[]", {"from", "to", "groups"});
            PartitionWindow w;
            w.from = num<uint64_t>(p, "partitions[]", "from", 0);
            w.to = num<uint64_t>(p, "partitions[]", "to", 0);
            if (!p.contains("groups") || !p.at("groups").is_array())
                throw ConfigError("partitions[].groups must be an array of node lists");
            for (const auto& g : p.at("groups")) {
                if (!g.is_array()) throw ConfigError("partition groups must be node lists");
                std::vector<NodeId> ids;
                for (const auto& id : g) ids.push_back(id.get<NodeId>());
                w.groups.push_back(std::move(ids));
            }
            if (w.from >= w.to) bad("partition window must satisfy from < to");
            if (w.to > c.duration) bad("partition window must end within the run");
            c.partitions.push_back(std::move(w));
        }
    }

    if (j.contains("main")) {
        const auto& m = j.at("main");
        check_keys(m, "main",
                   {"interval", "max_tx_per_block", "confirmation_depth", "policy", "miner",
                    "pow_probability", "pow_attempts"});
        c.main.interval = num<uint64_t>(m, "main", "interval", c.main.interval);
        c.main.max_tx_per_block =
            num<uint32_t>(m, "main", "max_tx_per_block", c.main.max_tx_per_block);
        c.main.confirmation_depth =
            num<uint32_t>(m, "main", "confirmation_depth", c.main.confirmation_depth);
        c.main.policy = text(m, "main", "policy", c.main.policy);
        c.main.miner = num<uint32_t>(m, "main", "miner", c.main.miner);
        c.main.pow_probability = num<double>(m, "main", "pow_probability", c.main.pow_probability);
        c.main.pow_attempts = num<uint32_t>(m, "main", "pow_attempts", c.main.pow_attempts);
    }
    if (c.main.policy != "round_robin" && c.main.policy != "single_miner" &&
        c.main.policy != "pow")
        bad("main.policy must be 'round_robin', 'single_miner', or 'pow'");
    if (c.main.policy == "single_miner" && c.main.miner >= c.nodes)
        bad("main.miner must name a node");
    if (c.main.policy == "pow" &&
        (c.main.pow_probability <= 0.0 || c.main.pow_probability > 1.0 ||
         c.main.pow_attempts < 1))
        bad("main.pow_probability must be in (0, 1] with at least one attempt");
    if (c.main.interval < 1 || c.main.max_tx_per_block < 1 || c.main.confirmation_depth < 1)
        bad("main chain parameters must be positive");
    if (c.main.interval >= 1 && c.duration < 2 * c.main.interval)
        bad("duration must cover at least two block intervals");

    if (j.contains("voting")) {
        const auto& v = j.at("voting");
        check_keys(v, "voting", {"options", "truth", "window", "observation_noise",
                                 "propose_tick"});
        c.voting.options = num<uint32_t>(v, "voting", "options", c.voting.options);
        c.voting.truth = num<uint32_t>(v, "voting", "truth", c.voting.truth);
        c.voting.window = num<uint32_t>(v, "voting", "window", c.voting.window);
        c.voting.observation_noise =
            num<double>(v, "voting", "observation_noise", c.voting.observation_noise);
        c.voting.propose_tick = num<uint64_t>(v, "voting", "propose_tick", c.voting.propose_tick);
    }
    if (c.voting.options < 2 || c.voting.truth >= c.voting.options || c.voting.window < 1)
        bad("voting needs >= 2 options, truth among them, window >= 1");
    if (c.voting.observation_noise < 0.0 || c.voting.observation_noise > 1.0)
        bad("voting.observation_noise must be in [0, 1]");

    if (j.contains("assist")) {
        const auto& a = j.at("assist");
        check_keys(a, "assist", {"reward", "request_tick", "travel_ticks", "batteries"});
        c.assist.reward = num<uint64_t>(a, "assist", "reward", c.assist.reward);
        c.assist.request_tick = num<uint64_t>(a, "assist", "request_tick", c.assist.request_tick);
        c.assist.travel_ticks = num<uint32_t>(a, "assist", "travel_ticks", c.assist.travel_ticks);
        if (a.contains("batteries")) {
            if (!a.at("batteries").is_array())
                throw ConfigError("assist.batteries must be an array of percentages");
            c.assist.batteries.clear();
            for (const auto& b : a.at("batteries")) c.assist.batteries.push_back(b.get<uint64_t>());
        }
    }
    if (c.scenario == "assist") {
        if (c.nodes < 2) {
            bad("assist needs a requester and at least one responder");
        } else {
            if (c.assist.batteries.empty()) c.assist.batteries.assign(c.nodes - 1, 50);
            if (c.assist.batteries.size() != c.nodes - 1)
                bad("assist.batteries needs one entry per responder");
        }
        for (uint64_t b : c.assist.batteries)
            if (b > 100) bad("battery levels are percentages");
    }

    if (j.contains("behavior_switch")) {
        const auto& b = j.at("behavior_switch");
        check_keys(b, "behavior_switch",
                   {"side_chain", "subgroup", "peg_amount", "depart_tick", "return_tick",
                    "side_interval", "side_max_tx_per_block", "side_confirmation_depth"});
        c.behavior_switch.side_chain =
            text(b, "behavior_switch", "side_chain", c.behavior_switch.side_chain);
        if (b.contains("subgroup")) {
            if (!b.at("subgroup").is_array())
                throw ConfigError("behavior_switch.subgroup must be an array of node ids");
            c.behavior_switch.subgroup.clear();
            for (const auto& id : b.at("subgroup"))
                c.behavior_switch.subgroup.push_back(id.get<NodeId>());
        }
        c.behavior_switch.peg_amount =
            num<uint64_t>(b, "behavior_switch", "peg_amount", c.behavior_switch.peg_amount);
        c.behavior_switch.depart_tick =
            num<uint64_t>(b, "behavior_switch", "depart_tick", c.behavior_switch.depart_tick);
        c.behavior_switch.return_tick =
            num<uint64_t>(b, "behavior_switch", "return_tick", c.behavior_switch.return_tick);
        c.side.interval = num<uint64_t>(b, "behavior_switch", "side_interval", c.side.interval);
        c.side.max_tx_per_block =
            num<uint32_t>(b, "behavior_switch", "side_max_tx_per_block", c.side.max_tx_per_block);
        c.side.confirmation_depth = num<uint32_t>(b, "behavior_switch", "side_confirmation_depth",
                                                  c.side.confirmation_depth);
    }
    if (c.scenario == "behavior_switch") {
        auto& bs = c.behavior_switch;
        if (bs.subgroup.empty() && c.nodes >= 1) bs.subgroup = {c.nodes - 1};
        for (NodeId id : bs.subgroup)
            if (id >= c.nodes) bad("behavior_switch.subgroup names a missing node");
        if (bs.depart_tick >= bs.return_tick || bs.return_tick >= c.duration)
            bad("behavior_switch needs depart < return < duration");
        if (bs.side_chain == "main") bad("the sidechain needs its own id");
        if (bs.side_chain.empty() ||
            bs.side_chain.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                std::string::npos)
            bad("side_chain id must be nonempty [A-Za-z0-9_-], it names files");
        if (bs.peg_amount < 1 || bs.peg_amount > c.funds)
            bad("behavior_switch.peg_amount must fit each robot's funds");
        if (c.side.interval < 1) bad("side_interval must be positive");
    }

    if (j.contains("s2aas")) {
        const auto& s = j.at("s2aas");
        check_keys(s, "s2aas",
                   {"register_tick", "query_tick", "prices", "locations", "pay_amount",
                    "data_size"});
        c.s2aas.register_tick = num<uint64_t>(s, "s2aas", "register_tick", c.s2aas.register_tick);
        c.s2aas.query_tick = num<uint64_t>(s, "s2aas", "query_tick", c.s2aas.query_tick);
        if (s.contains("prices")) {
            if (!s.at("prices").is_array())
                throw ConfigError("s2aas.prices must be an array of token amounts");
            c.s2aas.prices.clear();
            for (const auto& p : s.at("prices")) c.s2aas.prices.push_back(p.get<uint64_t>());
        }
        if (s.contains("locations")) {
            if (!s.at("locations").is_array())
                throw ConfigError("s2aas.locations must be an array of [x, y] pairs");
            c.s2aas.locations.clear();
            for (const auto& xy : s.at("locations")) {
                if (!xy.is_array() || xy.size() != 2)
                    throw ConfigError("s2aas.locations must be an array of [x, y] pairs");
                c.s2aas.locations.push_back({xy[0].get<uint32_t>(), xy[1].get<uint32_t>()});
            }
        }
        if (s.contains("pay_amount"))
            c.s2aas.pay_amount = num<uint64_t>(s, "s2aas", "pay_amount", 0);
        c.s2aas.data_size = num<uint32_t>(s, "s2aas", "data_size", c.s2aas.data_size);
    }
    if (c.scenario == "s2aas") {
        if (c.nodes < 2) {
            bad("s2aas needs a requester and at least one sensor");
        } else {
            if (c.s2aas.prices.empty()) c.s2aas.prices.assign(c.nodes - 1, 3);
            if (c.s2aas.prices.size() != c.nodes - 1) bad("s2aas.prices needs one entry per sensor");
            if (c.s2aas.locations.empty())
                for (uint32_t i = 0; i + 1 < c.nodes; ++i) c.s2aas.locations.push_back({i + 1, 1});
            if (c.s2aas.locations.size() != c.nodes - 1)
                bad("s2aas.locations needs one entry per sensor");
        }
        uint64_t cheapest = 0;
        bool priced = false;
        for (uint64_t p : c.s2aas.prices) {
            if (p < 1) bad("a sensor's price must be at least one token");
            if (!priced || p < cheapest) cheapest = p, priced = true;
        }
        if (c.s2aas.pay_amount && *c.s2aas.pay_amount < 1)
            bad("s2aas.pay_amount must be at least one token");
        // the requester pays the cheapest listing unless pay_amount overrides
        if (c.s2aas.pay_amount.value_or(priced ? cheapest : 0) > c.funds)
            bad("the payment does not fit the requester's funds");
        if (c.s2aas.data_size < 1 || c.s2aas.data_size > 512)
            bad("s2aas.data_size must be 1..512");
    }

    if (j.contains("attestation")) {
        const auto& a = j.at("attestation");
        check_keys(a, "attestation", {"discoverer", "verifier", "discovery_tick", "blob_size"});
        c.attestation.discoverer =
            num<NodeId>(a, "attestation", "discoverer", c.attestation.discoverer);
        c.attestation.verifier = num<NodeId>(a, "attestation", "verifier", c.attestation.verifier);
        c.attestation.discovery_tick =
            num<uint64_t>(a, "attestation", "discovery_tick", c.attestation.discovery_tick);
        c.attestation.blob_size = num<uint32_t>(a, "attestation", "blob_size",
                                                c.attestation.blob_size);
    }
    if (c.scenario == "attestation") {
        if (c.attestation.discoverer >= c.nodes || c.attestation.verifier >= c.nodes)
            bad("attestation robots must name existing nodes");
        if (c.attestation.blob_size < 1 || c.attestation.blob_size > 4096)
            bad("attestation.blob_size must be 1..4096");
    }

    if (violations.size() == 1) throw ConfigError(violations.front());
    if (!violations.empty()) {
        std::string msg = "config breaks " + std::to_string(violations.size()) + " rules:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
    return c;
}

inline RunConfig parse_run_config(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

// fully resolved echo of the config, defaults included
inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["scenario"] = c.scenario;
    j["seed"] = c.seed;
    j["duration"] = c.duration;
    j["nodes"] = c.nodes;
    j["funds"] = c.funds;
    j["latency"] = {{"model", c.latency.model},
                    {"ticks", c.latency.ticks},
                    {"min", c.latency.min},
                    {"max", c.latency.max}};
    j["partitions"] = nlohmann::json::array();
    for (const auto& w : c.partitions)
        j["partitions"].push_back({{"from", w.from}, {"to", w.to}, {"groups", w.groups}});
    j["main"] = {{"interval", c.main.interval},
                 {"max_tx_per_block", c.main.max_tx_per_block},
                 {"confirmation_depth", c.main.confirmation_depth},
                 {"policy", c.main.policy},
                 {"miner", c.main.miner},
                 {"pow_probability", c.main.pow_probability},
                 {"pow_attempts", c.main.pow_attempts}};
    j["voting"] = {{"options", c.voting.options},
                   {"truth", c.voting.truth},
                   {"window", c.voting.window},
                   {"observation_noise", c.voting.observation_noise},
                   {"propose_tick", c.voting.propose_tick}};
    j["assist"] = {{"reward", c.assist.reward},
                   {"request_tick", c.assist.request_tick},
                   {"travel_ticks", c.assist.travel_ticks},
                   {"batteries", c.assist.batteries}};
    nlohmann::json bs = {{"side_chain", c.behavior_switch.side_chain},
                         {"subgroup", c.behavior_switch.subgroup},
                         {"peg_amount", c.behavior_switch.peg_amount},
                         {"depart_tick", c.behavior_switch.depart_tick},
                         {"return_tick", c.behavior_switch.return_tick},
                         {"side_interval", c.side.interval},
                         {"side_max_tx_per_block", c.side.max_tx_per_block},
                         {"side_confirmation_depth", c.side.confirmation_depth}};
    j["behavior_switch"] = bs;
    nlohmann::json s2 = {{"register_tick", c.s2aas.register_tick},
                         {"query_tick", c.s2aas.query_tick},
                         {"prices", c.s2aas.prices},
                         {"locations", c.s2aas.locations},
                         {"data_size", c.s2aas.data_size}};
    if (c.s2aas.pay_amount) s2["pay_amount"] = *c.s2aas.pay_amount;
    j["s2aas"] = s2;
    j["attestation"] = {{"discoverer", c.attestation.discoverer},
                        {"verifier", c.attestation.verifier},
                        {"discovery_tick", c.attestation.discovery_tick},
                        {"blob_size", c.attestation.blob_size}};
    return j;
}

}  // namespace swarmledger
