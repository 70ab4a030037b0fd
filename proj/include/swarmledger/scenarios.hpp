#pragma once

#include <array>

#include "swarmledger/blobstore.hpp"
#include "swarmledger/robot.hpp"

namespace swarmledger {

// Each scenario drives one swarm behavior through the simulated
// network: it installs the world's tick hook at construction, reacts
// only to what each robot's own node can see, and reads the final
// outcome off the observer after the run. Construct, run the world,
// then call finalize exactly once.

// --------------------------------------------------------------------
// collective decision by token vote

struct VotingConfig {
    std::string chain = "main";
    uint32_t options = 2;
    uint32_t truth = 0;        // option index the environment favors
    uint32_t window = 5;       // ballot-counting window, in blocks
    double observation_noise = 0.1;
    uint64_t propose_tick = 1;
};

struct VotingResult {
    Digest256 proposal;
    Address truth_option;
    std::optional<VoteTally> tally;
    bool winner_is_truth = false;
    uint32_t ballots_cast = 0;
    uint32_t missed_window = 0;
    uint32_t wrong_observations = 0;
};

class VotingScenario {
  public:
    VotingScenario(VotingConfig cfg, World& world, uint64_t seed) : cfg_(std::move(cfg)) {
        if (cfg_.options < 2) throw std::invalid_argument("a vote needs at least two options");
        if (cfg_.truth >= cfg_.options) throw std::invalid_argument("truth must be an option index");
        for (NodeId i = 0; i < world.node_count(); ++i)
            robots_.push_back(make_robot(world, i, seed));
        voted_.assign(robots_.size(), false);
        for (uint32_t i = 0; i < cfg_.options; ++i) {
            Encoder e;
            e.put_raw(str_bytes("swl/option"));
            e.put_u64(seed);
            e.put_u32(i);
            options_.push_back(derive_address(generate_keypair(hash(e.bytes())).pub));
        }
        world.set_tick_hook([this](World& w, uint64_t t) { on_tick(w, t); });
    }

    const std::vector<Address>& options() const { return options_; }
    const std::optional<Digest256>& proposal() const { return proposal_; }

    VotingResult finalize(const World& w) const {
        VotingResult out;
        out.truth_option = options_[cfg_.truth];
        out.wrong_observations = wrong_;
        out.missed_window = missed_;
        out.ballots_cast = cast_;
        if (proposal_) {
            out.proposal = *proposal_;
            out.tally = tally_votes(w.observer().at(cfg_.chain), *proposal_);
            if (out.tally) out.winner_is_truth = out.tally->winner == out.truth_option;
        }
        return out;
    }

  private:
    void on_tick(World& w, uint64_t tick) {
        if (tick == cfg_.propose_tick) {
            Transaction p = build_tx(robots_[0], cfg_.chain, TxKind::vote_proposal, {},
                                     encode_vote_proposal_payload(cfg_.window, options_));
            proposal_ = p.txid();
            w.submit_tx(robots_[0].node, p);
        }
        if (!proposal_) return;
        for (size_t i = 0; i < robots_.size(); ++i) {
            if (voted_[i]) continue;
            Robot& r = robots_[i];
            const ChainState& cs = r.chain(w, cfg_.chain);
            auto it = cs.view().proposals.find(*proposal_);
            if (it == cs.view().proposals.end()) continue;
            voted_[i] = true;
            if (cs.head_height() + 1 > it->second.height + it->second.window) {
                missed_++;  // learned of the proposal too late to be counted
                continue;
            }
            uint32_t pick = observe(r);
            Transaction ballot =
                build_tx(r, cfg_.chain, TxKind::vote, {{options_[pick], 1}}, to_bytes(*proposal_));
            if (w.submit_tx(r.node, ballot)) cast_++;
        }
    }

    // each robot reads the environment through its own noisy sensor
    uint32_t observe(Robot& r) {
        if (!r.rng.bernoulli(cfg_.observation_noise)) return cfg_.truth;
        wrong_++;
        uint32_t shift = static_cast<uint32_t>(r.rng.uniform_u64(1, cfg_.options - 1));
        return (cfg_.truth + shift) % cfg_.options;
    }

    VotingConfig cfg_;
    std::vector<Robot> robots_;
    std::vector<Address> options_;
    std::vector<bool> voted_;
    std::optional<Digest256> proposal_;
    uint32_t cast_ = 0;
    uint32_t missed_ = 0;
    uint32_t wrong_ = 0;
};

// --------------------------------------------------------------------
// paid physical assistance through a 2-of-n escrow

struct AssistConfig {
    std::string chain = "main";
    uint64_t reward = 8;
    uint64_t request_tick = 5;
    uint32_t travel_ticks = 7;
    std::vector<uint64_t> batteries;  // percent, one per responder (robots 1..n-1)
};

struct AssistResponderOutcome {
    uint64_t battery = 0;
    bool decided = false;
    bool accepted = false;
    bool location_ok = false;
    std::optional<uint64_t> arrival_tick;
};

struct AssistResult {
    Digest256 call;
    Address escrow;
    uint64_t reward = 0;
    std::vector<AssistResponderOutcome> responders;
    std::optional<uint32_t> paid_responder;
    bool refunded = false;
    uint64_t escrow_balance = 0;
};

// Robot 0 is stuck: it locks the reward behind a 2-of-n hold shared
// with every potential responder, and ships its position encrypted per
// responder so bystanders learn nothing. A responder whose price floor
// the reward clears drives over and submits a half-signed payout;
// robot 0 countersigns only for help that actually arrived. An
// unanswered call is reclaimed after the ledger's escrow timeout.
class AssistScenario {
  public:
    AssistScenario(AssistConfig cfg, World& world, uint64_t seed) : cfg_(std::move(cfg)) {
        if (world.node_count() < 2)
            throw std::invalid_argument("assist needs a requester and at least one responder");
        if (cfg_.batteries.size() != world.node_count() - 1)
            throw std::invalid_argument("one battery level per responder");
        for (NodeId i = 0; i < world.node_count(); ++i)
            robots_.push_back(make_robot(world, i, seed));
        st_.resize(cfg_.batteries.size());
        for (size_t i = 0; i < st_.size(); ++i) st_[i].battery = cfg_.batteries[i];
        spec_.m = 2;
        for (const auto& r : robots_) spec_.pubkeys.push_back(r.keys.pub);
        spec_ = spec_.canonical();
        escrow_ = derive_multisig_address(spec_);
        Rng loc_rng(derive_seed(seed, 3));
        location_ = random_bytes(loc_rng, 16);
        world.set_tick_hook([this](World& w, uint64_t t) { on_tick(w, t); });
    }

    const Address& escrow() const { return escrow_; }
    const MultisigSpec& spec() const { return spec_; }
    const std::optional<Digest256>& call() const { return call_; }
    const Bytes& location() const { return location_; }

    AssistResult finalize(const World& w) const {
        AssistResult out;
        out.reward = cfg_.reward;
        out.escrow = escrow_;
        for (const auto& rs : st_)
            out.responders.push_back(
                {rs.battery, rs.decided, rs.accepted, rs.location_ok, rs.arrival});
        const ChainState& cs = w.observer().at(cfg_.chain);
        out.escrow_balance = cs.view().balance(escrow_);
        if (!call_) return out;
        out.call = *call_;
        for (uint64_t h = 1; h <= cs.head_height(); ++h) {
            for (const auto& tx : cs.canonical_block(h).txs) {
                if (tx.kind != TxKind::multisig_claim || tx.sender != escrow_) continue;
                auto c = parse_claim_payload(tx.payload);
                if (!c || c->call_txid != *call_) continue;
                const Address& to = tx.outputs[0].to;
                if (to == robots_[0].addr) out.refunded = true;
                for (size_t i = 1; i < robots_.size(); ++i)
                    if (robots_[i].addr == to) out.paid_responder = static_cast<uint32_t>(i - 1);
            }
        }
        return out;
    }

  private:
    struct ResponderState {
        uint64_t battery = 0;
        bool decided = false;
        bool accepted = false;
        bool location_ok = false;
        bool on_site = false;
        bool claimed = false;
        std::optional<uint64_t> arrival;
    };

    void on_tick(World& w, uint64_t tick) {
        if (tick == cfg_.request_tick) {
            std::vector<AssistOffer> offers;
            for (size_t i = 1; i < robots_.size(); ++i)
                offers.push_back(
                    {robots_[i].keys.pub, encrypt_for(robots_[i].keys.pub, location_)});
            Transaction call = build_tx(robots_[0], cfg_.chain, TxKind::multisig_call,
                                        {{escrow_, cfg_.reward}}, encode_assist_offers(offers));
            call_ = call.txid();
            w.submit_tx(robots_[0].node, call);
        }
        if (!call_) return;

        for (size_t i = 1; i < robots_.size(); ++i) {
            ResponderState& rs = st_[i - 1];
            Robot& r = robots_[i];
            const ChainState& cs = r.chain(w, cfg_.chain);
            if (!rs.decided) {
                auto found = cs.find_canonical_tx(*call_);
                if (!found) continue;
                rs.decided = true;
                if (auto offers = parse_assist_offers(found->first.payload)) {
                    for (const auto& o : *offers)
                        if (o.responder == r.keys.pub)
                            rs.location_ok = decrypt(r.keys.priv, o.ciphertext).has_value();
                }
                if (rs.location_ok && assist_accepts(rs.battery, found->first.total_output())) {
                    rs.accepted = true;
                    rs.arrival = tick + cfg_.travel_ticks;
                }
            }
            if (rs.accepted && !rs.claimed && tick >= *rs.arrival) {
                rs.claimed = true;
                rs.on_site = true;
                Transaction claim =
                    build_claim(cfg_.chain, spec_, *call_, 1, {{r.addr, cfg_.reward}});
                sign_tx(claim, r.keys);
                w.submit_tx(r.node, claim, false);
            }
        }

        Robot& req = robots_[0];
        const ChainState& rcs = req.chain(w, cfg_.chain);
        if (!cosigned_) {
            for (const auto& tx : rcs.mempool()) {
                if (tx.kind != TxKind::multisig_claim || tx.sender != escrow_) continue;
                if (tx.signatures.size() != 1) continue;
                auto c = parse_claim_payload(tx.payload);
                if (!c || c->call_txid != *call_) continue;
                auto idx = responder_of(tx.signatures[0].signer);
                if (!idx || !st_[*idx].on_site) continue;  // pay only for help received
                const Address& payee = robots_[*idx + 1].addr;
                bool clean = tx.total_output() == cfg_.reward &&
                             std::all_of(tx.outputs.begin(), tx.outputs.end(),
                                         [&](const TxOutput& o) { return o.to == payee; });
                if (!clean) continue;
                Transaction full = tx;
                sign_tx(full, req.keys);
                cosigned_ = true;
                w.submit_tx(req.node, full);
                break;
            }
        }

        if (!cosigned_ && !refund_sent_) {
            auto found = rcs.find_canonical_tx(*call_);
            if (found && rcs.view().balance(escrow_) >= cfg_.reward &&
                rcs.head_height() + 1 > found->second + kEscrowTimeoutBlocks) {
                Transaction refund =
                    build_claim(cfg_.chain, spec_, *call_, 1, {{req.addr, cfg_.reward}});
                sign_tx(refund, req.keys);
                refund_sent_ = true;
                w.submit_tx(req.node, refund);
            }
        }
    }

    std::optional<size_t> responder_of(const PublicKey& pub) const {
        for (size_t i = 1; i < robots_.size(); ++i)
            if (robots_[i].keys.pub == pub) return i - 1;
        return std::nullopt;
    }

    AssistConfig cfg_;
    std::vector<Robot> robots_;
    std::vector<ResponderState> st_;
    MultisigSpec spec_;
    Address escrow_;
    Bytes location_;
    std::optional<Digest256> call_;
    bool cosigned_ = false;
    bool refund_sent_ = false;
};

// --------------------------------------------------------------------
// subgroup departs to a sidechain with its own rules, then returns

struct BehaviorSwitchConfig {
    std::string main_chain = "main";
    std::string side_chain = "survey";
    std::vector<NodeId> subgroup;  // first entry leads and mines the sidechain
    uint64_t peg_amount = 25;
    uint64_t depart_tick = 10;
    uint64_t return_tick = 400;
};

struct BehaviorSwitchResult {
    uint64_t side_blocks = 0;
    bool side_single_miner = true;
    uint64_t main_blocks = 0;
    bool main_slots_respected = true;
    uint64_t widest_main_gap = 0;  // ticks between consecutive main blocks
    uint64_t beacons = 0;          // canonical survey records on the sidechain
    bool funds_restored = true;    // pegs round-tripped, sidechain drained
};

// The departing robots move their stake to a declared sidechain (the
// first canonical peg creates it), stop serving their main-chain miner
// slots while away, and log survey beacons under the sidechain's own
// cadence. Returning reverses it: peg back, resume the main rotation.
// While they are gone the main chain stalls at the first absent slot;
// that is the cost of a strict rotation, not an error.
class BehaviorSwitchScenario {
  public:
    BehaviorSwitchScenario(BehaviorSwitchConfig cfg, World& world, uint64_t seed)
        : cfg_(std::move(cfg)) {
        if (cfg_.subgroup.empty()) throw std::invalid_argument("subgroup must not be empty");
        if (cfg_.return_tick <= cfg_.depart_tick)
            throw std::invalid_argument("return must come after departure");
        for (NodeId id : cfg_.subgroup) {
            if (id >= world.node_count()) throw std::invalid_argument("subgroup node out of range");
            if (!st_.emplace(id, DeparterState{}).second)
                throw std::invalid_argument("duplicate subgroup node");
            robots_.emplace(id, make_robot(world, id, seed));
        }
        if (world.observer().peg_target_kind(cfg_.side_chain) == PegTarget::unknown)
            throw std::invalid_argument("sidechain must be declared before the run");
        world.set_tick_hook([this](World& w, uint64_t t) { on_tick(w, t); });
    }

    BehaviorSwitchResult finalize(const World& w) const {
        BehaviorSwitchResult out;
        const ChainState& main = w.observer().at(cfg_.main_chain);
        out.main_blocks = main.head_height();
        const auto* rr = std::get_if<RoundRobinPolicy>(&main.params().policy);
        uint64_t prev_ts = main.canonical_block(0).header.timestamp;
        for (uint64_t h = 1; h <= main.head_height(); ++h) {
            const Block& b = main.canonical_block(h);
            if (rr && b.header.miner != rr->miners[h % rr->miners.size()])
                out.main_slots_respected = false;
            out.widest_main_gap = std::max(out.widest_main_gap, b.header.timestamp - prev_ts);
            prev_ts = b.header.timestamp;
        }
        if (w.observer().has_chain(cfg_.side_chain)) {
            const ChainState& side = w.observer().at(cfg_.side_chain);
            const auto* single = std::get_if<SingleMinerPolicy>(&side.params().policy);
            out.side_blocks = side.head_height();
            for (uint64_t h = 1; h <= side.head_height(); ++h) {
                const Block& b = side.canonical_block(h);
                if (single && b.header.miner != single->miner) out.side_single_miner = false;
                for (const auto& tx : b.txs)
                    if (tx.kind == TxKind::data) out.beacons++;
            }
            for (const auto& [id, ds] : st_) {
                const Address& a = robots_.at(id).addr;
                if (side.view().balance(a) != 0 ||
                    main.view().balance(a) < cfg_.peg_amount)
                    out.funds_restored = false;
            }
        } else {
            out.funds_restored = false;
        }
        return out;
    }

  private:
    struct DeparterState {
        std::optional<Digest256> peg_out;
        std::optional<Digest256> peg_in;
        bool departed = false;
        bool returning = false;
        uint64_t last_beacon = 0;
    };

    void on_tick(World& w, uint64_t tick) {
        if (tick == cfg_.depart_tick) {
            for (NodeId id : cfg_.subgroup) {
                Robot& r = robots_.at(id);
                Transaction peg =
                    build_tx(r, cfg_.main_chain, TxKind::peg_out, {{r.addr, cfg_.peg_amount}},
                             encode_peg_payload(cfg_.side_chain));
                st_.at(id).peg_out = peg.txid();
                w.submit_tx(r.node, peg);
            }
        }
        for (auto& [id, ds] : st_) {
            Robot& r = robots_.at(id);
            if (ds.peg_out && !ds.departed &&
                r.chain(w, cfg_.main_chain).find_canonical_tx(*ds.peg_out)) {
                ds.departed = true;
                w.set_mining(id, cfg_.main_chain, false);
            }
            if (ds.departed && !ds.returning && w.node(r.node).chains.has_chain(cfg_.side_chain)) {
                const ChainState& side = r.chain(w, cfg_.side_chain);
                if (side.head_height() > ds.last_beacon) {
                    ds.last_beacon = side.head_height();
                    Encoder e;
                    e.put_raw(str_bytes("survey"));
                    e.put_u64(side.head_height());
                    e.put_u32(id);
                    w.submit_tx(r.node,
                                build_tx(r, cfg_.side_chain, TxKind::data, {}, e.take()), false);
                }
            }
        }
        if (tick == cfg_.return_tick) {
            for (auto& [id, ds] : st_) {
                Robot& r = robots_.at(id);
                ds.returning = true;
                if (w.node(r.node).chains.has_chain(cfg_.side_chain)) {
                    uint64_t bal = r.chain(w, cfg_.side_chain).view().balance(r.addr);
                    if (bal > 0) {
                        Transaction back =
                            build_tx(r, cfg_.side_chain, TxKind::peg_in, {{r.addr, bal}},
                                     encode_peg_payload(cfg_.main_chain));
                        ds.peg_in = back.txid();
                        w.submit_tx(r.node, back);
                    }
                }
                w.set_mining(id, cfg_.main_chain, true);
            }
        }
        // the leader parks the sidechain once every return peg is through
        if (!side_parked_ && tick > cfg_.return_tick) {
            NodeId leader = cfg_.subgroup.front();
            Robot& lead = robots_.at(leader);
            if (!w.node(lead.node).chains.has_chain(cfg_.side_chain)) return;
            const ChainState& side = lead.chain(w, cfg_.side_chain);
            for (const auto& [id, ds] : st_)
                if (ds.peg_in && !side.find_canonical_tx(*ds.peg_in)) return;
            side_parked_ = true;
            w.set_mining(leader, cfg_.side_chain, false);
        }
    }

    BehaviorSwitchConfig cfg_;
    std::map<NodeId, Robot> robots_;
    std::map<NodeId, DeparterState> st_;
    bool side_parked_ = false;
};

// --------------------------------------------------------------------
// sensing as a service: data sold against a direct on-chain payment

struct S2aasConfig {
    std::string chain = "main";
    uint64_t register_tick = 2;  // sensors publish their listings
    uint64_t query_tick = 1;     // requester starts scanning the registry
    std::vector<uint64_t> prices;               // one per sensor, nodes 1..n-1
    std::vector<std::array<uint32_t, 2>> locations;  // grid spot per sensor
    std::optional<uint64_t> pay_amount;  // defaults to the chosen sensor's price
    uint32_t data_size = 64;             // bytes of sensed reading
};

struct S2aasResult {
    uint32_t registrations = 0;     // listings the requester's scan returned
    std::optional<NodeId> chosen;   // sensor picked off the list
    uint64_t price = 0;             // its listed price
    uint64_t paid = 0;              // what actually changed hands
    bool underpaid = false;         // below price: ignored, never refunded
    bool delivered = false;
    bool success = false;           // recovered reading matches the sealed hash
    bool note_private = true;       // no other key in the run opens the note
    Digest256 content_hash;         // what the sensor measured
    Digest256 received_hash;        // what the requester recovered
    Digest256 blob_key;             // off-chain store key of the reading
    // tick each step completed, in flow order
    std::optional<uint64_t> registered_tick, queried_tick, listed_tick, paid_tick,
        confirmed_tick, delivered_tick, verified_tick;
};

// Robot 0 buys a reading off the swarm's registry. Sensors list their
// address, grid spot, and price as data transactions; the requester
// scans its own canonical view, picks the cheapest listing, and pays
// that sensor's address directly. Once the payment sits k blocks deep
// on the sensor's view it senses once, parks the reading off chain,
// and posts the sealed (link, hash) note; the requester opens the
// note, fetches the blob, and checks the hash. A payment under the
// listed price is ignored: the money still moves, the data never
// comes.
class S2aasScenario {
  public:
    S2aasScenario(S2aasConfig cfg, World& world, uint64_t seed, BlobStore& store)
        : cfg_(std::move(cfg)), store_(&store), rng_(derive_seed(seed, 4)) {
        if (world.node_count() < 2)
            throw std::invalid_argument("s2aas needs a requester and at least one sensor");
        uint32_t sensors = world.node_count() - 1;
        if (cfg_.prices.empty()) cfg_.prices.assign(sensors, 3);
        if (cfg_.prices.size() != sensors) throw std::invalid_argument("one price per sensor");
        if (cfg_.locations.empty())
            for (uint32_t i = 0; i < sensors; ++i) cfg_.locations.push_back({i + 1, 1});
        if (cfg_.locations.size() != sensors)
            throw std::invalid_argument("one grid spot per sensor");
        for (NodeId id = 0; id < world.node_count(); ++id)
            robots_.push_back(make_robot(world, id, seed));
        served_.assign(world.node_count(), false);
        world.set_tick_hook([this](World& w, uint64_t t) { on_tick(w, t); });
    }

    S2aasResult finalize(const World& w) const {
        S2aasResult out;
        out.registrations = registrations_;
        out.chosen = chosen_;
        out.price = price_;
        out.paid = paid_amount_;
        out.delivered = delivered_tick_.has_value();
        if (content_hash_) out.content_hash = *content_hash_;
        if (received_hash_) out.received_hash = *received_hash_;
        if (blob_key_) out.blob_key = *blob_key_;
        out.success = received_hash_ && content_hash_ && *received_hash_ == *content_hash_;
        const ChainState& cs = w.observer().at(cfg_.chain);
        out.underpaid =
            payment_ && paid_amount_ < price_ && cs.find_canonical_tx(*payment_).has_value();
        if (delivery_txid_) {
            if (auto found = cs.find_canonical_tx(*delivery_txid_)) {
                for (const Robot& r : robots_) {
                    if (r.node == 0) continue;
                    if (decrypt(r.keys.priv, found->first.payload)) out.note_private = false;
                }
            }
        }
        out.registered_tick = registered_tick_;
        out.queried_tick = queried_tick_;
        out.listed_tick = listed_tick_;
        out.paid_tick = paid_tick_;
        out.confirmed_tick = confirmed_tick_;
        out.delivered_tick = delivered_tick_;
        out.verified_tick = verified_tick_;
        return out;
    }

  private:
    const Robot* roster_by_addr(const Address& a) const {
        for (const Robot& r : robots_)
            if (r.addr == a) return &r;
        return nullptr;
    }

    void on_tick(World& w, uint64_t tick) {
        Robot& req = robots_[0];
        const ChainState& rcs = req.chain(w, cfg_.chain);

        if (tick == cfg_.register_tick) {
            for (uint32_t i = 1; i < robots_.size(); ++i) {
                Robot& s = robots_[i];
                SensorListing l{s.addr, cfg_.locations[i - 1][0], cfg_.locations[i - 1][1],
                                cfg_.prices[i - 1]};
                Transaction tx =
                    build_tx(s, cfg_.chain, TxKind::data, {}, encode_sensor_listing(l));
                w.submit_tx(s.node, tx);
            }
            registered_tick_ = tick;
        }

        // the registry is whatever listings are canonical when the scan
        // first comes back nonempty; cheapest wins, ties go to the lowest
        // address so every node would pick the same sensor
        if (!chosen_ && tick >= cfg_.query_tick) {
            std::map<Address, SensorListing> listings;
            for (uint64_t h = 1; h <= rcs.head_height(); ++h) {
                for (const auto& tx : rcs.canonical_block(h).txs) {
                    if (tx.kind != TxKind::data) continue;
                    auto l = parse_sensor_listing(tx.payload);
                    if (!l || l->sensor != tx.sender) continue;  // no listing someone else
                    listings.emplace(l->sensor, *l);
                }
            }
            if (!listings.empty()) {
                queried_tick_ = listed_tick_ = tick;
                registrations_ = static_cast<uint32_t>(listings.size());
                const SensorListing* best = nullptr;
                for (const auto& [addr, l] : listings)
                    if (!best || l.price < best->price) best = &l;
                const Robot* sensor = roster_by_addr(best->sensor);
                if (sensor) {
                    chosen_ = sensor->node;
                    price_ = best->price;
                    paid_amount_ = cfg_.pay_amount.value_or(price_);
                    Transaction pay = build_tx(req, cfg_.chain, TxKind::transfer,
                                               {{best->sensor, paid_amount_}});
                    payment_ = pay.txid();
                    w.submit_tx(req.node, pay);
                    paid_tick_ = tick;
                }
            }
        }

        // each sensor watches its own view for an incoming payment k
        // blocks deep; a payment under its price is observed and ignored,
        // a sufficient one is served exactly once
        for (uint32_t i = 1; i < robots_.size(); ++i) {
            if (served_[i]) continue;
            Robot& s = robots_[i];
            const ChainState& scs = s.chain(w, cfg_.chain);
            uint32_t k = scs.params().confirmation_depth;
            for (uint64_t h = 1; h + k - 1 <= scs.head_height() && !served_[i]; ++h) {
                for (const auto& tx : scs.canonical_block(h).txs) {
                    if (tx.kind != TxKind::transfer) continue;
                    uint64_t to_me = 0;
                    for (const auto& o : tx.outputs)
                        if (o.to == s.addr) to_me += o.amount;
                    if (to_me == 0) continue;
                    if (!confirmed_tick_) confirmed_tick_ = tick;
                    if (to_me < cfg_.prices[i - 1]) continue;
                    const Robot* payer = roster_by_addr(tx.sender);
                    if (!payer) continue;
                    Bytes reading = random_bytes(rng_, cfg_.data_size);
                    content_hash_ = hash(reading);
                    blob_key_ = store_->put(std::move(reading));
                    DeliveryNote note{*blob_key_, *content_hash_};
                    Transaction d = build_tx(s, cfg_.chain, TxKind::data, {},
                                             seal_delivery_note(payer->keys.pub, note));
                    delivery_txid_ = d.txid();
                    w.submit_tx(s.node, d);
                    delivered_tick_ = tick;
                    served_[i] = true;
                    break;
                }
            }
        }

        // the requester recognizes its delivery as the one data tx from
        // the chosen sensor that its own key opens
        if (chosen_ && !verified_tick_) {
            const Robot& sensor = robots_[*chosen_];
            for (uint64_t h = 1; h <= rcs.head_height() && !verified_tick_; ++h) {
                for (const auto& tx : rcs.canonical_block(h).txs) {
                    if (tx.kind != TxKind::data || tx.sender != sensor.addr) continue;
                    auto note = open_delivery_note(req.keys.priv, tx.payload);
                    if (!note) continue;
                    const Bytes* blob = store_->get(note->link);
                    if (!blob) continue;
                    received_hash_ = hash(*blob);
                    verified_tick_ = tick;
                    break;
                }
            }
        }
    }

    S2aasConfig cfg_;
    BlobStore* store_;
    Rng rng_;
    std::vector<Robot> robots_;
    std::vector<bool> served_;
    uint32_t registrations_ = 0;
    std::optional<NodeId> chosen_;
    uint64_t price_ = 0;
    uint64_t paid_amount_ = 0;
    std::optional<Digest256> payment_, delivery_txid_;
    std::optional<Digest256> content_hash_, received_hash_, blob_key_;
    std::optional<uint64_t> registered_tick_, queried_tick_, listed_tick_, paid_tick_,
        confirmed_tick_, delivered_tick_, verified_tick_;
};

// --------------------------------------------------------------------
// discovery attestation

struct AttestationConfig {
    std::string chain = "main";
    NodeId discoverer = 1;
    NodeId verifier = 0;
    uint64_t discovery_tick = 5;
    uint32_t blob_size = 48;
};

struct AttestationResult {
    Digest256 observation;
    Digest256 txid;
    bool verified = false;
    std::string reason;
    uint64_t height = 0;
    Address attester;
    bool attester_matches = false;
    bool tamper_rejected = false;  // a mutated observation must not verify
    std::optional<uint64_t> first_seen_tick;  // verifier's first successful check
};

// One robot hashes what it measured into the ledger; any other robot
// can later confirm who attested it and when, from its own view alone.
class AttestationScenario {
  public:
    AttestationScenario(AttestationConfig cfg, World& world, uint64_t seed, BlobStore& store)
        : cfg_(std::move(cfg)), store_(&store), rng_(derive_seed(seed, 5)) {
        if (cfg_.discoverer >= world.node_count() || cfg_.verifier >= world.node_count())
            throw std::invalid_argument("robot index out of range");
        discoverer_ = make_robot(world, cfg_.discoverer, seed);
        verifier_ = make_robot(world, cfg_.verifier, seed);
        world.set_tick_hook([this](World& w, uint64_t t) { on_tick(w, t); });
    }

    const std::optional<Digest256>& observation() const { return observation_; }

    AttestationResult finalize(const World& w) const {
        AttestationResult out;
        if (!observation_) return out;
        out.observation = *observation_;
        out.txid = txid_;
        out.first_seen_tick = first_seen_;
        const ChainState& cs = verifier_.chain(w, cfg_.chain);
        DiscoveryCheck check = verify_discovery(cs, *observation_);
        out.verified = check.ok;
        out.reason = check.reason;
        out.height = check.height;
        out.attester = check.attester;
        out.attester_matches = check.ok && check.attester == discoverer_.addr;
        Digest256 mutated = *observation_;
        mutated.v[0] ^= 0x01;
        out.tamper_rejected = !verify_discovery(cs, mutated).ok;
        return out;
    }

  private:
    void on_tick(World& w, uint64_t tick) {
        if (tick == cfg_.discovery_tick) {
            observation_ = store_->put(random_bytes(rng_, cfg_.blob_size));
            Transaction tx = register_discovery(discoverer_, cfg_.chain, *observation_);
            txid_ = tx.txid();
            w.submit_tx(discoverer_.node, tx);
        }
        if (observation_ && !first_seen_ &&
            verify_discovery(verifier_.chain(w, cfg_.chain), *observation_).ok)
            first_seen_ = tick;
    }

    AttestationConfig cfg_;
    BlobStore* store_;
    Rng rng_;
    Robot discoverer_;
    Robot verifier_;
    std::optional<Digest256> observation_;
    Digest256 txid_;
    std::optional<uint64_t> first_seen_;
};

}  // namespace swarmledger
