#pragma once

#include "swarmledger/netsim.hpp"

namespace swarmledger {

// A robot is a ledger identity bound to one simulated node. The node
// already owns the chain views and gossip; the robot adds the signing
// key, a private randomness stream for behavior decisions, and the
// next unused nonce per chain.
struct Robot {
    NodeId node = 0;
    KeyPair keys;
    Address addr;
    Rng rng{0};
    std::map<std::string, uint64_t> used_nonce;

    const ChainState& chain(const World& w, const std::string& id) const {
        return w.node(node).chains.at(id);
    }
};

inline Bytes random_bytes(Rng& rng, size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<uint8_t>(rng.uniform_u64(0, 255));
    return out;
}

inline Robot make_robot(const World& w, NodeId id, uint64_t scenario_seed) {
    Robot r;
    r.node = id;
    r.keys = w.node(id).keys;
    r.addr = w.node(id).addr;
    r.rng = Rng(derive_seed(scenario_seed, 2000 + id));
    return r;
}

inline Transaction build_tx(Robot& r, const std::string& chain_id, TxKind kind,
                            std::vector<TxOutput> outputs, Bytes payload = {}) {
    Transaction tx;
    tx.chain_id = chain_id;
    tx.kind = kind;
    tx.sender = r.addr;
    tx.nonce = ++r.used_nonce[chain_id];
    tx.outputs = std::move(outputs);
    tx.payload = std::move(payload);
    sign_tx(tx, r.keys);
    return tx;
}

// unsigned escrow spend; each party appends its own signature
inline Transaction build_claim(const std::string& chain_id, const MultisigSpec& spec,
                               const Digest256& call_txid, uint64_t nonce,
                               std::vector<TxOutput> outputs) {
    Transaction tx;
    tx.chain_id = chain_id;
    tx.kind = TxKind::multisig_claim;
    tx.sender = derive_multisig_address(spec);
    tx.nonce = nonce;
    tx.outputs = std::move(outputs);
    tx.payload = encode_claim_payload(spec, call_txid);
    return tx;
}

// --------------------------------------------------------------------
// assistance market

// Price floor for taking an assistance job. A drained robot accepts
// cheap work because it needs recharge credit soon; a charged one can
// afford to hold out. Monotone in battery so decisions stay stable as
// charge drifts.
inline uint64_t assist_min_price(uint64_t battery_pct) { return 1 + battery_pct / 10; }

inline bool assist_accepts(uint64_t battery_pct, uint64_t offered) {
    return offered >= assist_min_price(battery_pct);
}

// per-responder entry in an assistance call: the requester's location,
// encrypted so only the addressed responder can read it
struct AssistOffer {
    PublicKey responder;
    Bytes ciphertext;
};

inline Bytes encode_assist_offers(const std::vector<AssistOffer>& offers) {
    Encoder e;
    e.put_count(offers.size());
    for (const auto& o : offers) {
        e.put_fixed(o.responder);
        e.put_bytes(o.ciphertext);
    }
    return e.take();
}

inline std::optional<std::vector<AssistOffer>> parse_assist_offers(const Bytes& payload) {
    try {
        Decoder d(payload);
        uint32_t n = d.get_count();
        if (n > 64) return std::nullopt;
        std::vector<AssistOffer> out;
        out.reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
            AssistOffer o;
            o.responder = d.get_fixed<32>();
            o.ciphertext = d.get_bytes();
            out.push_back(std::move(o));
        }
        d.expect_end();
        return out;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

// --------------------------------------------------------------------
// sensing-market messages (data-kind payloads)

enum class ServiceTag : uint8_t { listing = 1 };

// registry entry a sensor publishes: who it is, where it sits, what a
// reading costs; anyone can rebuild the registry by scanning the chain
struct SensorListing {
    Address sensor;
    uint32_t x = 0;  // grid location
    uint32_t y = 0;
    uint64_t price = 0;
};

inline Bytes encode_sensor_listing(const SensorListing& l) {
    Encoder e;
    e.put_u8(static_cast<uint8_t>(ServiceTag::listing));
    e.put_fixed(l.sensor);
    e.put_u32(l.x);
    e.put_u32(l.y);
    e.put_u64(l.price);
    return e.take();
}

inline std::optional<SensorListing> parse_sensor_listing(const Bytes& payload) {
    try {
        Decoder d(payload);
        if (d.get_u8() != static_cast<uint8_t>(ServiceTag::listing)) return std::nullopt;
        SensorListing l;
        l.sensor = d.get_fixed<20>();
        l.x = d.get_u32();
        l.y = d.get_u32();
        l.price = d.get_u64();
        d.expect_end();
        return l;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

// the reading itself stays off chain; the delivery payload is the pair
// (blob store key, content hash) sealed to the payer's key, so only
// the payer learns where the data sits or what digest to expect
struct DeliveryNote {
    Digest256 link;          // blob store key of the reading
    Digest256 content_hash;  // digest the recovered bytes must match
};

inline Bytes seal_delivery_note(const PublicKey& payer, const DeliveryNote& n) {
    Encoder e;
    e.put_fixed(n.link);
    e.put_fixed(n.content_hash);
    return encrypt_for(payer, e.take());
}

inline std::optional<DeliveryNote> open_delivery_note(const PrivateKey& priv,
                                                      const Bytes& payload) {
    auto plain = decrypt(priv, payload);
    if (!plain) return std::nullopt;
    try {
        Decoder d(*plain);
        DeliveryNote n;
        n.link = d.get_fixed<32>();
        n.content_hash = d.get_fixed<32>();
        d.expect_end();
        return n;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

// --------------------------------------------------------------------
// vote tallying

struct VoteTally {
    Digest256 proposal;
    uint64_t proposal_height = 0;
    uint32_t window = 0;
    std::vector<std::pair<Address, uint64_t>> counts;  // proposal option order
    uint64_t ballots = 0;  // ballots inside the window
    uint64_t late = 0;     // valid ballots mined after it closed
    Address winner;
};

// Counts canonical ballots mined in the window: the proposal's own
// block plus the `window` blocks after it. Later ballots spend their
// token but do not count. Ties go to the lowest option address.
inline std::optional<VoteTally> tally_votes(const ChainState& cs, const Digest256& proposal_txid) {
    auto found = cs.find_canonical_tx(proposal_txid);
    if (!found || found->first.kind != TxKind::vote_proposal) return std::nullopt;
    auto p = parse_vote_proposal_payload(found->first.payload);
    if (!p) return std::nullopt;

    VoteTally t;
    t.proposal = proposal_txid;
    t.proposal_height = found->second;
    t.window = p->window;

    std::map<Address, uint64_t> by_option;
    for (const auto& o : p->options) by_option.emplace(o, 0);
    Bytes want = to_bytes(proposal_txid);
    uint64_t close = t.proposal_height + t.window;
    for (uint64_t h = t.proposal_height; h <= cs.head_height(); ++h) {
        for (const auto& tx : cs.canonical_block(h).txs) {
            if (tx.kind != TxKind::vote || tx.payload != want) continue;
            if (h > close) {
                t.late++;
                continue;
            }
            by_option[tx.outputs[0].to]++;  // option membership held at validation
            t.ballots++;
        }
    }
    for (const auto& o : p->options) t.counts.emplace_back(o, by_option[o]);
    uint64_t best = 0;
    for (const auto& [addr, n] : by_option) {  // address order, so ties keep the lowest
        if (n > best) {
            best = n;
            t.winner = addr;
        }
    }
    if (best == 0) t.winner = by_option.begin()->first;
    return t;
}

// --------------------------------------------------------------------
// discovery attestations

inline Transaction register_discovery(Robot& r, const std::string& chain_id,
                                      const Digest256& observation) {
    return build_tx(r, chain_id, TxKind::attestation, {}, to_bytes(observation));
}

struct DiscoveryCheck {
    bool ok = false;
    std::string reason;
    Address attester;
    uint64_t height = 0;
    Digest256 txid;
};

// a discovery counts only once its attestation is on the canonical
// chain; mempool or orphaned copies prove nothing
inline DiscoveryCheck verify_discovery(const ChainState& cs, const Digest256& observation) {
    Bytes want = to_bytes(observation);
    for (uint64_t h = 1; h <= cs.head_height(); ++h) {
        for (const auto& tx : cs.canonical_block(h).txs) {
            if (tx.kind != TxKind::attestation || tx.payload != want) continue;
            return DiscoveryCheck{true, "ok", tx.sender, h, tx.txid()};
        }
    }
    return DiscoveryCheck{false, "not-canonical", {}, 0, {}};
}

}  // namespace swarmledger
