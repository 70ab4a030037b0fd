#pragma once

// Shared builders plus the independent replay oracle. The oracle
// recomputes balances from raw canonical blocks with plain arithmetic
// on purpose; it must not share logic with LedgerView.

#include <map>
#include <string>
#include <vector>

#include "swarmledger/chainset.hpp"
#include "swarmledger/rng.hpp"

namespace testsupport {

using namespace swarmledger;

inline FixedBytes<32> seed32(uint64_t n) {
    FixedBytes<32> s;
    Rng r(n ^ 0x5eed5eed5eed5eedull);
    for (size_t i = 0; i < 32; i += 8) {
        uint64_t x = r.next_u64();
        for (size_t j = 0; j < 8; ++j) s.v[i + j] = static_cast<uint8_t>(x >> (8 * j));
    }
    return s;
}

struct Actor {
    KeyPair keys;
    Address addr;
};

inline Actor actor(uint64_t n) {
    Actor a;
    a.keys = generate_keypair(seed32(n));
    a.addr = derive_address(a.keys.pub);
    return a;
}

inline Transaction make_transfer(const std::string& chain, const Actor& from, uint64_t nonce,
                                 const Address& to, uint64_t amount,
                                 TxKind kind = TxKind::transfer) {
    Transaction tx;
    tx.chain_id = chain;
    tx.kind = kind;
    tx.sender = from.addr;
    tx.nonce = nonce;
    tx.outputs.push_back({to, amount});
    sign_tx(tx, from.keys);
    return tx;
}

inline Block make_block(const std::string& chain, const Digest256& parent, uint64_t height,
                        const Address& miner, std::vector<Transaction> txs, uint64_t ts) {
    Block b;
    b.header.chain_id = chain;
    b.header.height = height;
    b.header.parent = parent;
    b.header.tx_root = tx_root_of(txs);
    b.header.miner = miner;
    b.header.timestamp = ts;
    b.txs = std::move(txs);
    return b;
}

// balances recomputed from scratch: genesis allocation, plus external
// credits, plus per-transaction debits/credits read straight off the
// canonical blocks
inline std::map<Address, uint64_t> oracle_balances(const ChainState& state) {
    std::map<Address, uint64_t> bal;
    for (const auto& a : state.params().genesis_allocation) bal[a.to] += a.amount;
    for (const auto& c : state.bridge_credits()) bal[c.to] += c.amount;
    for (uint64_t h = 1; h <= state.head_height(); ++h) {
        const Block& b = state.canonical_block(h);
        for (const auto& tx : b.txs) {
            uint64_t out = 0;
            for (const auto& o : tx.outputs) out += o.amount;
            bal[tx.sender] -= out;
            bool leaves_chain = tx.kind == TxKind::peg_out || tx.kind == TxKind::peg_in;
            if (!leaves_chain)
                for (const auto& o : tx.outputs) bal[o.to] += o.amount;
        }
    }
    return bal;
}

inline bool balances_match(const ChainState& state) {
    std::map<Address, uint64_t> want = oracle_balances(state);
    const auto& got = state.view().balances;
    for (const auto& [a, amt] : want)
        if (state.balance(a) != amt) return false;
    for (const auto& [a, amt] : got) {
        auto it = want.find(a);
        uint64_t expect = it == want.end() ? 0 : it->second;
        if (amt != expect) return false;
    }
    return true;
}

}  // namespace testsupport
