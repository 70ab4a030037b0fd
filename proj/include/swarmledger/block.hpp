#pragma once

#include "swarmledger/transaction.hpp"

namespace swarmledger {

struct BlockHeader {
    std::string chain_id;
    uint64_t height = 0;
    Digest256 parent;
    Digest256 tx_root;
    Address miner;
    uint64_t timestamp = 0;
    Bytes policy_proof;

    bool operator==(const BlockHeader&) const = default;

    Bytes encode() const {
        Encoder e;
        e.put_string(chain_id);
        e.put_u64(height);
        e.put_fixed(parent);
        e.put_fixed(tx_root);
        e.put_fixed(miner);
        e.put_u64(timestamp);
        e.put_bytes(policy_proof);
        return e.take();
    }

    Digest256 digest() const { return hash(encode()); }
};

inline BlockHeader decode_block_header(Decoder& d) {
    BlockHeader h;
    h.chain_id = d.get_string();
    h.height = d.get_u64();
    h.parent = d.get_fixed<32>();
    h.tx_root = d.get_fixed<32>();
    h.miner = d.get_fixed<20>();
    h.timestamp = d.get_u64();
    h.policy_proof = d.get_bytes();
    return h;
}

inline Digest256 tx_root_of(const std::vector<Transaction>& txs) {
    Bytes concat;
    concat.reserve(txs.size() * 32);
    for (const auto& tx : txs) append(concat, tx.txid());
    return hash(concat);
}

struct Block {
    BlockHeader header;
    std::vector<Transaction> txs;

    bool operator==(const Block&) const = default;

    Bytes encode() const {
        Encoder e;
        e.put_raw(header.encode());
        e.put_count(txs.size());
        for (const auto& tx : txs) e.put_bytes(tx.encode());
        return e.take();
    }

    Digest256 digest() const { return header.digest(); }
};

inline Block decode_block(Decoder& d) {
    Block b;
    b.header = decode_block_header(d);
    uint32_t n = d.get_count();
    if (n > 1u << 20) throw DecodeError("tx list too long");
    b.txs.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        Bytes raw = d.get_bytes();
        b.txs.push_back(decode_transaction(raw));
    }
    return b;
}

inline Block decode_block(const Bytes& bytes) {
    Decoder d(bytes);
    Block b = decode_block(d);
    d.expect_end();
    return b;
}

}  // namespace swarmledger
