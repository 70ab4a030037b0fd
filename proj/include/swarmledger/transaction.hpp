#pragma once

#include <string>
#include <vector>

#include "swarmledger/crypto.hpp"
#include "swarmledger/encoding.hpp"

namespace swarmledger {

inline constexpr size_t kMaxPayload = 1024;

enum class TxKind : uint8_t {
    transfer = 0,
    vote_proposal = 1,
    vote = 2,
    data = 3,
    multisig_call = 4,
    multisig_claim = 5,
    peg_out = 6,
    peg_in = 7,
    attestation = 8,
};

inline constexpr uint8_t kTxKindMax = 8;

inline const char* tx_kind_name(TxKind k) {
    switch (k) {
        case TxKind::transfer: return "transfer";
        case TxKind::vote_proposal: return "vote_proposal";
        case TxKind::vote: return "vote";
        case TxKind::data: return "data";
        case TxKind::multisig_call: return "multisig_call";
        case TxKind::multisig_claim: return "multisig_claim";
        case TxKind::peg_out: return "peg_out";
        case TxKind::peg_in: return "peg_in";
        case TxKind::attestation: return "attestation";
    }
    return "?";
}

struct TxOutput {
    Address to;
    uint64_t amount = 0;

    auto operator<=>(const TxOutput&) const = default;
};

struct Transaction {
    std::string chain_id;
    TxKind kind = TxKind::transfer;
    Address sender;
    uint64_t nonce = 0;
    std::vector<TxOutput> outputs;
    Bytes payload;
    std::vector<Signature> signatures;

    bool operator==(const Transaction&) const = default;

    // the signed/hashed byte sequence; signatures are excluded so a
    // partially signed tx and its fully signed form share a txid
    Bytes encode_unsigned() const {
        Encoder e;
        e.put_string(chain_id);
        e.put_u8(static_cast<uint8_t>(kind));
        e.put_fixed(sender);
        e.put_u64(nonce);
        e.put_count(outputs.size());
        for (const auto& o : outputs) {
            e.put_fixed(o.to);
            e.put_u64(o.amount);
        }
        e.put_bytes(payload);
        return e.take();
    }

    Bytes encode() const {
        Encoder e;
        e.put_raw(encode_unsigned());
        e.put_count(signatures.size());
        for (const auto& s : signatures) {
            e.put_fixed(s.bytes);
            e.put_fixed(s.signer);
        }
        return e.take();
    }

    Digest256 txid() const { return hash(encode_unsigned()); }

    uint64_t total_output() const {
        uint64_t sum = 0;
        for (const auto& o : outputs) sum += o.amount;
        return sum;
    }
};

inline Transaction decode_transaction(Decoder& d) {
    Transaction tx;
    tx.chain_id = d.get_string();
    uint8_t kind = d.get_u8();
    if (kind > kTxKindMax) throw DecodeError("unknown tx kind");
    tx.kind = static_cast<TxKind>(kind);
    tx.sender = d.get_fixed<20>();
    tx.nonce = d.get_u64();
    uint32_t n_out = d.get_count();
    if (n_out > 65536) throw DecodeError("output list too long");
    tx.outputs.reserve(n_out);
    for (uint32_t i = 0; i < n_out; ++i) {
        TxOutput o;
        o.to = d.get_fixed<20>();
        o.amount = d.get_u64();
        tx.outputs.push_back(o);
    }
    tx.payload = d.get_bytes();
    uint32_t n_sig = d.get_count();
    if (n_sig > 1024) throw DecodeError("signature list too long");
    tx.signatures.reserve(n_sig);
    for (uint32_t i = 0; i < n_sig; ++i) {
        Signature s;
        s.bytes = d.get_fixed<32>();
        s.signer = d.get_fixed<32>();
        tx.signatures.push_back(s);
    }
    return tx;
}

inline Transaction decode_transaction(const Bytes& b) {
    Decoder d(b);
    Transaction tx = decode_transaction(d);
    d.expect_end();
    return tx;
}

inline void sign_tx(Transaction& tx, const KeyPair& keys) {
    tx.signatures.push_back(sign(keys.priv, tx.encode_unsigned()));
}

}  // namespace swarmledger
