#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <variant>

#include "swarmledger/block.hpp"
#include "swarmledger/rng.hpp"

namespace swarmledger {

// --------------------------------------------------------------------
// mining policies

struct PowPolicy {
    Digest256 target;
    // nonce draws per mining opportunity; mirrors probabilistic mining
    // without grinding real difficulty
    uint32_t attempts_per_opportunity = 8;

    bool operator==(const PowPolicy&) const = default;
};

struct RoundRobinPolicy {
    std::vector<Address> miners;

    bool operator==(const RoundRobinPolicy&) const = default;
};

struct SingleMinerPolicy {
    Address miner;

    bool operator==(const SingleMinerPolicy&) const = default;
};

using MiningPolicy = std::variant<PowPolicy, RoundRobinPolicy, SingleMinerPolicy>;

// target such that P(digest < target) is roughly p, encoded in the top
// 8 bytes of the 256-bit bound
inline Digest256 pow_target_from_probability(double p) {
    Digest256 t;
    if (p >= 1.0) {
        t.v.fill(0xff);
        return t;
    }
    if (p < 0.0) p = 0.0;
    uint64_t hi = static_cast<uint64_t>(static_cast<long double>(p) * 18446744073709551615.0L);
    for (int i = 0; i < 8; ++i) t.v[i] = static_cast<uint8_t>(hi >> (56 - 8 * i));
    return t;
}

// --------------------------------------------------------------------
// chain parameters

struct ChainParams {
    std::string chain_id;
    uint64_t block_interval = 10;
    uint32_t max_tx_per_block = 100;
    MiningPolicy policy = SingleMinerPolicy{};
    uint32_t confirmation_depth = 3;
    std::vector<TxOutput> genesis_allocation;
    uint64_t genesis_timestamp = 0;
    // set on pegged sidechains; the funding peg_out is credited by the
    // genesis allocation, so bridge settlement must skip it
    std::string parent_chain_id;
    std::optional<Digest256> funding_txid;

    bool operator==(const ChainParams&) const = default;

    bool well_formed() const {
        if (chain_id.empty() || block_interval < 1 || max_tx_per_block < 1 ||
            confirmation_depth < 1)
            return false;
        if (auto* rr = std::get_if<RoundRobinPolicy>(&policy))
            if (rr->miners.empty()) return false;
        return true;
    }

    Block genesis_block() const {
        Block g;
        g.header.chain_id = chain_id;
        g.header.height = 0;
        g.header.tx_root = tx_root_of({});
        g.header.timestamp = genesis_timestamp;
        return g;
    }

    Bytes encode() const {
        Encoder e;
        e.put_string(chain_id);
        e.put_u64(block_interval);
        e.put_u32(max_tx_per_block);
        if (auto* pow = std::get_if<PowPolicy>(&policy)) {
            e.put_u8(0);
            e.put_fixed(pow->target);
            e.put_u32(pow->attempts_per_opportunity);
        } else if (auto* rr = std::get_if<RoundRobinPolicy>(&policy)) {
            e.put_u8(1);
            e.put_count(rr->miners.size());
            for (const auto& m : rr->miners) e.put_fixed(m);
        } else {
            e.put_u8(2);
            e.put_fixed(std::get<SingleMinerPolicy>(policy).miner);
        }
        e.put_u32(confirmation_depth);
        e.put_count(genesis_allocation.size());
        for (const auto& a : genesis_allocation) {
            e.put_fixed(a.to);
            e.put_u64(a.amount);
        }
        e.put_u64(genesis_timestamp);
        e.put_string(parent_chain_id);
        e.put_u8(funding_txid ? 1 : 0);
        if (funding_txid) e.put_fixed(*funding_txid);
        return e.take();
    }

    static ChainParams decode(Decoder& d) {
        ChainParams p;
        p.chain_id = d.get_string();
        p.block_interval = d.get_u64();
        p.max_tx_per_block = d.get_u32();
        switch (d.get_u8()) {
            case 0: {
                PowPolicy pow;
                pow.target = d.get_fixed<32>();
                pow.attempts_per_opportunity = d.get_u32();
                p.policy = pow;
                break;
            }
            case 1: {
                RoundRobinPolicy rr;
                uint32_t n = d.get_count();
                if (n > 65536) throw DecodeError("miner list too long");
                for (uint32_t i = 0; i < n; ++i) rr.miners.push_back(d.get_fixed<20>());
                p.policy = rr;
                break;
            }
            case 2: {
                SingleMinerPolicy s;
                s.miner = d.get_fixed<20>();
                p.policy = s;
                break;
            }
            default: throw DecodeError("unknown mining policy");
        }
        p.confirmation_depth = d.get_u32();
        uint32_t n = d.get_count();
        if (n > 65536) throw DecodeError("allocation list too long");
        for (uint32_t i = 0; i < n; ++i) {
            TxOutput o;
            o.to = d.get_fixed<20>();
            o.amount = d.get_u64();
            p.genesis_allocation.push_back(o);
        }
        p.genesis_timestamp = d.get_u64();
        p.parent_chain_id = d.get_string();
        if (d.get_u8()) p.funding_txid = d.get_fixed<32>();
        return p;
    }
};

// --------------------------------------------------------------------
// transaction validation

enum class TxError {
    ok,
    bad_signature,
    bad_nonce,
    insufficient_balance,
    oversize_payload,
    wrong_chain,
    insufficient_multisig,
    duplicate_vote,
    zero_amount,
    unknown_peg_target,
    bad_payload,
    bad_proposal,
};

inline const char* tx_error_name(TxError e) {
    switch (e) {
        case TxError::ok: return "ok";
        case TxError::bad_signature: return "bad-signature";
        case TxError::bad_nonce: return "bad-nonce";
        case TxError::insufficient_balance: return "insufficient-balance";
        case TxError::oversize_payload: return "oversize-payload";
        case TxError::wrong_chain: return "wrong-chain";
        case TxError::insufficient_multisig: return "insufficient-multisig";
        case TxError::duplicate_vote: return "duplicate-vote";
        case TxError::zero_amount: return "zero-amount";
        case TxError::unknown_peg_target: return "unknown-peg-target";
        case TxError::bad_payload: return "bad-payload";
        case TxError::bad_proposal: return "bad-proposal";
    }
    return "?";
}

inline constexpr uint64_t kEscrowTimeoutBlocks = 10;
inline constexpr uint64_t kPendingParentIntervals = 10;

struct ProposalInfo {
    uint64_t height = 0;
    uint32_t window = 0;
    std::vector<Address> options;

    bool operator==(const ProposalInfo&) const = default;
};

struct MsigCallInfo {
    Address caller;
    uint64_t height = 0;

    bool operator==(const MsigCallInfo&) const = default;
};

// replayable per-chain account state: everything block application
// touches, nothing else
struct LedgerView {
    std::map<Address, uint64_t> balances;
    std::map<Address, uint64_t> nonces;
    std::set<std::pair<Address, Digest256>> votes_cast;
    std::map<Digest256, ProposalInfo> proposals;
    std::map<Digest256, MsigCallInfo> msig_calls;

    bool operator==(const LedgerView&) const = default;

    uint64_t balance(const Address& a) const {
        auto it = balances.find(a);
        return it == balances.end() ? 0 : it->second;
    }

    uint64_t nonce(const Address& a) const {
        auto it = nonces.find(a);
        return it == nonces.end() ? 0 : it->second;
    }
};

// payload helpers

struct VoteProposalPayload {
    uint32_t window = 0;
    std::vector<Address> options;
};

inline Bytes encode_vote_proposal_payload(uint32_t window, const std::vector<Address>& options) {
    Encoder e;
    e.put_u32(window);
    e.put_count(options.size());
    for (const auto& a : options) e.put_fixed(a);
    return e.take();
}

inline std::optional<VoteProposalPayload> parse_vote_proposal_payload(const Bytes& payload) {
    try {
        Decoder d(payload);
        VoteProposalPayload p;
        p.window = d.get_u32();
        uint32_t n = d.get_count();
        if (n > 64) return std::nullopt;
        for (uint32_t i = 0; i < n; ++i) p.options.push_back(d.get_fixed<20>());
        d.expect_end();
        return p;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

inline Bytes encode_peg_payload(const std::string& target_chain) {
    Encoder e;
    e.put_string(target_chain);
    return e.take();
}

inline std::optional<std::string> parse_peg_payload(const Bytes& payload) {
    try {
        Decoder d(payload);
        std::string s = d.get_string();
        d.expect_end();
        return s;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

struct ClaimPayload {
    MultisigSpec spec;
    Digest256 call_txid;
};

inline Bytes encode_claim_payload(const MultisigSpec& spec, const Digest256& call_txid) {
    Encoder e;
    e.put_raw(encode_multisig_spec(spec));
    e.put_fixed(call_txid);
    return e.take();
}

inline std::optional<ClaimPayload> parse_claim_payload(const Bytes& payload) {
    try {
        Decoder d(payload);
        ClaimPayload c;
        c.spec = decode_multisig_spec(d);
        c.call_txid = d.get_fixed<32>();
        d.expect_end();
        return c;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

// peg targets are checked against the owning chain set when one is
// attached; standalone chain states skip the check
enum class PegTarget { unknown, existing, declared };

struct TxContext {
    const ChainParams* params = nullptr;
    uint64_t height = 0;  // height of the block the tx would land in
    std::function<PegTarget(const std::string&)> peg_lookup;
    // set when packing from the local mempool, whose admission already
    // verified every signature; blocks from the network never set it
    bool assume_signatures_valid = false;
};

inline TxError validate_tx(const LedgerView& v, const TxContext& ctx, const Transaction& tx) {
    const ChainParams& params = *ctx.params;
    if (tx.chain_id != params.chain_id) return TxError::wrong_chain;
    if (tx.payload.size() > kMaxPayload) return TxError::oversize_payload;
    for (const auto& o : tx.outputs)
        if (o.amount == 0) return TxError::zero_amount;

    switch (tx.kind) {
        case TxKind::transfer:
        case TxKind::multisig_call:
        case TxKind::multisig_claim:
        case TxKind::peg_out:
        case TxKind::peg_in:
            if (tx.outputs.empty()) return TxError::zero_amount;
            break;
        case TxKind::vote:
            // one token, one vote
            if (tx.outputs.size() != 1 || tx.outputs[0].amount != 1) return TxError::bad_payload;
            break;
        default: break;
    }

    if (tx.nonce != v.nonce(tx.sender) + 1) return TxError::bad_nonce;
    if (tx.total_output() > v.balance(tx.sender)) return TxError::insufficient_balance;

    Bytes msg;
    auto sig_ok = [&](const Signature& s) {
        if (ctx.assume_signatures_valid) return true;
        if (msg.empty()) msg = tx.encode_unsigned();
        return verify(s.signer, msg, s);
    };

    if (tx.kind == TxKind::multisig_claim) {
        auto claim = parse_claim_payload(tx.payload);
        if (!claim || !claim->spec.well_formed()) return TxError::bad_payload;
        if (derive_multisig_address(claim->spec) != tx.sender) return TxError::bad_signature;

        std::set<PublicKey> counted;
        for (const auto& s : tx.signatures) {
            if (counted.count(s.signer)) continue;
            bool member = std::find(claim->spec.pubkeys.begin(), claim->spec.pubkeys.end(),
                                    s.signer) != claim->spec.pubkeys.end();
            if (member && sig_ok(s)) counted.insert(s.signer);
        }
        if (counted.size() >= claim->spec.m) return TxError::ok;

        // unanswered-call refund: after the timeout the caller alone may
        // reclaim, but only back to itself
        auto call = v.msig_calls.find(claim->call_txid);
        if (call != v.msig_calls.end() && ctx.height > call->second.height + kEscrowTimeoutBlocks &&
            tx.signatures.size() == 1) {
            const Signature& s = tx.signatures[0];
            bool to_caller_only = std::all_of(tx.outputs.begin(), tx.outputs.end(),
                                              [&](const TxOutput& o) { return o.to == call->second.caller; });
            if (to_caller_only && derive_address(s.signer) == call->second.caller && sig_ok(s))
                return TxError::ok;
        }
        return TxError::insufficient_multisig;
    }

    if (tx.signatures.size() != 1) return TxError::bad_signature;
    const Signature& s = tx.signatures[0];
    if (derive_address(s.signer) != tx.sender || !sig_ok(s)) return TxError::bad_signature;

    switch (tx.kind) {
        case TxKind::vote: {
            if (tx.payload.size() != 32) return TxError::bad_payload;
            Digest256 proposal;
            std::memcpy(proposal.data(), tx.payload.data(), 32);
            auto it = v.proposals.find(proposal);
            if (it == v.proposals.end()) return TxError::bad_payload;
            if (v.votes_cast.count({tx.sender, proposal})) return TxError::duplicate_vote;
            const auto& opts = it->second.options;
            if (std::find(opts.begin(), opts.end(), tx.outputs[0].to) == opts.end())
                return TxError::bad_proposal;
            break;
        }
        case TxKind::vote_proposal: {
            auto p = parse_vote_proposal_payload(tx.payload);
            if (!p) return TxError::bad_payload;
            if (p->window < 1 || p->options.size() < 2) return TxError::bad_proposal;
            std::set<Address> distinct(p->options.begin(), p->options.end());
            if (distinct.size() != p->options.size()) return TxError::bad_proposal;
            for (const auto& o : p->options)
                if (v.balance(o) != 0 || v.nonce(o) != 0) return TxError::bad_proposal;
            break;
        }
        case TxKind::peg_out:
        case TxKind::peg_in: {
            auto target = parse_peg_payload(tx.payload);
            if (!target || *target == params.chain_id) return TxError::bad_payload;
            if (tx.kind == TxKind::peg_in &&
                (params.parent_chain_id.empty() || *target != params.parent_chain_id))
                return TxError::bad_payload;
            if (ctx.peg_lookup) {
                PegTarget kind = ctx.peg_lookup(*target);
                if (kind == PegTarget::unknown) return TxError::unknown_peg_target;
                // the peg that creates a chain becomes its genesis
                // allocation, which credits the sender only
                if (kind == PegTarget::declared &&
                    (tx.outputs.size() != 1 || tx.outputs[0].to != tx.sender))
                    return TxError::bad_payload;
            }
            break;
        }
        case TxKind::attestation:
            if (tx.payload.size() != 32) return TxError::bad_payload;
            break;
        default: break;
    }
    return TxError::ok;
}

// pre: validate_tx returned ok against this view
inline void apply_tx(LedgerView& v, uint64_t height, const Transaction& tx) {
    v.nonces[tx.sender] = tx.nonce;
    uint64_t total = tx.total_output();
    if (total > 0) v.balances[tx.sender] -= total;
    // peg amounts leave this chain; the bridge credits the target chain
    bool local_credit = tx.kind != TxKind::peg_out && tx.kind != TxKind::peg_in;
    if (local_credit)
        for (const auto& o : tx.outputs) v.balances[o.to] += o.amount;

    switch (tx.kind) {
        case TxKind::vote: {
            Digest256 proposal;
            std::memcpy(proposal.data(), tx.payload.data(), 32);
            v.votes_cast.insert({tx.sender, proposal});
            break;
        }
        case TxKind::vote_proposal: {
            auto p = parse_vote_proposal_payload(tx.payload);
            v.proposals[tx.txid()] = ProposalInfo{height, p->window, p->options};
            break;
        }
        case TxKind::multisig_call:
            v.msig_calls[tx.txid()] = MsigCallInfo{tx.sender, height};
            break;
        default: break;
    }
}

// --------------------------------------------------------------------
// chain state

struct ApplyResult {
    enum class Status { accepted, duplicate, pending_parent, rejected };
    Status status = Status::accepted;
    std::string reason;
    bool head_moved = false;
    std::vector<Digest256> new_orphans;
    size_t returned_to_mempool = 0;
};

struct ValidationReport {
    bool ok = true;
    uint64_t height = 0;
    std::string field;
};

struct BridgeCredit {
    std::string source_chain;
    Digest256 source_txid;
    Address to;
    uint64_t amount = 0;

    bool operator==(const BridgeCredit&) const = default;
};

// canonical peg moves, tracked so the chain set can settle credits
// without rescanning whole chains
struct CanonicalPeg {
    Digest256 txid;
    std::string target;
    std::vector<TxOutput> outputs;
    uint64_t height = 0;
    uint64_t block_timestamp = 0;

    bool operator==(const CanonicalPeg&) const = default;
};

class ChainSet;

class ChainState {
  public:
    explicit ChainState(ChainParams params) : params_(std::move(params)) {
        if (!params_.well_formed()) throw std::invalid_argument("malformed chain params");
        Block g = params_.genesis_block();
        genesis_ = g.digest();
        head_ = genesis_;
        head_height_ = 0;
        blocks_.emplace(genesis_, std::move(g));
        arrival_.emplace(genesis_, 0);
        canonical_path_.push_back(genesis_);
        rebuild_view();
    }

    const ChainParams& params() const { return params_; }
    const Digest256& head() const { return head_; }
    uint64_t head_height() const { return head_height_; }
    const Digest256& genesis_digest() const { return genesis_; }
    const LedgerView& view() const { return view_; }
    uint64_t balance(const Address& a) const { return view_.balance(a); }
    uint64_t nonce_of(const Address& a) const { return view_.nonce(a); }
    const std::vector<Digest256>& canonical_path() const { return canonical_path_; }
    const std::vector<Transaction>& mempool() const { return mempool_; }
    const std::vector<CanonicalPeg>& canonical_pegs() const { return canonical_pegs_; }
    const std::vector<BridgeCredit>& bridge_credits() const { return credits_; }
    size_t block_count() const { return blocks_.size(); }
    size_t pending_block_count() const { return pending_count_; }

    bool has_block(const Digest256& d) const { return blocks_.count(d) != 0; }

    const Block& block(const Digest256& d) const { return blocks_.at(d); }

    const Block& canonical_block(uint64_t height) const {
        return blocks_.at(canonical_path_.at(height));
    }

    std::vector<Digest256> orphans() const {
        std::vector<Digest256> out;
        std::unordered_set<Digest256, DigestHash> canon(canonical_path_.begin(),
                                                        canonical_path_.end());
        for (const auto& [dg, b] : blocks_)
            if (!canon.count(dg)) out.push_back(dg);
        std::sort(out.begin(), out.end(), [&](const Digest256& a, const Digest256& b) {
            uint64_t ha = blocks_.at(a).header.height, hb = blocks_.at(b).header.height;
            return ha != hb ? ha < hb : a < b;
        });
        return out;
    }

    void set_owner(ChainSet* owner) { owner_ = owner; }

    TxError validate_transaction(const Transaction& tx) const {
        return validate_tx(view_, context(head_height_ + 1), tx);
    }

    // admission is deliberately lazier than block validation: anything
    // that could still become minable (nonce gaps, waiting co-signers)
    // stays in; stale and never-valid transactions are turned away
    bool mempool_admit(Transaction tx) {
        if (tx.chain_id != params_.chain_id) return false;
        if (tx.payload.size() > kMaxPayload) return false;
        Digest256 key = hash(tx.encode());
        if (mempool_keys_.count(key)) return false;
        Digest256 id = tx.txid();
        if (canonical_height_.count(id)) return false;
        if (tx.nonce <= view_.nonce(tx.sender)) return false;

        Bytes msg = tx.encode_unsigned();
        if (tx.kind == TxKind::multisig_claim) {
            auto claim = parse_claim_payload(tx.payload);
            if (!claim || !claim->spec.well_formed()) return false;
            if (derive_multisig_address(claim->spec) != tx.sender) return false;
            for (const auto& s : tx.signatures)
                if (!verify(s.signer, msg, s)) return false;
        } else {
            if (tx.signatures.size() != 1) return false;
            const Signature& s = tx.signatures[0];
            if (derive_address(s.signer) != tx.sender || !verify(s.signer, msg, s)) return false;
        }
        mempool_keys_.insert(key);
        mempool_key_order_.push_back(key);
        mempool_.push_back(std::move(tx));
        return true;
    }

    bool mempool_contains_txid(const Digest256& txid) const {
        for (const auto& tx : mempool_)
            if (tx.txid() == txid) return true;
        return false;
    }

    std::optional<Block> mine_block(uint64_t tick, const Address& self, Rng& rng) const {
        assert(tick % params_.block_interval == 0);
        uint64_t next_height = head_height_ + 1;

        if (auto* rr = std::get_if<RoundRobinPolicy>(&params_.policy)) {
            if (rr->miners[next_height % rr->miners.size()] != self) return std::nullopt;
        } else if (auto* single = std::get_if<SingleMinerPolicy>(&params_.policy)) {
            if (single->miner != self) return std::nullopt;
        }

        Block b;
        b.header.chain_id = params_.chain_id;
        b.header.height = next_height;
        b.header.parent = head_;
        b.header.miner = self;
        b.header.timestamp = tick;

        LedgerView v = view_;
        TxContext ctx = context(next_height);
        ctx.assume_signatures_valid = true;
        // arrival order, repeated until no progress: a later arrival can
        // unblock an earlier nonce-gapped one, and anything packed fails
        // re-validation on its consumed nonce
        bool progress = true;
        while (progress && b.txs.size() < params_.max_tx_per_block) {
            progress = false;
            for (const auto& tx : mempool_) {
                if (b.txs.size() >= params_.max_tx_per_block) break;
                if (validate_tx(v, ctx, tx) != TxError::ok) continue;
                apply_tx(v, next_height, tx);
                b.txs.push_back(tx);
                progress = true;
            }
        }
        b.header.tx_root = tx_root_of(b.txs);

        if (auto* pow = std::get_if<PowPolicy>(&params_.policy)) {
            for (uint32_t i = 0; i < pow->attempts_per_opportunity; ++i) {
                Encoder e;
                e.put_u64(rng.next_u64());
                b.header.policy_proof = e.take();
                if (b.header.digest() < pow->target) return b;
            }
            return std::nullopt;
        }
        return b;
    }

    ApplyResult apply_block(Block block, uint64_t now_tick) {
        prune_pending(now_tick);
        ApplyResult res;
        Digest256 dg = block.digest();
        if (blocks_.count(dg)) {
            res.status = ApplyResult::Status::duplicate;
            return res;
        }

        std::string why = check_block(block);
        if (why == "invalid-parent") {
            pending_[block.header.parent].push_back(
                {std::move(block), now_tick + kPendingParentIntervals * params_.block_interval});
            pending_count_++;
            res.status = ApplyResult::Status::pending_parent;
            res.reason = why;
            return res;
        }
        if (!why.empty()) {
            res.status = ApplyResult::Status::rejected;
            res.reason = why;
            return res;
        }

        uint64_t height = block.header.height;
        blocks_.emplace(dg, std::move(block));
        arrival_.emplace(dg, next_arrival_++);
        if (height > head_height_) {
            advance_head(dg, height, res);
            res.head_moved = true;
        }

        // out-of-order children waiting on this block
        auto kids = pending_.find(dg);
        if (kids != pending_.end()) {
            std::vector<PendingChild> list = std::move(kids->second);
            pending_.erase(kids);
            pending_count_ -= list.size();
            for (auto& child : list) {
                ApplyResult sub = apply_block(std::move(child.block), now_tick);
                res.head_moved |= sub.head_moved;
                res.new_orphans.insert(res.new_orphans.end(), sub.new_orphans.begin(),
                                       sub.new_orphans.end());
                res.returned_to_mempool += sub.returned_to_mempool;
            }
        }
        return res;
    }

    uint64_t confirmations(const Digest256& txid) const {
        auto it = canonical_height_.find(txid);
        if (it == canonical_height_.end()) return 0;
        return head_height_ - it->second + 1;
    }

    std::optional<uint64_t> canonical_tx_height(const Digest256& txid) const {
        auto it = canonical_height_.find(txid);
        if (it == canonical_height_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::pair<Transaction, uint64_t>> find_canonical_tx(const Digest256& txid) const {
        auto it = canonical_height_.find(txid);
        if (it == canonical_height_.end()) return std::nullopt;
        const Block& b = blocks_.at(canonical_path_.at(it->second));
        for (const auto& tx : b.txs)
            if (tx.txid() == txid) return std::make_pair(tx, it->second);
        return std::nullopt;
    }

    // full from-genesis re-derivation of every digest, link, policy
    // proof, signature, nonce and balance
    ValidationReport validate_chain() const {
        for (const auto& [dg, b] : blocks_)
            if (b.digest() != dg) return {false, b.header.height, "block-digest"};

        if (canonical_path_.empty() || canonical_path_[0] != params_.genesis_block().digest())
            return {false, 0, "genesis"};

        LedgerView v = genesis_view();
        Digest256 prev = canonical_path_[0];
        for (uint64_t h = 1; h < canonical_path_.size(); ++h) {
            auto it = blocks_.find(canonical_path_[h]);
            if (it == blocks_.end()) return {false, h, "missing-block"};
            const Block& b = it->second;
            if (b.header.chain_id != params_.chain_id) return {false, h, "chain-id"};
            if (b.header.height != h) return {false, h, "height"};
            if (b.header.parent != prev) return {false, h, "parent-link"};
            if (tx_root_of(b.txs) != b.header.tx_root) return {false, h, "tx-root"};
            if (b.txs.size() > params_.max_tx_per_block) return {false, h, "tx-count"};
            if (std::string p = policy_failure(b); !p.empty()) return {false, h, p};
            TxContext ctx = context(h);
            for (const auto& tx : b.txs) {
                TxError err = validate_tx(v, ctx, tx);
                if (err != TxError::ok)
                    return {false, h, std::string("tx:") + tx_error_name(err)};
                apply_tx(v, h, tx);
            }
            prev = canonical_path_[h];
        }
        if (prev != head_ || canonical_path_.size() != head_height_ + 1)
            return {false, head_height_, "head-mismatch"};
        if (!(v == view_)) return {false, head_height_, "state-mismatch"};
        return {};
    }

    // bridge plumbing, driven by the owning ChainSet

    void add_bridge_credit(const BridgeCredit& c) {
        credits_.push_back(c);
        view_.balances[c.to] += c.amount;
    }

    void update_bridge_credits(const std::vector<BridgeCredit>& want) {
        if (want == credits_) return;
        if (want.size() > credits_.size() &&
            std::equal(credits_.begin(), credits_.end(), want.begin())) {
            for (size_t i = credits_.size(); i < want.size(); ++i) add_bridge_credit(want[i]);
            return;
        }
        credits_ = want;
        rebuild_view();
    }

    uint64_t total_balance() const {
        uint64_t sum = 0;
        for (const auto& [a, amt] : view_.balances) sum += amt;
        return sum;
    }

    uint64_t encoded_size() const {
        uint64_t sum = 0;
        for (const auto& [dg, b] : blocks_) sum += b.encode().size();
        return sum;
    }

    // dump layout: length-prefixed records — params, external credits,
    // anchor (digest of the two preceding records + head digest +
    // height), then every stored block, canonical branch first
    Bytes dump() const {
        Encoder out;
        Bytes params_rec = params_.encode();
        Encoder credits_enc;
        credits_enc.put_count(credits_.size());
        for (const auto& c : credits_) {
            credits_enc.put_string(c.source_chain);
            credits_enc.put_fixed(c.source_txid);
            credits_enc.put_fixed(c.to);
            credits_enc.put_u64(c.amount);
        }
        Bytes credits_rec = credits_enc.take();

        Bytes prelude = params_rec;
        append(prelude, credits_rec);
        Encoder anchor;
        anchor.put_fixed(hash(prelude));
        anchor.put_fixed(head_);
        anchor.put_u64(head_height_);

        out.put_bytes(params_rec);
        out.put_bytes(credits_rec);
        out.put_bytes(anchor.bytes());
        for (const auto& dg : canonical_path_) out.put_bytes(blocks_.at(dg).encode());
        for (const auto& dg : orphans()) out.put_bytes(blocks_.at(dg).encode());
        return out.take();
    }

    static ChainState load_dump(const Bytes& data) {
        ValidationReport report;
        auto state = load_dump_checked(data, report);
        if (!state || !report.ok)
            throw DecodeError("invalid chain dump: " + report.field + " at height " +
                              std::to_string(report.height));
        return std::move(*state);
    }

    // returns nullopt when the dump is malformed; report carries the
    // first failure either way
    static std::optional<ChainState> load_dump_checked(const Bytes& data,
                                                       ValidationReport& report) {
        report = ValidationReport{};
        try {
            Decoder d(data);
            Bytes params_rec = d.get_bytes();
            Bytes credits_rec = d.get_bytes();
            Bytes anchor_rec = d.get_bytes();

            Decoder pd(params_rec);
            ChainParams params = ChainParams::decode(pd);
            pd.expect_end();

            std::vector<BridgeCredit> credits;
            Decoder cd(credits_rec);
            uint32_t n_credits = cd.get_count();
            if (n_credits > 1u << 20) throw DecodeError("credit list too long");
            for (uint32_t i = 0; i < n_credits; ++i) {
                BridgeCredit c;
                c.source_chain = cd.get_string();
                c.source_txid = cd.get_fixed<32>();
                c.to = cd.get_fixed<20>();
                c.amount = cd.get_u64();
                credits.push_back(c);
            }
            cd.expect_end();

            Decoder ad(anchor_rec);
            Digest256 prelude_digest = ad.get_fixed<32>();
            Digest256 head = ad.get_fixed<32>();
            uint64_t head_height = ad.get_u64();
            ad.expect_end();

            Bytes prelude = params_rec;
            append(prelude, credits_rec);
            if (hash(prelude) != prelude_digest) {
                report = {false, 0, "prelude-digest"};
                return std::nullopt;
            }

            ChainState state(params);
            for (const auto& c : credits) state.add_bridge_credit(c);

            uint64_t record = 0;
            while (d.remaining() > 0) {
                Bytes raw = d.get_bytes();
                Block b = decode_block(raw);
                uint64_t h = b.header.height;
                if (h == 0) {
                    if (b.digest() != state.genesis_digest()) {
                        report = {false, 0, "genesis"};
                        return std::nullopt;
                    }
                    record++;
                    continue;
                }
                ApplyResult res = state.apply_block(std::move(b), 0);
                if (res.status != ApplyResult::Status::accepted &&
                    res.status != ApplyResult::Status::duplicate) {
                    report = {false, h, res.reason.empty() ? "apply-failed" : res.reason};
                    return std::nullopt;
                }
                record++;
            }

            if (state.head() != head || state.head_height() != head_height) {
                report = {false, state.head_height(), "head-mismatch"};
                return std::nullopt;
            }
            report = state.validate_chain();
            if (!report.ok) return std::nullopt;
            return state;
        } catch (const DecodeError& e) {
            report = {false, 0, std::string("decode:") + e.what()};
            return std::nullopt;
        } catch (const std::invalid_argument& e) {
            report = {false, 0, std::string("params:") + e.what()};
            return std::nullopt;
        }
    }

  private:
    struct PendingChild {
        Block block;
        uint64_t expires_tick;
    };

    TxContext context(uint64_t height) const;  // defined after ChainSet

    LedgerView genesis_view() const {
        LedgerView v;
        for (const auto& a : params_.genesis_allocation) v.balances[a.to] += a.amount;
        for (const auto& c : credits_) v.balances[c.to] += c.amount;
        return v;
    }

    std::string policy_failure(const Block& b) const {
        if (auto* pow = std::get_if<PowPolicy>(&params_.policy)) {
            if (!(b.digest() < pow->target)) return "invalid-pow";
        } else if (auto* rr = std::get_if<RoundRobinPolicy>(&params_.policy)) {
            if (rr->miners[b.header.height % rr->miners.size()] != b.header.miner)
                return "invalid-miner";
            if (!b.header.policy_proof.empty()) return "invalid-proof";
        } else {
            if (std::get<SingleMinerPolicy>(params_.policy).miner != b.header.miner)
                return "invalid-miner";
            if (!b.header.policy_proof.empty()) return "invalid-proof";
        }
        return {};
    }

    // empty string = fine; "invalid-parent" = hold for later
    std::string check_block(const Block& block) {
        if (block.header.chain_id != params_.chain_id) return "wrong-chain";
        if (block.header.height == 0) return "bad-genesis";
        if (block.txs.size() > params_.max_tx_per_block) return "oversize-block";
        if (tx_root_of(block.txs) != block.header.tx_root) return "tx-root-mismatch";

        auto parent = blocks_.find(block.header.parent);
        if (parent == blocks_.end()) return "invalid-parent";
        if (block.header.height != parent->second.header.height + 1) return "bad-height";
        if (std::string p = policy_failure(block); !p.empty()) return p;

        LedgerView v = view_at(block.header.parent);
        TxContext ctx = context(block.header.height);
        for (size_t i = 0; i < block.txs.size(); ++i) {
            TxError err = validate_tx(v, ctx, block.txs[i]);
            if (err != TxError::ok)
                return "invalid-tx-in-block:" + std::to_string(i) + ":" + tx_error_name(err);
            apply_tx(v, block.header.height, block.txs[i]);
        }
        return {};
    }

    LedgerView view_at(const Digest256& block_digest) const {
        if (block_digest == head_) return view_;
        std::vector<const Block*> path;
        Digest256 cur = block_digest;
        while (cur != genesis_) {
            const Block& b = blocks_.at(cur);
            path.push_back(&b);
            cur = b.header.parent;
        }
        LedgerView v = genesis_view();
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            for (const auto& tx : (*it)->txs) apply_tx(v, (*it)->header.height, tx);
        return v;
    }

    void advance_head(const Digest256& new_head, uint64_t new_height, ApplyResult& res) {
        // walk the new branch down to the canonical fork point
        std::vector<Digest256> added;
        Digest256 cur = new_head;
        uint64_t cur_height = new_height;
        while (!(cur_height < canonical_path_.size() && canonical_path_[cur_height] == cur)) {
            added.push_back(cur);
            const Block& b = blocks_.at(cur);
            cur = b.header.parent;
            cur_height--;
        }
        std::reverse(added.begin(), added.end());
        uint64_t fork_height = cur_height;

        std::vector<Digest256> abandoned(canonical_path_.begin() + fork_height + 1,
                                         canonical_path_.end());
        bool pure_extension = abandoned.empty();

        canonical_path_.resize(fork_height + 1);
        canonical_path_.insert(canonical_path_.end(), added.begin(), added.end());
        head_ = new_head;
        head_height_ = new_height;

        if (pure_extension) {
            for (const auto& dg : added) {
                const Block& b = blocks_.at(dg);
                for (const auto& tx : b.txs) {
                    apply_tx(view_, b.header.height, tx);
                    canonical_height_.emplace(tx.txid(), b.header.height);
                }
                track_pegs(b);
            }
        } else {
            rebuild_view();
            res.new_orphans = abandoned;
            // transactions exclusive to the abandoned branch go back to
            // the pool when still valid
            for (const auto& dg : abandoned) {
                for (const auto& tx : blocks_.at(dg).txs) {
                    if (canonical_height_.count(tx.txid())) continue;
                    if (mempool_admit(tx)) res.returned_to_mempool++;
                }
            }
        }
        evict_mempool();
    }

    void track_pegs(const Block& b) {
        for (const auto& tx : b.txs) {
            if (tx.kind != TxKind::peg_out && tx.kind != TxKind::peg_in) continue;
            auto target = parse_peg_payload(tx.payload);
            if (!target) continue;  // cannot happen for validated blocks
            canonical_pegs_.push_back(
                {tx.txid(), *target, tx.outputs, b.header.height, b.header.timestamp});
        }
    }

    void rebuild_view() {
        view_ = genesis_view();
        canonical_height_.clear();
        canonical_pegs_.clear();
        for (uint64_t h = 1; h < canonical_path_.size(); ++h) {
            const Block& b = blocks_.at(canonical_path_[h]);
            for (const auto& tx : b.txs) {
                apply_tx(view_, h, tx);
                canonical_height_.emplace(tx.txid(), h);
            }
            track_pegs(b);
        }
    }

    // applied and conflicted transactions share one symptom: their
    // nonce is no longer ahead of the canonical one
    void evict_mempool() {
        size_t keep = 0;
        for (size_t i = 0; i < mempool_.size(); ++i) {
            if (mempool_[i].nonce <= view_.nonce(mempool_[i].sender)) {
                mempool_keys_.erase(mempool_key_order_[i]);
                continue;
            }
            if (keep != i) {
                mempool_[keep] = std::move(mempool_[i]);
                mempool_key_order_[keep] = mempool_key_order_[i];
            }
            keep++;
        }
        mempool_.resize(keep);
        mempool_key_order_.resize(keep);
    }

    void prune_pending(uint64_t now_tick) {
        if (pending_count_ == 0) return;
        for (auto it = pending_.begin(); it != pending_.end();) {
            auto& list = it->second;
            auto keep = std::remove_if(list.begin(), list.end(), [&](const PendingChild& p) {
                return p.expires_tick < now_tick;
            });
            pending_count_ -= static_cast<size_t>(list.end() - keep);
            list.erase(keep, list.end());
            it = list.empty() ? pending_.erase(it) : std::next(it);
        }
    }

    ChainParams params_;
    std::unordered_map<Digest256, Block, DigestHash> blocks_;
    std::unordered_map<Digest256, uint64_t, DigestHash> arrival_;
    uint64_t next_arrival_ = 1;
    Digest256 genesis_;
    Digest256 head_;
    uint64_t head_height_ = 0;

    LedgerView view_;
    std::vector<Digest256> canonical_path_;
    std::unordered_map<Digest256, uint64_t, DigestHash> canonical_height_;
    std::vector<CanonicalPeg> canonical_pegs_;
    std::vector<BridgeCredit> credits_;

    std::vector<Transaction> mempool_;
    std::vector<Digest256> mempool_key_order_;  // aligned with mempool_
    std::unordered_set<Digest256, DigestHash> mempool_keys_;

    std::unordered_map<Digest256, std::vector<PendingChild>, DigestHash> pending_;
    size_t pending_count_ = 0;

    ChainSet* owner_ = nullptr;
};

}  // namespace swarmledger

#include "swarmledger/chainset.hpp"
