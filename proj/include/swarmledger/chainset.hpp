#pragma once

#include "swarmledger/chain.hpp"

namespace swarmledger {

struct ConservationReport {
    bool ok = true;
    uint64_t total_balances = 0;
    uint64_t total_created = 0;
};

// All chains one participant follows, with the bridge between them.
// When a block carrying a peg transaction becomes canonical on its
// chain, settle() applies the matching credit on the target chain in
// the same state transition, so the cross-chain token sum holds at
// every block boundary. Sidechains declared up front are instantiated
// the moment their funding peg_out turns canonical.
class ChainSet {
  public:
    ChainSet() = default;
    ChainSet(const ChainSet&) = delete;
    ChainSet& operator=(const ChainSet&) = delete;

    ChainState& register_chain(ChainParams params) {
        if (chains_.count(params.chain_id) || pending_.count(params.chain_id))
            throw std::invalid_argument("duplicate-chain-id: " + params.chain_id);
        std::string id = params.chain_id;
        auto [it, inserted] = chains_.emplace(id, ChainState(std::move(params)));
        it->second.set_owner(this);
        order_.push_back(id);
        return it->second;
    }

    // declares a sidechain that will exist once some canonical peg_out
    // names it; until then peg validation treats the id as `declared`
    void declare_sidechain(const std::string& parent_chain_id, ChainParams params) {
        if (chains_.count(params.chain_id) || pending_.count(params.chain_id))
            throw std::invalid_argument("duplicate-chain-id: " + params.chain_id);
        if (params.chain_id == parent_chain_id)
            throw std::invalid_argument("sidechain id equals parent id");
        if (!chains_.count(parent_chain_id) && !pending_.count(parent_chain_id))
            throw std::invalid_argument("unknown parent chain: " + parent_chain_id);
        if (!params.well_formed())
            throw std::invalid_argument("malformed sidechain params: " + params.chain_id);
        params.parent_chain_id = parent_chain_id;
        pending_.emplace(params.chain_id, std::move(params));
    }

    bool has_chain(const std::string& id) const { return chains_.count(id) != 0; }

    ChainState& at(const std::string& id) { return chains_.at(id); }
    const ChainState& at(const std::string& id) const { return chains_.at(id); }

    const std::vector<std::string>& chain_order() const { return order_; }

    std::map<std::string, ChainState>& chains() { return chains_; }
    const std::map<std::string, ChainState>& chains() const { return chains_; }

    PegTarget peg_target_kind(const std::string& id) const {
        if (chains_.count(id)) return PegTarget::existing;
        if (pending_.count(id)) return PegTarget::declared;
        return PegTarget::unknown;
    }

    ApplyResult apply_block(const std::string& chain_id, Block block, uint64_t now_tick) {
        ApplyResult res = chains_.at(chain_id).apply_block(std::move(block), now_tick);
        if (res.head_moved) settle();
        return res;
    }

    // validates against the sidechain and parent pair, then queues the
    // transaction; the debit/credit pair lands when a block includes it
    TxError peg_in(const std::string& side_chain_id, Transaction tx) {
        ChainState& side = chains_.at(side_chain_id);
        if (tx.kind != TxKind::peg_in) return TxError::bad_payload;
        TxError err = side.validate_transaction(tx);
        if (err != TxError::ok) return err;
        side.mempool_admit(std::move(tx));
        return TxError::ok;
    }

    // Σ balances across chains must equal Σ genesis allocations of
    // chains whose genesis is token creation (not peg-funded)
    ConservationReport check_conservation() const {
        ConservationReport r;
        for (const auto& [id, cs] : chains_) {
            r.total_balances += cs.total_balance();
            if (!cs.params().funding_txid)
                for (const auto& a : cs.params().genesis_allocation) r.total_created += a.amount;
        }
        r.ok = r.total_balances == r.total_created;
        return r;
    }

    // recompute bridge credits from every chain's canonical peg list;
    // instantiates declared sidechains whose funding peg is canonical.
    // order_ grows while we scan it, which also covers sidechains
    // funded from other sidechains.
    void settle() {
        for (size_t i = 0; i < order_.size(); ++i) {
            const std::string id = order_[i];
            for (const auto peg : chains_.at(id).canonical_pegs()) {
                auto pend = pending_.find(peg.target);
                if (pend == pending_.end()) continue;
                ChainParams params = pend->second;
                params.funding_txid = peg.txid;
                params.genesis_timestamp = peg.block_timestamp;
                params.genesis_allocation = peg.outputs;
                pending_.erase(pend);
                auto [it, ok] = chains_.emplace(params.chain_id, ChainState(params));
                it->second.set_owner(this);
                order_.push_back(params.chain_id);
            }
        }

        for (const auto& dest_id : order_) {
            ChainState& dest = chains_.at(dest_id);
            std::vector<BridgeCredit> want;
            for (const auto& src_id : order_) {
                if (src_id == dest_id) continue;
                for (const auto& peg : chains_.at(src_id).canonical_pegs()) {
                    if (peg.target != dest_id) continue;
                    if (dest.params().funding_txid && *dest.params().funding_txid == peg.txid)
                        continue;
                    for (const auto& o : peg.outputs)
                        want.push_back({src_id, peg.txid, o.to, o.amount});
                }
            }
            dest.update_bridge_credits(want);
        }
    }

  private:
    std::map<std::string, ChainState> chains_;
    std::map<std::string, ChainParams> pending_;
    std::vector<std::string> order_;
};

inline TxContext ChainState::context(uint64_t height) const {
    TxContext ctx;
    ctx.params = &params_;
    ctx.height = height;
    if (owner_) {
        ChainSet* owner = owner_;
        ctx.peg_lookup = [owner](const std::string& id) { return owner->peg_target_kind(id); };
    }
    return ctx;
}

}  // namespace swarmledger
