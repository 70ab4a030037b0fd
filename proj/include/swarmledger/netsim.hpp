#pragma once

#include <functional>
#include <memory>
#include <queue>
#include <set>
#include <variant>

#include "swarmledger/chainset.hpp"

namespace swarmledger {

using NodeId = uint32_t;

// --------------------------------------------------------------------
// wire messages

// asks a peer for its canonical branch; sent to everyone when a
// partition heals and to a block's sender when its parent is missing
struct InvRequest {
    std::string chain_id;
    Digest256 head;
};

struct InvResponse {
    std::string chain_id;
    std::vector<Block> blocks;  // canonical order, genesis excluded
};

struct Message {
    uint64_t deliver_tick = 0;
    uint64_t seq = 0;  // tie-break so same-tick delivery order is fixed
    NodeId from = 0;
    NodeId to = 0;
    std::variant<Transaction, Block, InvRequest, InvResponse> body;
};

// one record per delivered message, for event logs; `id` is the txid,
// block digest, or requester head, `count` is the block count of an
// inventory response
struct Delivery {
    uint64_t tick = 0;
    NodeId from = 0;
    NodeId to = 0;
    std::string kind;  // tx | block | inv_request | inv_response
    std::string chain_id;
    Digest256 id{};
    uint64_t count = 1;
};

// --------------------------------------------------------------------
// latency and partitions

struct FixedLatency {
    uint64_t ticks = 1;
};

struct UniformLatency {
    uint64_t lo = 1;
    uint64_t hi = 1;  // inclusive
};

struct PerLinkLatency {
    std::map<std::pair<NodeId, NodeId>, uint64_t> links;
    uint64_t fallback = 1;
};

using LatencyModel = std::variant<FixedLatency, UniformLatency, PerLinkLatency>;

// messages created while a window is active are dropped when sender
// and recipient sit in different groups; messages already in flight
// outrun the cut. The window is [from, to): at `to` the groups can
// talk again and every node asks every other for its branch.
struct PartitionWindow {
    uint64_t from = 0;
    uint64_t to = 0;
    std::vector<std::vector<NodeId>> groups;
};

struct WorldOptions {
    uint32_t nodes = 1;
    uint64_t seed = 0;
    LatencyModel latency = FixedLatency{1};
    std::vector<PartitionWindow> partitions;
    // cross-chain token audit after every observer head move
    bool audit_conservation = true;
};

// --------------------------------------------------------------------
// nodes

inline KeyPair node_keypair(uint64_t seed, NodeId id) {
    Encoder e;
    e.put_raw(str_bytes("swl/node"));
    e.put_u64(seed);
    e.put_u32(id);
    return generate_keypair(hash(e.bytes()));
}

struct Node {
    NodeId id = 0;
    KeyPair keys;
    Address addr;
    ChainSet chains;
    Rng rng;
    std::unordered_set<Digest256, DigestHash> seen_tx;     // full-encoding hash
    std::unordered_set<Digest256, DigestHash> seen_block;  // header digest

    Node(NodeId i, const KeyPair& k, Rng r) : id(i), keys(k), addr(derive_address(k.pub)), rng(r) {}
};

// submit-to-depth-k confirmation sample for one tracked transaction
struct TxTrack {
    std::string chain_id;
    uint64_t submit_tick = 0;
    std::optional<uint64_t> confirm_tick;
    uint64_t confirm_height = 0;
};

// --------------------------------------------------------------------
// world

// Deterministic lock-step simulation. Each tick: due messages are
// delivered in (tick, seq) order, held items whose chain now exists
// are retried, the scenario hook runs, heals fire, then every node in
// ascending id order takes its mining opportunity on every chain whose
// interval divides the tick. The observer chain set sees every mined
// block at its mining tick, giving a global arrival order for fork
// accounting and confirmation metrics that no single node may have.
class World {
  public:
    World(const WorldOptions& opts, const std::function<void(ChainSet&)>& configure)
        : opts_(opts), latency_rng_(derive_seed(opts.seed, 1)) {
        if (opts_.nodes < 1) throw std::invalid_argument("world needs at least one node");
        validate_latency();
        validate_partitions();
        configure(observer_);
        for (NodeId id = 0; id < opts_.nodes; ++id) {
            nodes_.push_back(std::make_unique<Node>(id, node_keypair(opts_.seed, id),
                                                    Rng(derive_seed(opts_.seed, 1000 + id))));
            configure(nodes_.back()->chains);
        }
    }

    Node& node(NodeId id) { return *nodes_.at(id); }
    const Node& node(NodeId id) const { return *nodes_.at(id); }
    uint32_t node_count() const { return opts_.nodes; }
    ChainSet& observer() { return observer_; }
    const ChainSet& observer() const { return observer_; }
    uint64_t current_tick() const { return tick_; }
    const std::map<Digest256, TxTrack>& tracked() const { return tracked_; }
    const std::map<std::string, uint64_t>& blocks_mined() const { return blocks_mined_; }

    void set_tick_hook(std::function<void(World&, uint64_t)> hook) { hook_ = std::move(hook); }

    // fires once per delivered message, in delivery order; duplicates
    // a node later discards still count, they crossed the wire
    void set_delivery_sink(std::function<void(const Delivery&)> sink) {
        delivery_sink_ = std::move(sink);
    }

    // a node that switched behavior may stop serving a chain's miner
    // role; it still validates and gossips
    void set_mining(NodeId id, const std::string& chain_id, bool enabled) {
        if (enabled)
            mining_off_.erase({id, chain_id});
        else
            mining_off_.insert({id, chain_id});
    }

    // admits on the origin node and floods to everyone else; tracked
    // transactions get a confirmation sample when they reach the
    // observer's confirmation depth
    bool submit_tx(NodeId origin, const Transaction& tx, bool track = true) {
        Node& n = node(origin);
        if (!n.chains.has_chain(tx.chain_id)) return false;
        Digest256 key = hash(tx.encode());
        n.seen_tx.insert(key);
        if (!n.chains.at(tx.chain_id).mempool_admit(tx)) return false;
        if (track) tracked_.emplace(tx.txid(), TxTrack{tx.chain_id, tick_, std::nullopt, 0});
        broadcast(origin, tx);
        return true;
    }

    // deliver to `to` as if gossiped by `from` right now; lets tests
    // and replays drive the recovery paths directly
    void inject_block(NodeId from, NodeId to, const Block& b) { handle_block(node(to), from, b); }
    void inject_tx(NodeId from, NodeId to, const Transaction& tx) { handle_tx(node(to), from, tx); }

    void run(uint64_t duration) {
        if (ran_) throw std::logic_error("world already ran");
        ran_ = true;
        for (const auto& w : opts_.partitions)
            if (w.to > duration)
                throw std::invalid_argument("partition outlives the run, nobody would heal");

        for (tick_ = 0; tick_ <= duration; ++tick_) {
            deliver_due();
            retry_held();
            if (hook_) hook_(*this, tick_);
            for (const auto& w : opts_.partitions)
                if (w.to == tick_) heal_broadcast();
            if (tick_ > 0) mine_opportunities();
        }
        drain();
    }

    // processes queued messages to exhaustion with mining and hooks
    // off; run() ends with this so in-flight gossip settles
    void drain() {
        retry_held();
        while (!queue_.empty()) {
            tick_ = std::max(tick_, queue_.top().deliver_tick);
            deliver_due();
            retry_held();
        }
    }

  private:
    struct MessageLater {
        bool operator()(const Message& a, const Message& b) const {
            return std::tie(a.deliver_tick, a.seq) > std::tie(b.deliver_tick, b.seq);
        }
    };

    struct HeldBlock {
        Block block;
        NodeId from;
        uint64_t expiry;
    };
    struct HeldTx {
        Transaction tx;
        NodeId from;
        uint64_t expiry;
    };

    void validate_latency() {
        if (auto* f = std::get_if<FixedLatency>(&opts_.latency)) {
            if (f->ticks < 1) throw std::invalid_argument("latency must be at least one tick");
        } else if (auto* u = std::get_if<UniformLatency>(&opts_.latency)) {
            if (u->lo < 1 || u->lo > u->hi) throw std::invalid_argument("bad latency range");
        } else {
            auto& p = std::get<PerLinkLatency>(opts_.latency);
            if (p.fallback < 1) throw std::invalid_argument("latency must be at least one tick");
            for (const auto& [link, t] : p.links)
                if (t < 1) throw std::invalid_argument("latency must be at least one tick");
        }
    }

    void validate_partitions() {
        for (const auto& w : opts_.partitions) {
            if (w.from >= w.to) throw std::invalid_argument("empty partition window");
            std::set<NodeId> seen;
            for (const auto& g : w.groups)
                for (NodeId id : g) {
                    if (id >= opts_.nodes) throw std::invalid_argument("partition names unknown node");
                    if (!seen.insert(id).second)
                        throw std::invalid_argument("node in two partition groups");
                }
            if (seen.size() != opts_.nodes)
                throw std::invalid_argument("partition must place every node");
            for (const auto& other : opts_.partitions) {
                if (&other == &w) continue;
                if (w.from < other.to && other.from < w.to)
                    throw std::invalid_argument("partition windows overlap");
            }
        }
    }

    int group_of(const PartitionWindow& w, NodeId id) const {
        for (size_t g = 0; g < w.groups.size(); ++g)
            for (NodeId n : w.groups[g])
                if (n == id) return static_cast<int>(g);
        return -1;
    }

    bool link_open(NodeId from, NodeId to) const {
        for (const auto& w : opts_.partitions)
            if (w.from <= tick_ && tick_ < w.to) return group_of(w, from) == group_of(w, to);
        return true;
    }

    uint64_t latency(NodeId from, NodeId to) {
        if (auto* f = std::get_if<FixedLatency>(&opts_.latency)) return f->ticks;
        if (auto* u = std::get_if<UniformLatency>(&opts_.latency))
            return latency_rng_.uniform_u64(u->lo, u->hi);
        auto& p = std::get<PerLinkLatency>(opts_.latency);
        auto it = p.links.find({from, to});
        return it == p.links.end() ? p.fallback : it->second;
    }

    template <typename Body>
    void send(NodeId from, NodeId to, Body body) {
        if (from == to || !link_open(from, to)) return;
        queue_.push(Message{tick_ + latency(from, to), seq_++, from, to, std::move(body)});
    }

    template <typename Body>
    void broadcast(NodeId from, const Body& body) {
        for (NodeId to = 0; to < opts_.nodes; ++to)
            if (to != from) send(from, to, body);
    }

    void record_delivery(const Message& m) {
        Delivery d;
        d.tick = tick_;
        d.from = m.from;
        d.to = m.to;
        if (auto* tx = std::get_if<Transaction>(&m.body)) {
            d.kind = "tx";
            d.chain_id = tx->chain_id;
            d.id = tx->txid();
        } else if (auto* b = std::get_if<Block>(&m.body)) {
            d.kind = "block";
            d.chain_id = b->header.chain_id;
            d.id = b->digest();
        } else if (auto* req = std::get_if<InvRequest>(&m.body)) {
            d.kind = "inv_request";
            d.chain_id = req->chain_id;
            d.id = req->head;
        } else {
            const auto& resp = std::get<InvResponse>(m.body);
            d.kind = "inv_response";
            d.chain_id = resp.chain_id;
            d.count = resp.blocks.size();
            if (!resp.blocks.empty()) d.id = resp.blocks.back().digest();
        }
        delivery_sink_(d);
    }

    void deliver_due() {
        while (!queue_.empty() && queue_.top().deliver_tick <= tick_) {
            Message m = queue_.top();
            queue_.pop();
            if (delivery_sink_) record_delivery(m);
            Node& n = node(m.to);
            if (auto* tx = std::get_if<Transaction>(&m.body))
                handle_tx(n, m.from, *tx);
            else if (auto* b = std::get_if<Block>(&m.body))
                handle_block(n, m.from, *b);
            else if (auto* req = std::get_if<InvRequest>(&m.body))
                handle_inv_request(n, m.from, *req);
            else
                handle_inv_response(n, std::get<InvResponse>(m.body));
        }
    }

    void handle_tx(Node& n, NodeId from, const Transaction& tx) {
        Digest256 key = hash(tx.encode());
        if (!n.seen_tx.insert(key).second) return;
        if (!n.chains.has_chain(tx.chain_id)) {
            hold_expiry(tx.chain_id, [&](uint64_t expiry) {
                held_tx_[n.id].push_back({tx, from, expiry});
            });
            return;
        }
        if (n.chains.at(tx.chain_id).mempool_admit(tx)) forward(n.id, from, tx);
    }

    void handle_block(Node& n, NodeId from, const Block& b) {
        Digest256 dg = b.digest();
        if (!n.seen_block.insert(dg).second) return;
        if (!n.chains.has_chain(b.header.chain_id)) {
            hold_expiry(b.header.chain_id, [&](uint64_t expiry) {
                held_blocks_[n.id].push_back({b, from, expiry});
            });
            return;
        }
        ApplyResult res = n.chains.apply_block(b.header.chain_id, b, tick_);
        if (res.status == ApplyResult::Status::accepted ||
            res.status == ApplyResult::Status::pending_parent)
            forward(n.id, from, b);
        if (res.status == ApplyResult::Status::pending_parent)
            send(n.id, from, InvRequest{b.header.chain_id, n.chains.at(b.header.chain_id).head()});
    }

    void handle_inv_request(Node& n, NodeId from, const InvRequest& req) {
        if (!n.chains.has_chain(req.chain_id)) return;
        const ChainState& cs = n.chains.at(req.chain_id);
        if (cs.head() == req.head) return;
        InvResponse resp{req.chain_id, {}};
        for (uint64_t h = 1; h <= cs.head_height(); ++h) resp.blocks.push_back(cs.canonical_block(h));
        send(n.id, from, std::move(resp));
    }

    void handle_inv_response(Node& n, const InvResponse& resp) {
        if (!n.chains.has_chain(resp.chain_id)) {
            for (const auto& b : resp.blocks)
                if (n.seen_block.insert(b.digest()).second)
                    hold_expiry(resp.chain_id, [&](uint64_t expiry) {
                        held_blocks_[n.id].push_back({b, n.id, expiry});
                    });
            return;
        }
        ChainState& cs = n.chains.at(resp.chain_id);
        for (const auto& b : resp.blocks) {
            n.seen_block.insert(b.digest());
            if (cs.has_block(b.digest())) continue;
            n.chains.apply_block(resp.chain_id, b, tick_);
        }
    }

    // a block or tx for a chain this node has not instantiated yet
    // waits the same grace the pending-parent buffer gives; the
    // observer usually knows the chain's interval already
    template <typename Store>
    void hold_expiry(const std::string& chain_id, Store&& store) {
        uint64_t interval =
            observer_.has_chain(chain_id) ? observer_.at(chain_id).params().block_interval : 10;
        store(tick_ + kPendingParentIntervals * interval);
    }

    void retry_held() {
        for (auto& [id, held] : held_blocks_) {
            Node& n = node(id);
            std::vector<HeldBlock> keep;
            for (auto& h : held) {
                if (n.chains.has_chain(h.block.header.chain_id))
                    n.chains.apply_block(h.block.header.chain_id, h.block, tick_);
                else if (tick_ < h.expiry)
                    keep.push_back(std::move(h));
            }
            held = std::move(keep);
        }
        for (auto& [id, held] : held_tx_) {
            Node& n = node(id);
            std::vector<HeldTx> keep;
            for (auto& h : held) {
                if (n.chains.has_chain(h.tx.chain_id)) {
                    if (n.chains.at(h.tx.chain_id).mempool_admit(h.tx)) forward(id, h.from, h.tx);
                } else if (tick_ < h.expiry) {
                    keep.push_back(std::move(h));
                }
            }
            held = std::move(keep);
        }
    }

    template <typename Body>
    void forward(NodeId self, NodeId from, const Body& body) {
        for (NodeId to = 0; to < opts_.nodes; ++to)
            if (to != self && to != from) send(self, to, body);
    }

    void heal_broadcast() {
        for (NodeId a = 0; a < opts_.nodes; ++a) {
            Node& n = node(a);
            for (const auto& chain_id : n.chains.chain_order())
                broadcast(a, InvRequest{chain_id, n.chains.at(chain_id).head()});
        }
    }

    void mine_opportunities() {
        for (NodeId id = 0; id < opts_.nodes; ++id) {
            Node& n = node(id);
            // settle() can append new sidechains while we walk
            for (size_t c = 0; c < n.chains.chain_order().size(); ++c) {
                const std::string chain_id = n.chains.chain_order()[c];
                if (mining_off_.count({id, chain_id})) continue;
                ChainState& cs = n.chains.at(chain_id);
                if (tick_ % cs.params().block_interval != 0) continue;
                auto blk = cs.mine_block(tick_, n.addr, n.rng);
                if (!blk) continue;
                blocks_mined_[chain_id]++;
                apply_to_observer(chain_id, *blk);
                n.seen_block.insert(blk->digest());
                n.chains.apply_block(chain_id, *blk, tick_);
                broadcast(id, *blk);
            }
        }
    }

    void apply_to_observer(const std::string& chain_id, const Block& b) {
        ApplyResult res = observer_.apply_block(chain_id, b, tick_);
        if (res.status == ApplyResult::Status::rejected)
            throw std::logic_error("observer rejected a mined block: " + res.reason);
        if (res.head_moved) {
            record_confirmations(chain_id);
            if (opts_.audit_conservation && !observer_.check_conservation().ok)
                throw std::logic_error("token conservation violated at tick " +
                                       std::to_string(tick_));
        }
    }

    // a tracked tx is confirmed once its block sits confirmation_depth
    // deep on the observer; the watermark walks forward so each height
    // is scanned once and the first confirmation wins
    void record_confirmations(const std::string& chain_id) {
        const ChainState& cs = observer_.at(chain_id);
        uint64_t k = cs.params().confirmation_depth;
        if (cs.head_height() + 1 < k + 1) return;
        uint64_t upto = cs.head_height() - k + 1;
        uint64_t& mark = confirm_watermark_[chain_id];
        for (uint64_t h = mark + 1; h <= upto; ++h)
            for (const auto& tx : cs.canonical_block(h).txs) {
                auto it = tracked_.find(tx.txid());
                if (it != tracked_.end() && !it->second.confirm_tick) {
                    it->second.confirm_tick = tick_;
                    it->second.confirm_height = h;
                }
            }
        mark = std::max(mark, upto);
    }

    WorldOptions opts_;
    std::vector<std::unique_ptr<Node>> nodes_;
    ChainSet observer_;
    Rng latency_rng_;
    std::priority_queue<Message, std::vector<Message>, MessageLater> queue_;
    uint64_t seq_ = 0;
    uint64_t tick_ = 0;
    bool ran_ = false;
    std::function<void(World&, uint64_t)> hook_;
    std::function<void(const Delivery&)> delivery_sink_;
    std::map<NodeId, std::vector<HeldBlock>> held_blocks_;
    std::map<NodeId, std::vector<HeldTx>> held_tx_;
    std::map<Digest256, TxTrack> tracked_;
    std::map<std::string, uint64_t> blocks_mined_;
    std::set<std::pair<NodeId, std::string>> mining_off_;
    std::map<std::string, uint64_t> confirm_watermark_;
};

}  // namespace swarmledger
