#pragma once

// Discrete-event packet simulator: Poisson request sources, token-based
// forwarding, reverse-path responses, windowed measurement and per-period
// strategy updates for the optimizing policies and the heuristic baselines.

#include "ecn/blocked_sets.hpp"
#include "ecn/error.hpp"
#include "ecn/fixed_routing.hpp"
#include "ecn/flow.hpp"
#include "ecn/gp.hpp"
#include "ecn/marginals.hpp"
#include "ecn/network.hpp"
#include "ecn/random.hpp"
#include "ecn/rounding.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <list>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace ecn::sim {

enum class Policy { GP, GcfwSP, LRU, LFU, CostGreedy, Static };
enum class Deployment { Fixed, Uniform, MinCost };

inline const char* policy_name(Policy p) {
    switch (p) {
    case Policy::GP:
        return "gp";
    case Policy::GcfwSP:
        return "gcfw-sp";
    case Policy::LRU:
        return "lru";
    case Policy::LFU:
        return "lfu";
    case Policy::CostGreedy:
        return "cost-greedy";
    case Policy::Static:
        return "static";
    }
    return "?";
}

struct SimConfig {
    Policy policy = Policy::GP;
    Deployment deployment = Deployment::Uniform; // capacity rule for LRU/LFU
    int initial_capacity = 0;                    // LRU/LFU per-node capacity at start
    double slot_duration = 10.0;
    int slots_per_period = 20;
    double monitor_interval = 10.0;
    int periods = 10;
    double hop_latency = 0.01;
    int tokens = 50;
    std::uint64_t seed = 1;
    double stepsize = 0.01;
    BlockingMode blocking = BlockingMode::Dynamic;
    int gcfw_iterations = 100;
    bool gp_updates = true;
    int max_hops = 0;                  // 0: 4 |V|
    std::size_t max_events = 1u << 26; // pending-event guard
    std::ostream* trace = nullptr;
    std::optional<Strategy> initial; // relaxed start for GP / Static; default shortest path, y = 0

    bool relaxed() const noexcept {
        return policy == Policy::GP || policy == Policy::GcfwSP || policy == Policy::Static;
    }

    void validate() const {
        if (!(slot_duration > 0.0) || slots_per_period < 1 || periods < 0) {
            throw ConfigError("slot duration and slots per period must be positive");
        }
        if (!(monitor_interval > 0.0)) {
            throw ConfigError("monitor interval must be positive");
        }
        const double ratio = slot_duration / monitor_interval;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
            throw ConfigError("slot duration must be a whole multiple of the monitor interval");
        }
        if (!(hop_latency > 0.0) || tokens < 1 || initial_capacity < 0) {
            throw ConfigError("hop latency, token count and capacity must be positive");
        }
        if (!(stepsize > 0.0)) {
            throw ConfigError("stepsize must be positive");
        }
    }
};

struct WindowRecord {
    int period = 0;
    int slot = 0;
    double measured_link_cost = 0.0;
    double measured_cache_cost = 0.0;
    double measured_total = 0.0;
    double theoretical_total = std::numeric_limits<double>::quiet_NaN();
    double total_cache_size = 0.0;
    long unroutable = 0;
    long messages = 0;
};

struct SimCounters {
    long requests_issued = 0;
    long cache_hits = 0;
    long server_hits = 0;
    long responses_delivered = 0;
    long unroutable = 0;
    long hop_guard = 0;
    long in_flight = 0;
};

struct SimResult {
    std::vector<WindowRecord> windows;
    Strategy strategy;
    CacheDecision decision;
    std::vector<int> capacity; // LRU/LFU
    SimCounters counters;
    std::vector<long> link_responses; // cumulative responses sent per link
    std::vector<double> miss_cost;    // cumulative cache miss cost per node
    double horizon = 0.0;
};

// ---------------------------------------------------------------- token pools

// Largest-remainder apportionment of `total` units in proportion to weights.
// Ties in the fractional part go to the lower index.
inline std::vector<int> apportion(std::span<const double> weights, int total) {
    std::vector<int> out(weights.size(), 0);
    double sum = 0.0;
    for (double w : weights) {
        sum += std::max(w, 0.0);
    }
    if (!(sum > 0.0)) {
        return out;
    }
    std::vector<std::pair<double, std::size_t>> rem;
    int given = 0;
    for (std::size_t a = 0; a < weights.size(); ++a) {
        const double q = std::max(weights[a], 0.0) / sum * total;
        out[a] = static_cast<int>(std::floor(q));
        given += out[a];
        if (weights[a] > 0.0) {
            rem.emplace_back(q - out[a], a);
        }
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t r = 0; given < total && r < rem.size(); ++r, ++given) {
        ++out[rem[r].second];
    }
    return out;
}

// Multiset of next-hop tokens for one (node, item).
class TokenPool {
public:
    bool empty() const noexcept { return tokens_.empty(); }
    std::size_t size() const noexcept { return tokens_.size(); }
    int refills() const noexcept { return refills_; }

    long count(NodeId j) const { return std::count(tokens_.begin(), tokens_.end(), j); }

    void refill(std::span<const NodeId> hops, std::span<const double> weights, int total) {
        const auto n = apportion(weights, total);
        tokens_.clear();
        for (std::size_t a = 0; a < hops.size(); ++a) {
            tokens_.insert(tokens_.end(), n[a], hops[a]);
        }
        ++refills_;
    }

    // Removes and returns a uniformly chosen token.
    NodeId draw(Rng& rng) {
        const auto a = static_cast<std::size_t>(rng.below(tokens_.size()));
        const NodeId j = tokens_[a];
        tokens_[a] = tokens_.back();
        tokens_.pop_back();
        return j;
    }

private:
    std::vector<NodeId> tokens_;
    int refills_ = 0;
};

// Next hop for item k at node i: draws from the pool, refilling it from the
// conditional routing fractions phi / (1 - y) when empty. kNoNode if every
// fraction is zero.
inline NodeId token_forward(TokenPool& pool, const Topology& topo, const Strategy& s, NodeId i, ItemId k,
                            int tokens, Rng& rng) {
    if (pool.empty()) {
        std::vector<NodeId> hops;
        std::vector<double> rho;
        for (LinkId e : topo.out_links(i)) {
            hops.push_back(topo.link(e).to);
            rho.push_back(conditional_routing(topo, s, e, k));
        }
        pool.refill(hops, rho, tokens);
        if (pool.empty()) {
            return kNoNode;
        }
    }
    return pool.draw(rng);
}

// ---------------------------------------------------------------- eviction caches

// Per-node item store for the LRU / LFU baselines.
class EvictionCache {
public:
    EvictionCache() = default;
    EvictionCache(int catalog_size, bool lfu)
        : lfu_(lfu), has_(catalog_size, 0), freq_(catalog_size, 0), where_(catalog_size) {}

    int capacity() const noexcept { return capacity_; }
    int size() const noexcept { return size_; }
    bool contains(ItemId k) const { return has_[k] != 0; }
    long frequency(ItemId k) const { return freq_[k]; }

    void set_capacity(int c) {
        capacity_ = std::max(c, 0);
        while (size_ > capacity_) {
            erase(victim());
        }
    }

    // A request for k reached this node.
    void on_request(ItemId k) {
        ++freq_[k];
        if (!lfu_ && has_[k]) {
            order_.splice(order_.begin(), order_, where_[k]);
        }
    }

    // A response for k passed through this node.
    void on_response(ItemId k) {
        if (capacity_ == 0) {
            return;
        }
        if (has_[k]) {
            if (!lfu_) {
                order_.splice(order_.begin(), order_, where_[k]);
            }
            return;
        }
        if (size_ >= capacity_) {
            const ItemId v = victim();
            if (lfu_ && freq_[k] <= freq_[v]) {
                return;
            }
            erase(v);
        }
        has_[k] = 1;
        ++size_;
        order_.push_front(k);
        where_[k] = order_.begin();
    }

private:
    ItemId victim() const {
        if (!lfu_) {
            return order_.back();
        }
        ItemId best = kNoNode;
        for (ItemId k : order_) {
            if (best == kNoNode || freq_[k] < freq_[best] || (freq_[k] == freq_[best] && k < best)) {
                best = k;
            }
        }
        return best;
    }

    void erase(ItemId k) {
        order_.erase(where_[k]);
        has_[k] = 0;
        --size_;
    }

    bool lfu_ = false;
    int capacity_ = 0;
    int size_ = 0;
    std::vector<char> has_;
    std::vector<long> freq_;
    std::list<ItemId> order_; // most recent first
    std::vector<std::list<ItemId>::iterator> where_;
};

// Argmax of per-node totals, lowest id on ties; kNoNode if all are zero.
inline NodeId argmax_node(std::span<const double> totals) {
    NodeId best = kNoNode;
    for (NodeId i = 0; i < static_cast<NodeId>(totals.size()); ++i) {
        if (totals[i] > 0.0 && (best == kNoNode || totals[i] > totals[best])) {
            best = i;
        }
    }
    return best;
}

inline double safe_cost(const CostFunction& f, double x) {
    try {
        return f.value(x);
    } catch (const CapacityExceeded&) {
        return std::numeric_limits<double>::infinity();
    }
}

// ---------------------------------------------------------------- simulator

class Simulator {
public:
    Simulator(const Network& net, SimConfig cfg) : net_(net), cfg_(std::move(cfg)) {
        cfg_.validate();
        net_.validate();
        const int n = net_.nodes();
        const int c = net_.items();
        const int e = net_.links();
        if (cfg_.max_hops <= 0) {
            cfg_.max_hops = 4 * n;
        }
        d_ = zero_flow_marginals(net_);
        failsafe_ = static_blocked_sets(net_);
        pools_.resize(static_cast<std::size_t>(n) * c);
        arrivals_.assign(static_cast<std::size_t>(n) * c, 0);
        period_responses_.assign(e, 0);
        window_responses_.assign(e, 0);
        total_responses_.assign(e, 0);
        node_miss_.assign(n, 0.0);
        total_miss_.assign(n, 0.0);
        item_miss_.assign(static_cast<std::size_t>(n) * c, 0.0);
        arrival_rng_ = Rng(derive_seed(cfg_.seed, {0xA77u}));
        token_rng_ = Rng(derive_seed(cfg_.seed, {0x70Cu}));
        init_policy();
    }

    SimResult run() {
        for (NodeId i = 0; i < net_.nodes(); ++i) {
            for (ItemId k = 0; k < net_.items(); ++k) {
                const double r = net_.demand.rate(i, k);
                if (r > 0.0) {
                    sources_.push_back({i, k, r});
                }
            }
        }
        for (std::size_t a = 0; a < sources_.size(); ++a) {
            push({arrival_rng_.exponential(sources_[a].rate), 0, EventKind::Generate, static_cast<int>(a)});
        }

        const int L = cfg_.slots_per_period;
        const int per_slot = static_cast<int>(std::lround(cfg_.slot_duration / cfg_.monitor_interval));
        const int measure_slots = std::max(1, L - 1);
        for (int p = 0; p < cfg_.periods; ++p) {
            const double theoretical = theoretical_cost();
            std::fill(arrivals_.begin(), arrivals_.end(), 0);
            std::fill(period_responses_.begin(), period_responses_.end(), 0);
            std::fill(node_miss_.begin(), node_miss_.end(), 0.0);
            std::fill(item_miss_.begin(), item_miss_.end(), 0.0);
            std::vector<long> frozen_arrivals;
            std::vector<long> frozen_responses;
            for (int m = 0; m < L; ++m) {
                const long slot_index = static_cast<long>(p) * L + m;
                begin_slot(slot_index);
                for (int w = 0; w < per_slot; ++w) {
                    const double end = cfg_.slot_duration * slot_index + cfg_.monitor_interval * (w + 1);
                    run_until(end);
                    close_window(p, m, theoretical);
                }
                if (m + 1 == measure_slots) {
                    frozen_arrivals = arrivals_;
                    frozen_responses = period_responses_;
                }
            }
            const long messages =
                end_period(frozen_arrivals, frozen_responses, cfg_.slot_duration * measure_slots);
            result_.windows.back().messages = messages;
        }

        result_.horizon = now_;
        result_.strategy = s_;
        result_.decision = x_;
        result_.capacity.clear();
        for (const auto& ch : caches_) {
            result_.capacity.push_back(ch.capacity());
        }
        result_.counters = counters_;
        result_.counters.in_flight = static_cast<long>(live_);
        result_.link_responses = total_responses_;
        result_.miss_cost = total_miss_;
        return std::move(result_);
    }

private:
    enum class EventKind : std::uint8_t { Generate, Request, Response };

    struct Event {
        double time;
        std::uint64_t seq;
        EventKind kind;
        int id;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time > b.time || (a.time == b.time && a.seq > b.seq);
        }
    };
    struct Source {
        NodeId node;
        ItemId item;
        double rate;
    };
    struct Packet {
        ItemId item = 0;
        std::vector<NodeId> path; // path[0] = requester, path.back() = current node while a request
        int pos = 0;              // response position on the path
        double miss = 0.0;        // sum of d along the response so far
        bool guarded = false;
    };

    void init_policy() {
        const auto& topo = net_.topology;
        const int n = net_.nodes();
        const int c = net_.items();
        switch (cfg_.policy) {
        case Policy::GP:
        case Policy::Static:
            s_ = cfg_.initial ? *cfg_.initial : shortest_path_strategy(net_);
            if (!validate_strategy(topo, net_.demand, s_).ok() || !is_loop_free(topo, s_)) {
                throw ConfigError("initial strategy must be valid and loop-free");
            }
            if (cfg_.policy == Policy::GP) {
                require_positive_cache_cost(net_.costs);
                if (cfg_.blocking == BlockingMode::Static) {
                    static_sets_ = failsafe_;
                }
            }
            break;
        case Policy::GcfwSP: {
            instance_ = std::make_unique<FixedRoutingInstance>(build_fixed_instance(net_, shortest_path_next_hops(net_)));
            stepper_ = std::make_unique<GcfwStepper>(*instance_, cfg_.gcfw_iterations);
            s_ = induced_strategy(*instance_, stepper_->current());
            break;
        }
        case Policy::LRU:
        case Policy::LFU:
            s_ = shortest_path_strategy(net_);
            caches_.assign(n, EvictionCache(c, cfg_.policy == Policy::LFU));
            for (auto& ch : caches_) {
                ch.set_capacity(cfg_.initial_capacity);
            }
            break;
        case Policy::CostGreedy:
            s_ = shortest_path_strategy(net_);
            break;
        }
        x_ = CacheDecision(n, c);
        maps_ = build_bar_maps(s_);
    }

    double theoretical_cost() const {
        if (cfg_.policy == Policy::LRU || cfg_.policy == Policy::LFU) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        try {
            return solve_traffic(net_, s_).total_cost;
        } catch (const CapacityExceeded&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    void begin_slot(long slot_index) {
        if (cfg_.relaxed() || cfg_.policy == Policy::CostGreedy) {
            x_ = round_caching(maps_, net_.items(), derive_seed(cfg_.seed, {0xD22u}),
                               static_cast<std::uint64_t>(slot_index));
        }
    }

    bool cached(NodeId i, ItemId k) {
        if (cfg_.policy == Policy::LRU || cfg_.policy == Policy::LFU) {
            caches_[i].on_request(k);
            return caches_[i].contains(k);
        }
        return x_.cached(i, k);
    }

    int occupancy(NodeId i) const {
        if (cfg_.policy == Policy::LRU || cfg_.policy == Policy::LFU) {
            return caches_[i].size();
        }
        return x_.occupancy(i);
    }

    void push(Event ev) {
        ev.seq = seq_++;
        queue_.push(ev);
        if (queue_.size() > cfg_.max_events) {
            throw Error("event queue overflow (" + std::to_string(queue_.size()) + " pending events)");
        }
    }

    int new_packet(NodeId requester, ItemId k) {
        int id;
        if (!free_.empty()) {
            id = free_.back();
            free_.pop_back();
        } else {
            id = static_cast<int>(packets_.size());
            packets_.emplace_back();
        }
        auto& pk = packets_[id];
        pk.item = k;
        pk.path.clear();
        pk.path.push_back(requester);
        pk.pos = 0;
        pk.miss = 0.0;
        pk.guarded = false;
        ++live_;
        return id;
    }

    void release(int id) {
        free_.push_back(id);
        --live_;
        ++counters_.responses_delivered;
    }

    void trace(const char* what, NodeId node, ItemId k, int id) {
        if (cfg_.trace != nullptr) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "{\"t\":%.6f,\"event\":\"%s\",\"node\":%d,\"item\":%d,\"packet\":%d}\n",
                          now_, what, node, k, id);
            *cfg_.trace << buf;
        }
    }

    void run_until(double end) {
        while (!queue_.empty() && queue_.top().time < end) {
            const Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            switch (ev.kind) {
            case EventKind::Generate: {
                const auto& src = sources_[ev.id];
                ++counters_.requests_issued;
                const int id = new_packet(src.node, src.item);
                trace("issue", src.node, src.item, id);
                on_request(id);
                push({now_ + arrival_rng_.exponential(src.rate), 0, EventKind::Generate, ev.id});
                break;
            }
            case EventKind::Request:
                on_request(ev.id);
                break;
            case EventKind::Response:
                on_response(ev.id);
                break;
            }
        }
        now_ = end;
    }

    // Request packet `id` is at path.back().
    void on_request(int id) {
        auto& pk = packets_[id];
        const NodeId i = pk.path.back();
        const ItemId k = pk.item;
        ++arrivals_[static_cast<std::size_t>(k) * net_.nodes() + i];
        const bool server = net_.demand.is_server(i, k);
        if (server || cached(i, k)) {
            ++(server ? counters_.server_hits : counters_.cache_hits);
            trace(server ? "server" : "hit", i, k, id);
            pk.pos = static_cast<int>(pk.path.size()) - 1;
            if (pk.pos == 0) {
                release(id);
            } else {
                send_response(id);
            }
            return;
        }
        NodeId j = kNoNode;
        if (!pk.guarded && static_cast<int>(pk.path.size()) > cfg_.max_hops) {
            pk.guarded = true;
            ++counters_.hop_guard;
        }
        if (!pk.guarded) {
            j = token_forward(pools_[static_cast<std::size_t>(k) * net_.nodes() + i], net_.topology, s_, i, k,
                              cfg_.tokens, token_rng_);
        }
        if (j == kNoNode) {
            // failsafe: lowest-id neighbor admitted by the static server-distance DAG
            for (LinkId e : net_.topology.out_links(i)) {
                if (!failsafe_.blocked(e, k)) {
                    j = net_.topology.link(e).to;
                    break;
                }
            }
            ++counters_.unroutable;
            ++window_unroutable_;
            trace("unroutable", i, k, id);
        }
        pk.path.push_back(j);
        push({now_ + cfg_.hop_latency, 0, EventKind::Request, id});
    }

    void send_response(int id) {
        auto& pk = packets_[id];
        const NodeId p = pk.path[pk.pos];
        const NodeId q = pk.path[pk.pos - 1];
        const LinkId e = net_.topology.link_between(p, q);
        ++window_responses_[e];
        ++period_responses_[e];
        ++total_responses_[e];
        pk.miss += d_[e];
        push({now_ + cfg_.hop_latency, 0, EventKind::Response, id});
    }

    void on_response(int id) {
        auto& pk = packets_[id];
        --pk.pos;
        const NodeId v = pk.path[pk.pos];
        const ItemId k = pk.item;
        node_miss_[v] += pk.miss;
        total_miss_[v] += pk.miss;
        item_miss_[static_cast<std::size_t>(k) * net_.nodes() + v] += pk.miss;
        if ((cfg_.policy == Policy::LRU || cfg_.policy == Policy::LFU) && !net_.demand.is_server(v, k)) {
            caches_[v].on_response(k);
        }
        if (pk.pos == 0) {
            trace("deliver", v, k, id);
            release(id);
        } else {
            send_response(id);
        }
    }

    void close_window(int period, int slot, double theoretical) {
        WindowRecord r;
        r.period = period;
        r.slot = slot;
        for (LinkId e = 0; e < net_.links(); ++e) {
            r.measured_link_cost += safe_cost(net_.costs.link[e], window_responses_[e] / cfg_.monitor_interval);
        }
        for (NodeId i = 0; i < net_.nodes(); ++i) {
            const int x = occupancy(i);
            r.total_cache_size += x;
            r.measured_cache_cost += safe_cost(net_.costs.cache[i], x);
        }
        r.measured_total = r.measured_link_cost + r.measured_cache_cost;
        r.theoretical_total = theoretical;
        r.unroutable = window_unroutable_;
        result_.windows.push_back(r);
        std::fill(window_responses_.begin(), window_responses_.end(), 0);
        window_unroutable_ = 0;
    }

    // Applies the policy's end-of-period step; returns messages spent.
    long end_period(const std::vector<long>& arrivals, const std::vector<long>& responses, double span) {
        const int n = net_.nodes();
        long messages = 0;
        bool strategy_changed = false;
        switch (cfg_.policy) {
        case Policy::Static:
            break;
        case Policy::GP: {
            if (!cfg_.gp_updates) {
                break;
            }
            FlowState mf(n, net_.links(), net_.items());
            for (std::size_t a = 0; a < mf.t.size(); ++a) {
                mf.t[a] = arrivals[a] / span;
            }
            for (LinkId e = 0; e < net_.links(); ++e) {
                mf.F[e] = responses[e] / span;
            }
            for (ItemId k = 0; k < net_.items(); ++k) {
                for (NodeId i = 0; i < n; ++i) {
                    mf.Y[i] += s_.y(i, k);
                }
            }
            const BlockedSets blocked =
                static_sets_ ? *static_sets_ : dynamic_blocked_sets(net_.topology, s_);
            const auto m = compute_marginals(net_, s_, mf, &blocked);
            s_ = synchronous_update(net_, s_, mf, m, blocked, cfg_.stepsize);
            messages = static_cast<long>(net_.items()) * net_.links();
            strategy_changed = true;
            break;
        }
        case Policy::GcfwSP:
            if (!stepper_->done()) {
                stepper_->advance();
            }
            s_ = induced_strategy(*instance_, stepper_->done() ? stepper_->best() : stepper_->current());
            strategy_changed = true;
            break;
        case Policy::LRU:
        case Policy::LFU:
            if (cfg_.deployment == Deployment::Uniform) {
                for (auto& ch : caches_) {
                    ch.set_capacity(ch.capacity() + 1);
                }
            } else if (cfg_.deployment == Deployment::MinCost) {
                const NodeId v = argmax_node(node_miss_);
                if (v != kNoNode) {
                    caches_[v].set_capacity(caches_[v].capacity() + 1);
                }
            }
            break;
        case Policy::CostGreedy: {
            std::size_t best = item_miss_.size();
            for (std::size_t a = 0; a < item_miss_.size(); ++a) {
                const NodeId i = static_cast<NodeId>(a % n);
                const ItemId k = static_cast<ItemId>(a / n);
                if (item_miss_[a] > 0.0 && s_.y(i, k) < 1.0 && !net_.demand.is_server(i, k) &&
                    (best == item_miss_.size() || item_miss_[a] > item_miss_[best])) {
                    best = a;
                }
            }
            if (best != item_miss_.size()) {
                const NodeId i = static_cast<NodeId>(best % n);
                const ItemId k = static_cast<ItemId>(best / n);
                s_.y(i, k) = 1.0;
                for (LinkId e : net_.topology.out_links(i)) {
                    s_.phi(e, k) = 0.0;
                }
                strategy_changed = true;
            }
            break;
        }
        }
        if (strategy_changed) {
            maps_ = build_bar_maps(s_);
        }
        return messages;
    }

    const Network& net_;
    SimConfig cfg_;
    std::vector<double> d_;
    BlockedSets failsafe_;
    std::optional<BlockedSets> static_sets_;
    Strategy s_;
    CacheDecision x_;
    std::vector<BarMap> maps_;
    std::unique_ptr<FixedRoutingInstance> instance_;
    std::unique_ptr<GcfwStepper> stepper_;
    std::vector<EvictionCache> caches_;

    std::vector<TokenPool> pools_;
    std::vector<Source> sources_;
    std::vector<Packet> packets_;
    std::vector<int> free_;
    std::size_t live_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    Rng arrival_rng_;
    Rng token_rng_;

    std::vector<long> arrivals_;
    std::vector<long> period_responses_;
    std::vector<long> window_responses_;
    std::vector<long> total_responses_;
    std::vector<double> node_miss_;
    std::vector<double> total_miss_;
    std::vector<double> item_miss_;
    long window_unroutable_ = 0;

    SimCounters counters_;
    SimResult result_;
};

inline SimResult run_simulation(const Network& net, const SimConfig& cfg) {
    Simulator sim(net, cfg);
    return sim.run();
}

// ---------------------------------------------------------------- reporting

struct CostPoint {
    int period = 0;
    double measured = 0.0;    // mean over the period's windows
    double theoretical = 0.0; // T of the period's relaxed strategy
};

inline std::vector<CostPoint> track_costs(const SimResult& run) {
    std::vector<CostPoint> out;
    std::vector<int> count;
    for (const auto& w : run.windows) {
        if (out.empty() || out.back().period != w.period) {
            out.push_back({w.period, 0.0, w.theoretical_total});
            count.push_back(0);
        }
        out.back().measured += w.measured_total;
        ++count.back();
    }
    for (std::size_t a = 0; a < out.size(); ++a) {
        out[a].measured /= count[a];
    }
    return out;
}

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_measurement_csv(std::ostream& out, const std::vector<WindowRecord>& windows) {
    out << "period,slot,measured_link_cost,measured_cache_cost,measured_total,theoretical_total,"
           "total_cache_size,unroutable_count,messages\n";
    for (const auto& w : windows) {
        out << w.period << ',' << w.slot << ',' << format_number(w.measured_link_cost) << ','
            << format_number(w.measured_cache_cost) << ',' << format_number(w.measured_total) << ','
            << format_number(w.theoretical_total) << ',' << format_number(w.total_cache_size) << ','
            << w.unroutable << ',' << w.messages << '\n';
    }
}

} // namespace ecn::sim
