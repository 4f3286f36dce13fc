#pragma once

#include "ecn/error.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecn {

enum class BlockingMode { Static, Dynamic };

// Per-item forbidden next hops B_i(k). Only links are stored; a non-neighbor
// is always blocked.
class BlockedSets {
public:
    BlockedSets() = default;
    BlockedSets(const Topology& topo, int catalog_size, BlockingMode mode)
        : e_(topo.link_count()), c_(catalog_size), mode_(mode),
          blocked_(static_cast<std::size_t>(e_) * catalog_size, 0) {}

    BlockingMode mode() const noexcept { return mode_; }

    bool blocked(LinkId e, ItemId k) const { return blocked_[index(e, k)] != 0; }
    void set_blocked(LinkId e, ItemId k, bool b) { blocked_[index(e, k)] = b ? 1 : 0; }

    bool blocks(const Topology& topo, NodeId i, NodeId j, ItemId k) const {
        const LinkId e = topo.link_between(i, j);
        return e == kNoLink || blocked(e, k);
    }

    std::vector<NodeId> blocked_neighbors(const Topology& topo, NodeId i, ItemId k) const {
        std::vector<NodeId> out;
        for (LinkId e : topo.out_links(i)) {
            if (blocked(e, k)) {
                out.push_back(topo.link(e).to);
            }
        }
        return out;
    }

private:
    std::size_t index(LinkId e, ItemId k) const { return static_cast<std::size_t>(k) * e_ + e; }

    int e_ = 0;
    int c_ = 0;
    BlockingMode mode_ = BlockingMode::Static;
    std::vector<char> blocked_;
};

// Link weights D'_e(0); the weight of forwarding a request over (i,j) is the
// weight of the response link (j,i).
inline std::vector<double> zero_flow_marginals(const Network& net) {
    std::vector<double> w(net.links());
    for (LinkId e = 0; e < net.links(); ++e) {
        w[e] = net.costs.link[e].derivative(0.0);
    }
    return w;
}

// Shortest distance from every node to the nearest designated server of k,
// where a request hop i -> j costs weights[(j,i)].
inline std::vector<double> distances_to_servers(const Topology& topo, const Demand& demand,
                                                std::span<const double> weights, ItemId k) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(topo.node_count(), inf);
    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (NodeId s : demand.servers(k)) {
        dist[s] = 0.0;
        heap.emplace(0.0, s);
    }
    while (!heap.empty()) {
        auto [d, j] = heap.top();
        heap.pop();
        if (d > dist[j]) {
            continue;
        }
        // (j,i) is the response link for a request i -> j
        for (LinkId e : topo.out_links(j)) {
            const NodeId i = topo.link(e).to;
            const double nd = d + weights[e];
            if (nd < dist[i]) {
                dist[i] = nd;
                heap.emplace(nd, i);
            }
        }
    }
    return dist;
}

// Static sets: (i,j) is admitted for item k iff dist_j < dist_i, or the
// distances tie and j < i. The admitted links form a per-item DAG that
// decreases toward the servers.
inline BlockedSets static_blocked_sets(const Topology& topo, const Demand& demand,
                                       std::span<const double> weights) {
    BlockedSets sets(topo, demand.catalog_size(), BlockingMode::Static);
    for (ItemId k = 0; k < demand.catalog_size(); ++k) {
        const auto dist = distances_to_servers(topo, demand, weights, k);
        for (NodeId i = 0; i < topo.node_count(); ++i) {
            if (dist[i] == std::numeric_limits<double>::infinity()) {
                throw DisconnectedDemand("node " + std::to_string(i) + " cannot reach a server of item " +
                                         std::to_string(k));
            }
        }
        for (NodeId i = 0; i < topo.node_count(); ++i) {
            bool any_open = false;
            for (LinkId e : topo.out_links(i)) {
                const NodeId j = topo.link(e).to;
                const bool open = dist[j] < dist[i] || (dist[j] == dist[i] && j < i);
                sets.set_blocked(e, k, !open);
                any_open = any_open || open;
            }
            if (!demand.is_server(i, k) && !any_open) {
                throw ConfigError("node " + std::to_string(i) + " has no admissible next hop for item " +
                                  std::to_string(k) + " (zero-weight plateau)");
            }
        }
    }
    return sets;
}

inline BlockedSets static_blocked_sets(const Network& net) {
    const auto w = zero_flow_marginals(net);
    return static_blocked_sets(net.topology, net.demand, w);
}

// Dynamic sets: j is blocked for i iff j precedes i in the topological order
// of item k's positive-phi subgraph.
inline BlockedSets dynamic_blocked_sets(const Topology& topo, const Strategy& s) {
    BlockedSets sets(topo, s.catalog_size(), BlockingMode::Dynamic);
    std::vector<int> position(topo.node_count());
    for (ItemId k = 0; k < s.catalog_size(); ++k) {
        const auto order = routing_order(topo, s, k);
        if (!order) {
            throw RoutingLoop("loop in routing strategy for item " + std::to_string(k));
        }
        for (int p = 0; p < static_cast<int>(order->size()); ++p) {
            position[(*order)[p]] = p;
        }
        for (LinkId e = 0; e < topo.link_count(); ++e) {
            const auto& l = topo.link(e);
            sets.set_blocked(e, k, position[l.to] < position[l.from]);
        }
    }
    return sets;
}

} // namespace ecn
