#pragma once

#include "ecn/blocked_sets.hpp"
#include "ecn/error.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ecn {

// A network with one predefined next hop j_i(k) per non-server node and the
// request paths p_vk it induces. Caching vectors are flat, indexed [k * V + i].
class FixedRoutingInstance {
public:
    FixedRoutingInstance() = default;

    const Network& network() const noexcept { return net_; }
    int nodes() const noexcept { return net_.nodes(); }
    int items() const noexcept { return net_.items(); }
    std::size_t coordinates() const noexcept { return static_cast<std::size_t>(nodes()) * items(); }

    NodeId next_hop(NodeId i, ItemId k) const { return next_[index(i, k)]; }

    // p_vk as a node sequence ending at a server; empty when v has no route.
    const std::vector<NodeId>& path(NodeId v, ItemId k) const { return paths_[index(v, k)]; }

    // Position l_p(i) (1-based) of i on p_vk, 0 when absent.
    int position(NodeId v, ItemId k, NodeId i) const {
        const auto& p = path(v, k);
        const auto it = std::find(p.begin(), p.end(), i);
        return it == p.end() ? 0 : static_cast<int>(it - p.begin()) + 1;
    }

    // Routing cost with no caching, T(0).
    double baseline() const noexcept { return baseline_; }

    bool free_coordinate(NodeId i, ItemId k) const { return !net_.demand.is_server(i, k); }

    friend FixedRoutingInstance build_fixed_instance(Network net, std::vector<NodeId> next_hop);

private:
    std::size_t index(NodeId i, ItemId k) const { return static_cast<std::size_t>(k) * nodes() + i; }

    Network net_;
    std::vector<NodeId> next_;
    std::vector<std::vector<NodeId>> paths_;
    double baseline_ = 0.0;
};

struct FixedFlows {
    std::vector<double> t; // [k * V + i]
    std::vector<double> F; // [e]
    std::vector<double> Y; // [i]
};

// Flows from the product formula: the response flow on (j,i) for (i,j) on p_vk
// is r_v(k) times prod_{l' <= l(i)} (1 - y at the l'-th node of p_vk).
inline FixedFlows fixed_flows(const FixedRoutingInstance& inst, std::span<const double> y) {
    const auto& net = inst.network();
    const auto& topo = net.topology;
    const int n = net.nodes();
    FixedFlows out{std::vector<double>(inst.coordinates(), 0.0), std::vector<double>(net.links(), 0.0),
                   std::vector<double>(n, 0.0)};
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId v = 0; v < n; ++v) {
            const double r = net.demand.rate(v, k);
            const auto& p = inst.path(v, k);
            if (r <= 0.0 || p.empty()) {
                continue;
            }
            double prod = 1.0;
            for (std::size_t l = 0; l < p.size(); ++l) {
                const NodeId i = p[l];
                out.t[static_cast<std::size_t>(k) * n + i] += r * prod;
                if (l + 1 == p.size()) {
                    break;
                }
                prod *= 1.0 - y[static_cast<std::size_t>(k) * n + i];
                out.F[topo.link_between(p[l + 1], i)] += r * prod;
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            if (inst.free_coordinate(i, k)) {
                out.Y[i] += y[static_cast<std::size_t>(k) * n + i];
            }
        }
    }
    return out;
}

struct GainDecomposition {
    double A = 0.0;        // routing-cost saving T(0) - sum D(F)
    double B = 0.0;        // cache cost
    double G = 0.0;        // A - B
    double baseline = 0.0; // T(0)
};

inline GainDecomposition eval_gain(const FixedRoutingInstance& inst, std::span<const double> y) {
    const auto& costs = inst.network().costs;
    const FixedFlows fl = fixed_flows(inst, y);
    double routing = 0.0;
    for (std::size_t e = 0; e < fl.F.size(); ++e) {
        routing += costs.link[e].value(fl.F[e]);
    }
    double cache = 0.0;
    for (std::size_t i = 0; i < fl.Y.size(); ++i) {
        cache += costs.cache[i].value(fl.Y[i]);
    }
    GainDecomposition g;
    g.baseline = inst.baseline();
    g.A = inst.baseline() - routing;
    g.B = cache;
    g.G = g.A - g.B;
    return g;
}

struct GainGradient {
    std::vector<double> dA; // [k * V + z]
    std::vector<double> dB; // [k * V + z]
};

// dA/dy_z(k) = t_z(k) sum_{(i,j) in p_zk} D'_ji(F_ji) prod_{l'=2}^{l(i)} (1 - y at p^{l'}),
// dB/dy_z(k) = B'_z(Y_z). Server coordinates are left at 0.
inline GainGradient grad_gain(const FixedRoutingInstance& inst, std::span<const double> y) {
    const auto& net = inst.network();
    const auto& topo = net.topology;
    const int n = net.nodes();
    const FixedFlows fl = fixed_flows(inst, y);
    std::vector<double> dprime(net.links());
    for (LinkId e = 0; e < net.links(); ++e) {
        dprime[e] = net.costs.link[e].derivative(fl.F[e]);
    }
    GainGradient g{std::vector<double>(inst.coordinates(), 0.0), std::vector<double>(inst.coordinates(), 0.0)};
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId z = 0; z < n; ++z) {
            if (!inst.free_coordinate(z, k)) {
                continue;
            }
            const std::size_t zk = static_cast<std::size_t>(k) * n + z;
            g.dB[zk] = net.costs.cache[z].derivative(fl.Y[z]);
            const double t = fl.t[zk];
            const auto& p = inst.path(z, k);
            if (t <= 0.0 || p.empty()) {
                continue;
            }
            double prod = 1.0;
            double acc = 0.0;
            for (std::size_t l = 0; l + 1 < p.size(); ++l) {
                if (l >= 1) {
                    prod *= 1.0 - y[static_cast<std::size_t>(k) * n + p[l]];
                }
                acc += dprime[topo.link_between(p[l + 1], p[l])] * prod;
            }
            g.dA[zk] = t * acc;
        }
    }
    return g;
}

inline FixedRoutingInstance build_fixed_instance(Network net, std::vector<NodeId> next_hop) {
    net.validate();
    const int n = net.nodes();
    const int c = net.items();
    if (next_hop.size() != static_cast<std::size_t>(n) * c) {
        throw StructuralError("next-hop table has wrong size");
    }
    FixedRoutingInstance inst;
    inst.paths_.assign(next_hop.size(), {});
    std::vector<int> seen(n, -1);
    for (ItemId k = 0; k < c; ++k) {
        for (NodeId v = 0; v < n; ++v) {
            const std::size_t vk = static_cast<std::size_t>(k) * n + v;
            if (net.demand.is_server(v, k)) {
                inst.paths_[vk] = {v};
                continue;
            }
            if (next_hop[vk] == kNoNode) {
                if (net.demand.rate(v, k) > 0.0) {
                    throw IllRouted("requester " + std::to_string(v) + " has no next hop for item " +
                                    std::to_string(k));
                }
                continue;
            }
            const int stamp = static_cast<int>(vk);
            std::vector<NodeId> p{v};
            seen[v] = stamp;
            NodeId cur = v;
            while (!net.demand.is_server(cur, k)) {
                const NodeId nxt = next_hop[static_cast<std::size_t>(k) * n + cur];
                if (nxt == kNoNode) {
                    throw IllRouted("path of node " + std::to_string(v) + " for item " + std::to_string(k) +
                                    " stops at node " + std::to_string(cur));
                }
                if (nxt < 0 || nxt >= n || !net.topology.adjacent(cur, nxt)) {
                    throw IllRouted("next hop " + std::to_string(nxt) + " of node " + std::to_string(cur) +
                                    " is not a neighbor");
                }
                if (seen[nxt] == stamp) {
                    throw IllRouted("routing loop through node " + std::to_string(nxt) + " for item " +
                                    std::to_string(k));
                }
                seen[nxt] = stamp;
                p.push_back(nxt);
                cur = nxt;
            }
            inst.paths_[vk] = std::move(p);
        }
    }
    inst.net_ = std::move(net);
    inst.next_ = std::move(next_hop);
    const std::vector<double> zero(inst.coordinates(), 0.0);
    const FixedFlows fl = fixed_flows(inst, zero);
    for (LinkId e = 0; e < inst.net_.links(); ++e) {
        inst.baseline_ += inst.net_.costs.link[e].value(fl.F[e]);
    }
    if (!std::isfinite(inst.baseline_)) {
        throw ConfigError("routing cost without caching is not finite");
    }
    return inst;
}

// Shortest-path next hops under weights D'(0): each non-server node forwards
// toward the admissible neighbor (static blocked-set rule) minimizing
// weight + distance, ties to the lowest id.
inline std::vector<NodeId> shortest_path_next_hops(const Network& net) {
    const auto& topo = net.topology;
    const int n = net.nodes();
    const auto w = zero_flow_marginals(net);
    std::vector<NodeId> next(static_cast<std::size_t>(n) * net.items(), kNoNode);
    for (ItemId k = 0; k < net.items(); ++k) {
        const auto dist = distances_to_servers(topo, net.demand, w, k);
        for (NodeId i = 0; i < n; ++i) {
            if (net.demand.is_server(i, k)) {
                continue;
            }
            if (dist[i] == std::numeric_limits<double>::infinity()) {
                throw DisconnectedDemand("node " + std::to_string(i) + " cannot reach a server of item " +
                                         std::to_string(k));
            }
            double best = std::numeric_limits<double>::infinity();
            NodeId pick = kNoNode;
            for (LinkId e : topo.out_links(i)) {
                const NodeId j = topo.link(e).to;
                if (!(dist[j] < dist[i] || (dist[j] == dist[i] && j < i))) {
                    continue;
                }
                const double cand = w[topo.reverse(e)] + dist[j];
                if (cand < best) {
                    best = cand;
                    pick = j;
                }
            }
            next[static_cast<std::size_t>(k) * n + i] = pick;
        }
    }
    return next;
}

// Strategy of the fixed-routing problem: phi_{i, j_i(k)} = 1 - y_i(k).
inline Strategy induced_strategy(const FixedRoutingInstance& inst, std::span<const double> y) {
    const auto& net = inst.network();
    const auto& topo = net.topology;
    const int n = net.nodes();
    Strategy s(topo, net.items());
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId i = 0; i < n; ++i) {
            if (!inst.free_coordinate(i, k)) {
                continue;
            }
            const double yi = y[static_cast<std::size_t>(k) * n + i];
            const NodeId j = inst.next_hop(i, k);
            if (j == kNoNode) {
                throw IllRouted("node " + std::to_string(i) + " has no next hop for item " + std::to_string(k));
            }
            s.y(i, k) = yi;
            s.phi(topo.link_between(i, j), k) = 1.0 - yi;
        }
    }
    return s;
}

// Caching gain when requests may pick the cheapest of several fixed routings:
// min_c T_c(0) - min_c T_c(y).
inline double best_route_gain(std::span<const FixedRoutingInstance> candidates, std::span<const double> y) {
    double base = std::numeric_limits<double>::infinity();
    double now = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
        const auto g = eval_gain(c, y);
        base = std::min(base, c.baseline());
        now = std::min(now, c.baseline() - g.G);
    }
    return base - now;
}

// Gradient-combining Frank-Wolfe, one iteration at a time. The simulator
// deploys iterate n during period n.
class GcfwStepper {
public:
    GcfwStepper(const FixedRoutingInstance& inst, int iterations)
        : inst_(&inst), total_(iterations), y_(inst.coordinates(), 0.0), best_(y_) {
        if (iterations < 2) {
            throw ConfigError("GCFW needs N > 1");
        }
        require_positive_cache_cost(inst.network().costs);
        epsilon_ = std::pow(static_cast<double>(iterations), -1.0 / 3.0);
        best_gain_ = eval_gain(inst, y_).G;
        history_.push_back(best_gain_);
    }

    double epsilon() const noexcept { return epsilon_; }
    double blend() const noexcept { return epsilon_ * epsilon_; }
    int iteration() const noexcept { return n_; }
    bool done() const noexcept { return n_ >= total_; }

    const std::vector<double>& current() const noexcept { return y_; }
    const std::vector<double>& best() const noexcept { return best_; }
    double best_gain() const noexcept { return best_gain_; }
    int best_iteration() const noexcept { return best_n_; }
    const std::vector<double>& gain_history() const noexcept { return history_; }

    void advance() {
        if (done()) {
            return;
        }
        const auto grad = grad_gain(*inst_, y_);
        const double w = blend();
        const int n = inst_->nodes();
        for (std::size_t zk = 0; zk < y_.size(); ++zk) {
            const NodeId z = static_cast<NodeId>(zk % n);
            const ItemId k = static_cast<ItemId>(zk / n);
            double s = 0.0;
            if (inst_->free_coordinate(z, k) && grad.dA[zk] - 2.0 * grad.dB[zk] > 0.0) {
                s = 1.0;
            }
            y_[zk] = (1.0 - w) * y_[zk] + w * s;
        }
        ++n_;
        const double g = eval_gain(*inst_, y_).G;
        history_.push_back(g);
        if (g > best_gain_) {
            best_gain_ = g;
            best_ = y_;
            best_n_ = n_;
        }
    }

private:
    const FixedRoutingInstance* inst_;
    int total_;
    int n_ = 0;
    double epsilon_ = 0.0;
    std::vector<double> y_;
    std::vector<double> best_;
    double best_gain_ = 0.0;
    int best_n_ = 0;
    std::vector<double> history_;
};

struct GcfwResult {
    std::vector<double> y;
    double gain = 0.0;
    int best_iteration = 0;
    std::vector<double> gain_history; // G(y^(0)), ..., G(y^(N))
};

inline GcfwResult gcfw(const FixedRoutingInstance& inst, int iterations) {
    GcfwStepper stepper(inst, iterations);
    while (!stepper.done()) {
        stepper.advance();
    }
    return {stepper.best(), stepper.best_gain(), stepper.best_iteration(), stepper.gain_history()};
}

} // namespace ecn
