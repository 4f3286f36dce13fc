#pragma once

#include "ecn/error.hpp"
#include "ecn/network.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace ecn {

// Routing fractions phi_ij(k) (stored per directed link) and continuous
// caching fractions y_i(k).
class Strategy {
public:
    Strategy() = default;

    Strategy(const Topology& topo, int catalog_size)
        : n_(topo.node_count()), e_(topo.link_count()), c_(catalog_size),
          phi_(static_cast<std::size_t>(e_) * c_, 0.0), y_(static_cast<std::size_t>(n_) * c_, 0.0) {}

    int node_count() const noexcept { return n_; }
    int link_count() const noexcept { return e_; }
    int catalog_size() const noexcept { return c_; }

    double phi(LinkId e, ItemId k) const { return phi_[static_cast<std::size_t>(k) * e_ + e]; }
    double& phi(LinkId e, ItemId k) { return phi_[static_cast<std::size_t>(k) * e_ + e]; }

    double y(NodeId i, ItemId k) const { return y_[static_cast<std::size_t>(k) * n_ + i]; }
    double& y(NodeId i, ItemId k) { return y_[static_cast<std::size_t>(k) * n_ + i]; }

    // Flat [k * V + i] view, the layout used by the fixed-routing module.
    const std::vector<double>& caching() const noexcept { return y_; }

    bool matches(const Topology& topo, int catalog_size) const {
        return n_ == topo.node_count() && e_ == topo.link_count() && c_ == catalog_size;
    }

    friend bool operator==(const Strategy&, const Strategy&) = default;

private:
    int n_ = 0;
    int e_ = 0;
    int c_ = 0;
    std::vector<double> phi_;
    std::vector<double> y_;
};

// rho_ij(k) = phi_ij(k) / (1 - y_i(k)); the routing distribution of requests
// that miss the local cache. Undefined (returns 0) when y_i(k) = 1.
inline double conditional_routing(const Topology& topo, const Strategy& s, LinkId e, ItemId k) {
    const double miss = 1.0 - s.y(topo.link(e).from, k);
    return miss > 0.0 ? s.phi(e, k) / miss : 0.0;
}

// Binary cache decisions x_i(k).
class CacheDecision {
public:
    CacheDecision() = default;
    CacheDecision(int node_count, int catalog_size)
        : n_(node_count), c_(catalog_size), x_(static_cast<std::size_t>(node_count) * catalog_size, 0) {}

    int node_count() const noexcept { return n_; }
    int catalog_size() const noexcept { return c_; }

    bool cached(NodeId i, ItemId k) const { return x_[static_cast<std::size_t>(k) * n_ + i] != 0; }
    void set(NodeId i, ItemId k, bool v) { x_[static_cast<std::size_t>(k) * n_ + i] = v ? 1 : 0; }

    int occupancy(NodeId i) const {
        int total = 0;
        for (ItemId k = 0; k < c_; ++k) {
            total += cached(i, k) ? 1 : 0;
        }
        return total;
    }

private:
    int n_ = 0;
    int c_ = 0;
    std::vector<std::uint8_t> x_;
};

// Strategy seen by traffic when the caches hold exactly x: requests that miss
// are forwarded with the conditional distribution rho.
inline Strategy realize(const Topology& topo, const Strategy& s, const CacheDecision& x) {
    Strategy out(topo, s.catalog_size());
    for (ItemId k = 0; k < s.catalog_size(); ++k) {
        for (NodeId i = 0; i < topo.node_count(); ++i) {
            const bool hit = x.cached(i, k);
            out.y(i, k) = hit ? 1.0 : 0.0;
            if (hit) {
                continue;
            }
            for (LinkId e : topo.out_links(i)) {
                out.phi(e, k) = conditional_routing(topo, s, e, k);
            }
        }
    }
    return out;
}

struct StrategyViolation {
    NodeId node;
    ItemId item;
    std::string what;
    double magnitude;
};

struct StrategyValidation {
    std::vector<StrategyViolation> violations;
    double max_violation = 0.0;

    bool ok() const noexcept { return violations.empty(); }
};

// Box constraints plus flow conservation:
//   y_i(k) + sum_j phi_ij(k) = 1 for i not in S_k, and y = sum phi = 0 at servers.
inline StrategyValidation validate_strategy(const Topology& topo, const Demand& demand, const Strategy& s,
                                            double tol = 1e-9) {
    if (!s.matches(topo, demand.catalog_size()) || demand.node_count() != topo.node_count()) {
        throw StructuralError("strategy dimensions do not match topology/demand");
    }
    StrategyValidation out;
    auto report = [&](NodeId i, ItemId k, const char* what, double mag) {
        out.max_violation = std::max(out.max_violation, mag);
        if (mag > tol) {
            out.violations.push_back({i, k, what, mag});
        }
    };
    auto box = [](double v) { return std::max({0.0, -v, v - 1.0}); };
    for (ItemId k = 0; k < s.catalog_size(); ++k) {
        for (NodeId i = 0; i < topo.node_count(); ++i) {
            double sum = 0.0;
            for (LinkId e : topo.out_links(i)) {
                report(i, k, "routing fraction outside [0,1]", box(s.phi(e, k)));
                sum += s.phi(e, k);
            }
            report(i, k, "caching fraction outside [0,1]", box(s.y(i, k)));
            if (demand.is_server(i, k)) {
                report(i, k, "server caches its own item", std::abs(s.y(i, k)));
                report(i, k, "server forwards its own item", std::abs(sum));
            } else {
                report(i, k, "flow conservation", std::abs(s.y(i, k) + sum - 1.0));
            }
        }
    }
    return out;
}

// Topological order of the positive-phi subgraph of item k. Among ready nodes
// the lowest id goes first; nodes without any positive-phi incidence are
// appended in id order. Returns nullopt when the subgraph has a cycle.
inline std::optional<std::vector<NodeId>> routing_order(const Topology& topo, const Strategy& s, ItemId k) {
    const int n = topo.node_count();
    std::vector<int> indegree(n, 0);
    std::vector<char> touched(n, 0);
    for (LinkId e = 0; e < topo.link_count(); ++e) {
        if (s.phi(e, k) > 0.0) {
            const auto& l = topo.link(e);
            ++indegree[l.to];
            touched[l.from] = touched[l.to] = 1;
        }
    }
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (NodeId i = 0; i < n; ++i) {
        if (touched[i] && indegree[i] == 0) {
            ready.push(i);
        }
    }
    std::vector<NodeId> order;
    order.reserve(n);
    while (!ready.empty()) {
        const NodeId i = ready.top();
        ready.pop();
        order.push_back(i);
        for (LinkId e : topo.out_links(i)) {
            if (s.phi(e, k) > 0.0 && --indegree[topo.link(e).to] == 0) {
                ready.push(topo.link(e).to);
            }
        }
    }
    int expected = 0;
    for (NodeId i = 0; i < n; ++i) {
        expected += touched[i];
    }
    if (static_cast<int>(order.size()) != expected) {
        return std::nullopt;
    }
    for (NodeId i = 0; i < n; ++i) {
        if (!touched[i]) {
            order.push_back(i);
        }
    }
    return order;
}

inline bool is_loop_free(const Topology& topo, const Strategy& s) {
    for (ItemId k = 0; k < s.catalog_size(); ++k) {
        if (!routing_order(topo, s, k)) {
            return false;
        }
    }
    return true;
}

} // namespace ecn
