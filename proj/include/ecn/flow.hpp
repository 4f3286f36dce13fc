#pragma once

#include "ecn/error.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ecn {

// Reciprocal condition estimate below which (I - Phi^T) is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

// Per-item arrival rates t_i(k), response flows f (indexed by the directed
// link the response travels on), link totals F, cache occupancies Y and costs.
struct FlowState {
    int nodes = 0;
    int links = 0;
    int items = 0;
    std::vector<double> t; // [k * V + i]
    std::vector<double> f; // [k * E + e]
    std::vector<double> F; // [e]
    std::vector<double> Y; // [i]
    double link_cost = 0.0;
    double cache_cost = 0.0;
    double total_cost = 0.0;

    FlowState() = default;
    FlowState(int v, int e, int c)
        : nodes(v), links(e), items(c), t(static_cast<std::size_t>(v) * c, 0.0),
          f(static_cast<std::size_t>(e) * c, 0.0), F(e, 0.0), Y(v, 0.0) {}

    double arrival(NodeId i, ItemId k) const { return t[static_cast<std::size_t>(k) * nodes + i]; }
    double item_flow(LinkId e, ItemId k) const { return f[static_cast<std::size_t>(k) * links + e]; }

    // Cached (absorbed) flow t_i(k) y_i(k).
    double cached_flow(const Strategy& s, NodeId i, ItemId k) const { return arrival(i, k) * s.y(i, k); }
};

// Sum_e D_e(F_e) + Sum_i B_i(Y_i).
inline double total_cost(const FlowState& flow, const CostModel& costs) {
    double link = 0.0;
    for (std::size_t e = 0; e < flow.F.size(); ++e) {
        link += costs.link[e].value(flow.F[e]);
    }
    double cache = 0.0;
    for (std::size_t i = 0; i < flow.Y.size(); ++i) {
        cache += costs.cache[i].value(flow.Y[i]);
    }
    return link + cache;
}

inline void evaluate_costs(FlowState& flow, const CostModel& costs) {
    flow.link_cost = 0.0;
    for (std::size_t e = 0; e < flow.F.size(); ++e) {
        flow.link_cost += costs.link[e].value(flow.F[e]);
    }
    flow.cache_cost = 0.0;
    for (std::size_t i = 0; i < flow.Y.size(); ++i) {
        flow.cache_cost += costs.cache[i].value(flow.Y[i]);
    }
    flow.total_cost = flow.link_cost + flow.cache_cost;
}

namespace detail {

// Dense solve of M x = b with a conditioning guard.
inline Eigen::VectorXd guarded_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& b, ItemId k) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const double rc = lu.rcond();
    if (!(rc > kSingularRcond)) {
        throw DivergentCirculation("routing of item " + std::to_string(k) +
                                   " circulates without leaving (rcond " + std::to_string(rc) + ")");
    }
    return lu.solve(b);
}

// t = r + Phi^T t for one item. Uses the topological order when the
// positive-phi subgraph is acyclic, a dense solve otherwise.
inline void solve_item_arrivals(const Network& net, const Strategy& s, ItemId k, std::span<double> t) {
    const auto& topo = net.topology;
    const int n = topo.node_count();
    for (NodeId i = 0; i < n; ++i) {
        t[i] = net.demand.rate(i, k);
    }
    if (auto order = routing_order(topo, s, k)) {
        for (NodeId i : *order) {
            if (t[i] == 0.0) {
                continue;
            }
            for (LinkId e : topo.out_links(i)) {
                const double p = s.phi(e, k);
                if (p > 0.0) {
                    t[topo.link(e).to] += t[i] * p;
                }
            }
        }
        return;
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd r(n);
    for (NodeId i = 0; i < n; ++i) {
        r[i] = t[i];
    }
    for (LinkId e = 0; e < topo.link_count(); ++e) {
        const auto& l = topo.link(e);
        m(l.to, l.from) -= s.phi(e, k);
    }
    const Eigen::VectorXd sol = guarded_solve(m, r, k);
    for (NodeId i = 0; i < n; ++i) {
        t[i] = sol[i];
    }
}

} // namespace detail

// Solves per-item traffic and populates flows, occupancies and costs.
// Loopy strategies are allowed as long as the linear system is nonsingular.
inline FlowState solve_traffic(const Network& net, const Strategy& s) {
    const auto& topo = net.topology;
    if (!s.matches(topo, net.items())) {
        throw StructuralError("strategy dimensions do not match the network");
    }
    const int n = net.nodes();
    const int links = net.links();
    FlowState flow(n, links, net.items());
    for (ItemId k = 0; k < net.items(); ++k) {
        std::span<double> t(flow.t.data() + static_cast<std::size_t>(k) * n, n);
        detail::solve_item_arrivals(net, s, k, t);
        double* fk = flow.f.data() + static_cast<std::size_t>(k) * links;
        for (LinkId e = 0; e < links; ++e) {
            const double p = s.phi(e, k);
            if (p > 0.0) {
                // request i -> j pulls a response back over (j, i)
                const LinkId back = topo.reverse(e);
                const double rate = t[topo.link(e).from] * p;
                fk[back] += rate;
                flow.F[back] += rate;
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            flow.Y[i] += s.y(i, k);
        }
    }
    evaluate_costs(flow, net.costs);
    return flow;
}

} // namespace ecn
