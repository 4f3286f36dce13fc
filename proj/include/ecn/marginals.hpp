#pragma once

#include "ecn/blocked_sets.hpp"
#include "ecn/flow.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace ecn {

inline constexpr double kInfiniteMarginal = std::numeric_limits<double>::infinity();

// Marginal costs at a given operating point.
//   dTdr[i,k]        dT/dr_i(k)
//   delta_link[e,k]  delta_ij(k) = D'_ji(F_ji) + dT/dr_j(k) for e = (i,j)
//   delta_cache[i,k] delta_i0(k) = B'_i(Y_i) / t_i(k), +inf when t_i(k) = 0
//   delta_min[i,k]   minimum over the cache direction and unblocked neighbors
struct MarginalState {
    int nodes = 0;
    int links = 0;
    int items = 0;
    std::vector<double> dTdr;
    std::vector<double> delta_link;
    std::vector<double> delta_cache;
    std::vector<double> delta_min;

    MarginalState() = default;
    MarginalState(int v, int e, int c)
        : nodes(v), links(e), items(c), dTdr(static_cast<std::size_t>(v) * c, 0.0),
          delta_link(static_cast<std::size_t>(e) * c, 0.0),
          delta_cache(static_cast<std::size_t>(v) * c, kInfiniteMarginal),
          delta_min(static_cast<std::size_t>(v) * c, 0.0) {}

    double rate_marginal(NodeId i, ItemId k) const { return dTdr[static_cast<std::size_t>(k) * nodes + i]; }
    double link(LinkId e, ItemId k) const { return delta_link[static_cast<std::size_t>(k) * links + e]; }
    double cache(NodeId i, ItemId k) const { return delta_cache[static_cast<std::size_t>(k) * nodes + i]; }
    double min(NodeId i, ItemId k) const { return delta_min[static_cast<std::size_t>(k) * nodes + i]; }
};

// dT/dphi_ij(k) = t_i(k) * delta_ij(k)
inline double routing_gradient(const FlowState& flow, const MarginalState& m, const Topology& topo, LinkId e,
                               ItemId k) {
    return flow.arrival(topo.link(e).from, k) * m.link(e, k);
}

// Marginals at (strategy, flow). Flow is taken as given so that measured flows
// can be substituted for solved ones. dT/dr is propagated upstream from the
// servers when item k's routing is acyclic and solved densely otherwise.
inline MarginalState compute_marginals(const Network& net, const Strategy& s, const FlowState& flow,
                                       const BlockedSets* blocked = nullptr) {
    const auto& topo = net.topology;
    const int n = net.nodes();
    const int links = net.links();
    MarginalState m(n, links, net.items());

    std::vector<double> dprime(links);
    for (LinkId e = 0; e < links; ++e) {
        dprime[e] = net.costs.link[e].derivative(flow.F[e]);
    }
    std::vector<double> bprime(n);
    for (NodeId i = 0; i < n; ++i) {
        bprime[i] = net.costs.cache[i].derivative(flow.Y[i]);
    }

    for (ItemId k = 0; k < net.items(); ++k) {
        double* g = m.dTdr.data() + static_cast<std::size_t>(k) * n;
        auto local = [&](NodeId i) {
            double c = 0.0;
            for (LinkId e : topo.out_links(i)) {
                const double p = s.phi(e, k);
                if (p > 0.0) {
                    c += p * dprime[topo.reverse(e)];
                }
            }
            return c;
        };
        if (auto order = routing_order(topo, s, k)) {
            for (auto it = order->rbegin(); it != order->rend(); ++it) {
                const NodeId i = *it;
                double acc = 0.0;
                for (LinkId e : topo.out_links(i)) {
                    const double p = s.phi(e, k);
                    if (p > 0.0) {
                        acc += p * (dprime[topo.reverse(e)] + g[topo.link(e).to]);
                    }
                }
                g[i] = acc;
            }
        } else {
            Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
            Eigen::VectorXd c(n);
            for (NodeId i = 0; i < n; ++i) {
                c[i] = local(i);
            }
            for (LinkId e = 0; e < links; ++e) {
                const auto& l = topo.link(e);
                a(l.from, l.to) -= s.phi(e, k);
            }
            const Eigen::VectorXd sol = detail::guarded_solve(a, c, k);
            for (NodeId i = 0; i < n; ++i) {
                g[i] = sol[i];
            }
        }

        for (LinkId e = 0; e < links; ++e) {
            m.delta_link[static_cast<std::size_t>(k) * links + e] = dprime[topo.reverse(e)] + g[topo.link(e).to];
        }
        for (NodeId i = 0; i < n; ++i) {
            const std::size_t ik = static_cast<std::size_t>(k) * n + i;
            if (net.demand.is_server(i, k)) {
                m.delta_cache[ik] = kInfiniteMarginal;
                m.delta_min[ik] = 0.0;
                continue;
            }
            const double t = flow.t[ik];
            m.delta_cache[ik] = t > 0.0 ? bprime[i] / t : kInfiniteMarginal;
            double best = m.delta_cache[ik];
            for (LinkId e : topo.out_links(i)) {
                if (blocked == nullptr || !blocked->blocked(e, k)) {
                    best = std::min(best, m.delta_link[static_cast<std::size_t>(k) * links + e]);
                }
            }
            m.delta_min[ik] = best;
        }
    }
    return m;
}

} // namespace ecn
