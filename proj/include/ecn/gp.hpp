#pragma once

#include "ecn/blocked_sets.hpp"
#include "ecn/conditions.hpp"
#include "ecn/error.hpp"
#include "ecn/flow.hpp"
#include "ecn/marginals.hpp"
#include "ecn/network.hpp"
#include "ecn/random.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ecn {

enum class Schedule { Synchronous, Asynchronous };
enum class AsyncOrder { RoundRobin, Random };

struct GPConfig {
    double stepsize = 0.01;
    int max_periods = 1000;
    double tolerance = 1e-4;
    Schedule schedule = Schedule::Synchronous;
    AsyncOrder order = AsyncOrder::RoundRobin;
    BlockingMode blocking = BlockingMode::Static;
    std::uint64_t seed = 1;
    bool stop_on_convergence = true;
    double divergence_factor = 1e3;

    void validate() const {
        if (!(stepsize > 0.0)) {
            throw ConfigError("stepsize must be positive");
        }
        if (!(tolerance > 0.0)) {
            throw ConfigError("tolerance must be positive");
        }
        if (max_periods < 0) {
            throw ConfigError("max_periods must be nonnegative");
        }
    }
};

// Transfer computed for one (i,k). Link-indexed vectors follow out_links(i).
struct ItemUpdate {
    ItemId item = 0;
    double arrival = 0.0;
    std::vector<double> excess; // e_ij, +inf for blocked neighbors
    double cache_excess = 0.0;  // e_i0
    int receivers = 0;          // N_i(k)
    double moved = 0.0;         // S_i(k)
    std::vector<double> dphi;
    double dy = 0.0;
};

struct UpdateReport {
    NodeId node = 0;
    std::vector<ItemUpdate> items;
};

// Excess-driven transfer at node i from a frozen operating point. Blocked
// directions are emptied, positive-excess directions give up
// min(value, alpha * e), and the removed mass S is split evenly over the N
// directions that attain delta_i(k), the cache included. For t_i(k) = 0 the
// cache is emptied and all mass parks on the lowest-delta unblocked neighbor.
inline UpdateReport gp_update_node(const Network& net, const Strategy& s, const FlowState& flow,
                                   const MarginalState& m, const BlockedSets& blocked, NodeId i, double alpha) {
    const auto& topo = net.topology;
    const auto links = topo.out_links(i);
    UpdateReport rep;
    rep.node = i;
    for (ItemId k = 0; k < net.items(); ++k) {
        if (net.demand.is_server(i, k)) {
            continue;
        }
        ItemUpdate u;
        u.item = k;
        u.arrival = flow.arrival(i, k);
        u.excess.assign(links.size(), kInfiniteMarginal);
        u.dphi.assign(links.size(), 0.0);

        if (u.arrival <= 0.0) {
            std::size_t best = links.size();
            double best_delta = kInfiniteMarginal;
            for (std::size_t a = 0; a < links.size(); ++a) {
                if (!blocked.blocked(links[a], k) && m.link(links[a], k) < best_delta) {
                    best_delta = m.link(links[a], k);
                    best = a;
                }
            }
            if (best == links.size()) {
                continue;
            }
            u.cache_excess = kInfiniteMarginal;
            u.receivers = 1;
            for (std::size_t a = 0; a < links.size(); ++a) {
                u.dphi[a] = -s.phi(links[a], k);
                u.moved += s.phi(links[a], k);
            }
            u.dy = -s.y(i, k);
            u.moved += s.y(i, k);
            u.dphi[best] += u.moved;
            rep.items.push_back(std::move(u));
            continue;
        }

        const double d0 = m.cache(i, k);
        double dmin = d0;
        for (LinkId e : links) {
            if (!blocked.blocked(e, k)) {
                dmin = std::min(dmin, m.link(e, k));
            }
        }
        u.cache_excess = d0 - dmin;
        for (std::size_t a = 0; a < links.size(); ++a) {
            const LinkId e = links[a];
            const double p = s.phi(e, k);
            if (blocked.blocked(e, k)) {
                u.dphi[a] = -p;
                u.moved += p;
                continue;
            }
            u.excess[a] = m.link(e, k) - dmin;
            if (u.excess[a] > 0.0) {
                const double take = std::min(p, alpha * u.excess[a]);
                u.dphi[a] = -take;
                u.moved += take;
            } else {
                ++u.receivers;
            }
        }
        if (u.cache_excess > 0.0) {
            const double take = std::min(s.y(i, k), alpha * u.cache_excess);
            u.dy = -take;
            u.moved += take;
        } else {
            ++u.receivers;
        }
        if (u.receivers == 0) {
            throw InvariantError("no minimum-marginal direction at node " + std::to_string(i) + " item " +
                                 std::to_string(k));
        }
        const double share = u.moved / u.receivers;
        for (std::size_t a = 0; a < links.size(); ++a) {
            if (u.excess[a] == 0.0) {
                u.dphi[a] += share;
            }
        }
        if (u.cache_excess == 0.0) {
            u.dy += share;
        }
        rep.items.push_back(std::move(u));
    }
    return rep;
}

inline void apply_update(const Topology& topo, Strategy& s, const UpdateReport& rep) {
    const auto links = topo.out_links(rep.node);
    for (const auto& u : rep.items) {
        for (std::size_t a = 0; a < links.size(); ++a) {
            double& p = s.phi(links[a], u.item);
            p = std::clamp(p + u.dphi[a], 0.0, 1.0);
        }
        double& y = s.y(rep.node, u.item);
        y = std::clamp(y + u.dy, 0.0, 1.0);
    }
}

// One synchronous update slot: every node computes its transfer against the
// same frozen operating point, then all transfers are applied together.
inline Strategy synchronous_update(const Network& net, const Strategy& s, const FlowState& flow,
                                   const MarginalState& m, const BlockedSets& blocked, double alpha) {
    std::vector<UpdateReport> reports;
    reports.reserve(net.nodes());
    for (NodeId i = 0; i < net.nodes(); ++i) {
        reports.push_back(gp_update_node(net, s, flow, m, blocked, i, alpha));
    }
    Strategy next = s;
    for (const auto& r : reports) {
        apply_update(net.topology, next, r);
    }
    return next;
}

// Single-next-hop routing along shortest paths under weights D'(0), y = 0.
// Each node forwards to the admissible neighbor minimizing weight + distance.
inline Strategy shortest_path_strategy(const Network& net) {
    const auto& topo = net.topology;
    const auto w = zero_flow_marginals(net);
    Strategy s(topo, net.items());
    for (ItemId k = 0; k < net.items(); ++k) {
        const auto dist = distances_to_servers(topo, net.demand, w, k);
        for (NodeId i = 0; i < net.nodes(); ++i) {
            if (net.demand.is_server(i, k)) {
                continue;
            }
            if (dist[i] == std::numeric_limits<double>::infinity()) {
                throw DisconnectedDemand("node " + std::to_string(i) + " cannot reach a server of item " +
                                         std::to_string(k));
            }
            LinkId pick = kNoLink;
            double best = std::numeric_limits<double>::infinity();
            for (LinkId e : topo.out_links(i)) {
                const NodeId j = topo.link(e).to;
                if (!(dist[j] < dist[i] || (dist[j] == dist[i] && j < i))) {
                    continue;
                }
                const double cand = w[topo.reverse(e)] + dist[j];
                if (cand < best) {
                    best = cand;
                    pick = e;
                }
            }
            if (pick == kNoLink) {
                throw ConfigError("node " + std::to_string(i) + " has no admissible next hop for item " +
                                  std::to_string(k));
            }
            s.phi(pick, k) = 1.0;
        }
    }
    return s;
}

// Broadcast messages needed for node v alone to refresh its marginals: every
// node downstream of v's unblocked neighbors (following positive phi) sends
// its dT/dr to all of its neighbors.
inline long async_message_count(const Network& net, const Strategy& s, const BlockedSets& blocked, NodeId v) {
    const auto& topo = net.topology;
    long total = 0;
    std::vector<char> seen(net.nodes());
    std::vector<NodeId> stack;
    for (ItemId k = 0; k < net.items(); ++k) {
        if (net.demand.is_server(v, k)) {
            continue;
        }
        std::fill(seen.begin(), seen.end(), 0);
        for (LinkId e : topo.out_links(v)) {
            if (!blocked.blocked(e, k)) {
                const NodeId j = topo.link(e).to;
                if (!seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        while (!stack.empty()) {
            const NodeId j = stack.back();
            stack.pop_back();
            total += topo.degree(j);
            for (LinkId e : topo.out_links(j)) {
                const NodeId q = topo.link(e).to;
                if (s.phi(e, k) > 0.0 && !seen[q]) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return total;
}

struct PeriodRecord {
    int period = 0;
    double total_cost = 0.0;
    double link_cost = 0.0;
    double cache_cost = 0.0;
    double residual = 0.0;
    long messages = 0;
};

struct GPResult {
    std::vector<PeriodRecord> trajectory;
    Strategy strategy;
    FlowState flow;
    ConditionReport report;
    bool converged = false;
};

// Called once per period with the period-start state, before any update.
using GPObserver = std::function<void(int period, const Strategy&, const FlowState&, const BlockedSets&,
                                      const ConditionReport&)>;

namespace detail {

struct Snapshot {
    BlockedSets blocked;
    FlowState flow;
    MarginalState marginals;
};

inline Snapshot snapshot(const Network& net, const Strategy& s, const BlockedSets* fixed) {
    Snapshot snap;
    snap.blocked = fixed != nullptr ? *fixed : dynamic_blocked_sets(net.topology, s);
    snap.flow = solve_traffic(net, s);
    snap.marginals = compute_marginals(net, s, snap.flow, &snap.blocked);
    return snap;
}

} // namespace detail

inline GPResult run_gp(const Network& net, const GPConfig& cfg, Strategy initial,
                       const GPObserver& observer = {}) {
    cfg.validate();
    net.validate();
    require_positive_cache_cost(net.costs);
    const auto check = validate_strategy(net.topology, net.demand, initial);
    if (!check.ok()) {
        throw ConfigError("initial strategy violates " + check.violations.front().what);
    }
    if (!is_loop_free(net.topology, initial)) {
        throw RoutingLoop("initial strategy contains a routing loop");
    }

    std::optional<BlockedSets> fixed;
    if (cfg.blocking == BlockingMode::Static) {
        fixed = static_blocked_sets(net);
    }
    const BlockedSets* fixed_ptr = fixed ? &*fixed : nullptr;

    GPResult out;
    Strategy s = std::move(initial);
    Rng rng(derive_seed(cfg.seed, {0x6770u}));
    int next_rr = 0;
    double t0 = -1.0;

    auto record = [&](int period, const detail::Snapshot& snap, const ConditionReport& rep, long messages) {
        PeriodRecord r;
        r.period = period;
        r.total_cost = snap.flow.total_cost;
        r.link_cost = snap.flow.link_cost;
        r.cache_cost = snap.flow.cache_cost;
        r.residual = rep.worst_residual;
        r.messages = messages;
        out.trajectory.push_back(r);
    };

    for (int period = 0; period < cfg.max_periods; ++period) {
        auto snap = detail::snapshot(net, s, fixed_ptr);
        if (t0 < 0.0) {
            t0 = snap.flow.total_cost;
            if (!std::isfinite(t0)) {
                throw ConfigError("initial strategy has infinite cost");
            }
        } else if (snap.flow.total_cost > cfg.divergence_factor * std::max(t0, 1e-300)) {
            throw StepsizeTooLarge("total cost " + std::to_string(snap.flow.total_cost) + " exceeds " +
                                   std::to_string(cfg.divergence_factor) + " x initial cost");
        }
        auto rep = check_modified_condition(net, s, snap.flow, snap.marginals, cfg.tolerance, &snap.blocked);
        if (observer) {
            observer(period, s, snap.flow, snap.blocked, rep);
        }
        const bool converged = rep.worst_residual <= cfg.tolerance;

        if (cfg.schedule == Schedule::Synchronous) {
            record(period, snap, rep, static_cast<long>(net.items()) * net.links());
            if (converged && cfg.stop_on_convergence) {
                out.converged = true;
                break;
            }
            s = synchronous_update(net, s, snap.flow, snap.marginals, snap.blocked, cfg.stepsize);
            continue;
        }

        // asynchronous: a period is |V| single-node iterations
        if (converged && cfg.stop_on_convergence) {
            record(period, snap, rep, 0);
            out.converged = true;
            break;
        }
        const FlowState period_start = snap.flow;
        long messages = 0;
        for (int it = 0; it < net.nodes(); ++it) {
            NodeId v;
            if (cfg.order == AsyncOrder::RoundRobin) {
                v = next_rr;
                next_rr = (next_rr + 1) % net.nodes();
            } else {
                v = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(net.nodes())));
            }
            if (it > 0) {
                snap = detail::snapshot(net, s, fixed_ptr);
            }
            messages += async_message_count(net, s, snap.blocked, v);
            apply_update(net.topology, s,
                         gp_update_node(net, s, snap.flow, snap.marginals, snap.blocked, v, cfg.stepsize));
        }
        snap.flow = period_start;
        record(period, snap, rep, messages);
    }

    auto snap = detail::snapshot(net, s, fixed_ptr);
    out.report = check_modified_condition(net, s, snap.flow, snap.marginals, cfg.tolerance, &snap.blocked);
    out.converged = out.converged || out.report.worst_residual <= cfg.tolerance;
    out.flow = std::move(snap.flow);
    out.strategy = std::move(s);
    return out;
}

// Broadcast messages per recorded period.
inline std::vector<long> message_count(const std::vector<PeriodRecord>& trajectory) {
    std::vector<long> out;
    out.reserve(trajectory.size());
    for (const auto& r : trajectory) {
        out.push_back(r.messages);
    }
    return out;
}

} // namespace ecn
