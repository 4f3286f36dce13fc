#pragma once

#include "ecn/blocked_sets.hpp"
#include "ecn/flow.hpp"
#include "ecn/marginals.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ecn {

enum class ConditionKind { KKT, Modified };

struct ConditionViolation {
    NodeId node;
    ItemId item;
    NodeId direction; // kNoNode for the caching direction
    double magnitude;
};

struct ConditionReport {
    ConditionKind kind = ConditionKind::Modified;
    // lambda_ik for KKT, delta_i(k) for the modified condition; [k * V + i]
    std::vector<double> multiplier;
    double worst_residual = 0.0;
    std::vector<ConditionViolation> violations;

    bool passed() const noexcept { return violations.empty(); }
};

// Optional per-(i,k) upper bounds on y_i(k). A bound of 0 removes the caching
// direction; a caching variable sitting at a positive bound is saturated and
// drops out of the minimum. Defaults to 1 everywhere.
class CacheBounds {
public:
    CacheBounds() = default;
    CacheBounds(int node_count, int catalog_size)
        : n_(node_count), caps_(static_cast<std::size_t>(node_count) * catalog_size, 1.0) {}

    void set(NodeId i, ItemId k, double cap) { caps_[static_cast<std::size_t>(k) * n_ + i] = cap; }
    double cap(NodeId i, ItemId k) const { return caps_[static_cast<std::size_t>(k) * n_ + i]; }

    void forbid_node(NodeId i, int catalog_size) {
        for (ItemId k = 0; k < catalog_size; ++k) {
            set(i, k, 0.0);
        }
    }

private:
    int n_ = 0;
    std::vector<double> caps_;
};

namespace detail {

enum class CacheDirection { Open, Saturated, Absent };

inline CacheDirection cache_direction(const CacheBounds* bounds, const Strategy& s, NodeId i, ItemId k) {
    if (bounds == nullptr) {
        return CacheDirection::Open;
    }
    const double cap = bounds->cap(i, k);
    if (cap <= 0.0) {
        return CacheDirection::Absent;
    }
    if (cap < 1.0 && s.y(i, k) >= cap - 1e-12) {
        return CacheDirection::Saturated;
    }
    return CacheDirection::Open;
}

class ReportBuilder {
public:
    ReportBuilder(ConditionKind kind, int v, int c, double tol) : tol_(tol) {
        report_.kind = kind;
        report_.multiplier.assign(static_cast<std::size_t>(v) * c, 0.0);
    }

    void add(NodeId i, ItemId k, NodeId dir, double residual) {
        report_.worst_residual = std::max(report_.worst_residual, residual);
        if (residual > tol_) {
            report_.violations.push_back({i, k, dir, residual});
        }
    }

    ConditionReport& report() { return report_; }

private:
    double tol_;
    ConditionReport report_;
};

} // namespace detail

// KKT necessary condition with multiplier
//   lambda_ik = min{ B'_i(Y_i), min_j t_i(k) delta_ij(k) }.
// Active directions must equal lambda, inactive ones must not undercut it.
inline ConditionReport check_kkt(const Network& net, const Strategy& s, double tol,
                                 const CacheBounds* bounds = nullptr) {
    const auto& topo = net.topology;
    const FlowState flow = solve_traffic(net, s);
    const MarginalState m = compute_marginals(net, s, flow);
    detail::ReportBuilder out(ConditionKind::KKT, net.nodes(), net.items(), tol);
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId i = 0; i < net.nodes(); ++i) {
            if (net.demand.is_server(i, k)) {
                continue;
            }
            const double t = flow.arrival(i, k);
            const double bp = net.costs.cache[i].derivative(flow.Y[i]);
            const auto dir = detail::cache_direction(bounds, s, i, k);
            double lambda = dir == detail::CacheDirection::Open ? bp : kInfiniteMarginal;
            for (LinkId e : topo.out_links(i)) {
                lambda = std::min(lambda, t * m.link(e, k));
            }
            if (lambda == kInfiniteMarginal) {
                lambda = 0.0;
            }
            out.report().multiplier[static_cast<std::size_t>(k) * net.nodes() + i] = lambda;
            for (LinkId e : topo.out_links(i)) {
                const double grad = t * m.link(e, k);
                const double r = s.phi(e, k) > 0.0 ? std::abs(grad - lambda) : std::max(0.0, lambda - grad);
                out.add(i, k, topo.link(e).to, r);
            }
            switch (dir) {
            case detail::CacheDirection::Open:
                out.add(i, k, kNoNode, s.y(i, k) > 0.0 ? std::abs(bp - lambda) : std::max(0.0, lambda - bp));
                break;
            case detail::CacheDirection::Saturated:
                out.add(i, k, kNoNode, std::max(0.0, bp - lambda));
                break;
            case detail::CacheDirection::Absent:
                out.add(i, k, kNoNode, s.y(i, k));
                break;
            }
        }
    }
    return std::move(out.report());
}

// Modified condition evaluated at a precomputed operating point. With blocked
// sets, delta_i(k) ranges over unblocked neighbors only and any mass left on a
// blocked neighbor is a violation. Caching residuals are divided by
// max(1, t_i(k)).
inline ConditionReport check_modified_condition(const Network& net, const Strategy& s, const FlowState& flow,
                                                const MarginalState& m, double tol,
                                                const BlockedSets* blocked = nullptr,
                                                const CacheBounds* bounds = nullptr) {
    const auto& topo = net.topology;
    detail::ReportBuilder out(ConditionKind::Modified, net.nodes(), net.items(), tol);
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId i = 0; i < net.nodes(); ++i) {
            if (net.demand.is_server(i, k)) {
                continue;
            }
            const double t = flow.arrival(i, k);
            const double y = s.y(i, k);
            const double bp = net.costs.cache[i].derivative(flow.Y[i]);
            const auto dir = detail::cache_direction(bounds, s, i, k);

            double delta = dir == detail::CacheDirection::Open ? m.cache(i, k) : kInfiniteMarginal;
            for (LinkId e : topo.out_links(i)) {
                if (blocked == nullptr || !blocked->blocked(e, k)) {
                    delta = std::min(delta, m.link(e, k));
                }
            }
            out.report().multiplier[static_cast<std::size_t>(k) * net.nodes() + i] = delta;

            const double scale = std::max(1.0, t);
            if (t <= 0.0) {
                // no traffic: the condition forces y = 0
                out.add(i, k, kNoNode, y);
            } else if (delta != kInfiniteMarginal) {
                const double gap = bp - t * delta;
                switch (dir) {
                case detail::CacheDirection::Open:
                    out.add(i, k, kNoNode, (y > 0.0 ? std::abs(gap) : std::max(0.0, -gap)) / scale);
                    break;
                case detail::CacheDirection::Saturated:
                    out.add(i, k, kNoNode, std::max(0.0, gap) / scale);
                    break;
                case detail::CacheDirection::Absent:
                    out.add(i, k, kNoNode, y);
                    break;
                }
            }

            for (LinkId e : topo.out_links(i)) {
                const double p = s.phi(e, k);
                const NodeId j = topo.link(e).to;
                if (blocked != nullptr && blocked->blocked(e, k)) {
                    out.add(i, k, j, std::max(0.0, p));
                    continue;
                }
                const double d = m.link(e, k);
                out.add(i, k, j, p > 0.0 ? std::abs(d - delta) : std::max(0.0, delta - d));
            }
        }
    }
    return std::move(out.report());
}

inline ConditionReport check_modified_condition(const Network& net, const Strategy& s, double tol,
                                                const BlockedSets* blocked = nullptr,
                                                const CacheBounds* bounds = nullptr) {
    const FlowState flow = solve_traffic(net, s);
    const MarginalState m = compute_marginals(net, s, flow, blocked);
    return check_modified_condition(net, s, flow, m, tol, blocked, bounds);
}

} // namespace ecn
