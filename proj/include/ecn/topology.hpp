#pragma once

#include "ecn/error.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecn {

using NodeId = int;
using ItemId = int;
using LinkId = int;

inline constexpr LinkId kNoLink = -1;
inline constexpr NodeId kNoNode = -1;

struct Link {
    NodeId from;
    NodeId to;

    friend bool operator==(const Link&, const Link&) = default;
};

// Directed graph with dense node ids 0..n-1 and symmetric link existence.
// Links keep the order they were given in; per-node adjacency is sorted by
// neighbor id so every traversal is deterministic.
class Topology {
public:
    Topology() = default;

    Topology(int node_count, std::vector<Link> links) : n_(node_count), links_(std::move(links)) {
        if (n_ < 0) {
            throw StructuralError("negative node count");
        }
        out_.assign(n_, {});
        for (LinkId e = 0; e < link_count(); ++e) {
            const auto [a, b] = links_[e];
            if (a < 0 || a >= n_ || b < 0 || b >= n_) {
                throw StructuralError("link (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") references a missing node");
            }
            if (a == b) {
                throw StructuralError("self-link at node " + std::to_string(a));
            }
            out_[a].push_back(e);
        }
        for (auto& adj : out_) {
            std::sort(adj.begin(), adj.end(),
                      [&](LinkId x, LinkId y) { return links_[x].to < links_[y].to; });
            for (std::size_t q = 1; q < adj.size(); ++q) {
                if (links_[adj[q]].to == links_[adj[q - 1]].to) {
                    throw StructuralError("duplicate link (" + std::to_string(links_[adj[q]].from) +
                                          "," + std::to_string(links_[adj[q]].to) + ")");
                }
            }
        }
        neighbors_.assign(n_, {});
        for (NodeId i = 0; i < n_; ++i) {
            for (LinkId e : out_[i]) {
                neighbors_[i].push_back(links_[e].to);
            }
        }
        reverse_.assign(links_.size(), kNoLink);
        for (LinkId e = 0; e < link_count(); ++e) {
            reverse_[e] = link_between(links_[e].to, links_[e].from);
            if (reverse_[e] == kNoLink) {
                throw StructuralError("link (" + std::to_string(links_[e].from) + "," +
                                      std::to_string(links_[e].to) + ") has no reverse link");
            }
        }
    }

    // Builds both directions of every undirected pair; pairs are emitted as
    // (u,v),(v,u) in input order.
    static Topology from_undirected(int node_count, const std::vector<std::pair<NodeId, NodeId>>& edges) {
        std::vector<Link> links;
        links.reserve(edges.size() * 2);
        for (auto [u, v] : edges) {
            links.push_back({u, v});
            links.push_back({v, u});
        }
        return Topology(node_count, std::move(links));
    }

    int node_count() const noexcept { return n_; }
    int link_count() const noexcept { return static_cast<int>(links_.size()); }

    const Link& link(LinkId e) const { return links_[e]; }
    std::span<const Link> links() const noexcept { return links_; }

    std::span<const LinkId> out_links(NodeId i) const { return out_[i]; }
    std::span<const NodeId> neighbors(NodeId i) const { return neighbors_[i]; }
    int degree(NodeId i) const { return static_cast<int>(out_[i].size()); }

    LinkId reverse(LinkId e) const { return reverse_[e]; }

    LinkId link_between(NodeId i, NodeId j) const {
        if (i < 0 || i >= n_) {
            return kNoLink;
        }
        const auto& adj = out_[i];
        auto it = std::lower_bound(adj.begin(), adj.end(), j,
                                   [&](LinkId e, NodeId target) { return links_[e].to < target; });
        return (it != adj.end() && links_[*it].to == j) ? *it : kNoLink;
    }

    bool adjacent(NodeId i, NodeId j) const { return link_between(i, j) != kNoLink; }

private:
    int n_ = 0;
    std::vector<Link> links_;
    std::vector<std::vector<LinkId>> out_;
    std::vector<std::vector<NodeId>> neighbors_;
    std::vector<LinkId> reverse_;
};

} // namespace ecn
