#pragma once

#include "ecn/cost.hpp"
#include "ecn/error.hpp"
#include "ecn/topology.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace ecn {

// Catalog, designated servers and exogenous request rates r_i(k).
// Items have unit size.
class Demand {
public:
    Demand() = default;

    Demand(int node_count, int catalog_size)
        : n_(node_count), c_(catalog_size), servers_(catalog_size),
          is_server_(static_cast<std::size_t>(node_count) * catalog_size, 0),
          rates_(static_cast<std::size_t>(node_count) * catalog_size, 0.0) {
        if (node_count < 0 || catalog_size < 0) {
            throw StructuralError("negative demand dimensions");
        }
    }

    int node_count() const noexcept { return n_; }
    int catalog_size() const noexcept { return c_; }

    void add_server(ItemId k, NodeId s) {
        check(s, k);
        if (!is_server_[index(s, k)]) {
            is_server_[index(s, k)] = 1;
            servers_[k].push_back(s);
            std::sort(servers_[k].begin(), servers_[k].end());
        }
    }

    std::span<const NodeId> servers(ItemId k) const { return servers_[k]; }
    bool is_server(NodeId i, ItemId k) const { return is_server_[index(i, k)] != 0; }

    void set_rate(NodeId i, ItemId k, double r) {
        check(i, k);
        if (!(r >= 0.0)) {
            throw ConfigError("request rates must be nonnegative");
        }
        rates_[index(i, k)] = r;
    }

    double rate(NodeId i, ItemId k) const { return rates_[index(i, k)]; }

    void scale_rates(double factor) {
        for (double& r : rates_) {
            r *= factor;
        }
    }

    double total_rate() const {
        double s = 0.0;
        for (double r : rates_) {
            s += r;
        }
        return s;
    }

    void validate() const {
        for (ItemId k = 0; k < c_; ++k) {
            if (servers_[k].empty()) {
                throw ConfigError("item " + std::to_string(k) + " has no designated server");
            }
        }
    }

private:
    std::size_t index(NodeId i, ItemId k) const {
        return static_cast<std::size_t>(k) * n_ + i;
    }

    void check(NodeId i, ItemId k) const {
        if (i < 0 || i >= n_ || k < 0 || k >= c_) {
            throw StructuralError("demand index (" + std::to_string(i) + "," + std::to_string(k) +
                                  ") out of range");
        }
    }

    int n_ = 0;
    int c_ = 0;
    std::vector<std::vector<NodeId>> servers_;
    std::vector<char> is_server_;
    std::vector<double> rates_;
};

// Everything that defines a problem instance.
struct Network {
    Topology topology;
    Demand demand;
    CostModel costs;

    int nodes() const noexcept { return topology.node_count(); }
    int links() const noexcept { return topology.link_count(); }
    int items() const noexcept { return demand.catalog_size(); }

    void validate() const {
        if (demand.node_count() != topology.node_count()) {
            throw StructuralError("demand and topology disagree on node count");
        }
        if (static_cast<int>(costs.link.size()) != topology.link_count()) {
            throw StructuralError("cost model has " + std::to_string(costs.link.size()) +
                                  " link functions for " + std::to_string(topology.link_count()) +
                                  " links");
        }
        if (static_cast<int>(costs.cache.size()) != topology.node_count()) {
            throw StructuralError("cost model cache functions do not match node count");
        }
        demand.validate();
    }
};

// Optimizers need B'_i(Y) > 0 for Y > 0 at every node.
inline void require_positive_cache_cost(const CostModel& costs) {
    for (std::size_t i = 0; i < costs.cache.size(); ++i) {
        if (costs.cache[i].identically_zero()) {
            throw ConfigError("cache cost at node " + std::to_string(i) +
                              " is identically zero; optimizers require B' > 0");
        }
    }
}

} // namespace ecn
