#pragma once

#include "ecn/random.hpp"
#include "ecn/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace ecn {

struct BarInterval {
    ItemId item;
    int line;
    double start; // offset within the line, inclusive
    double end;   // exclusive
};

// Bars of length y(k) laid end to end in item order on unit-length lines,
// wrapping at 1. P(t) is the set of items whose bar covers position t on
// some line.
class BarMap {
public:
    BarMap() = default;
    explicit BarMap(std::span<const double> y) : items_(static_cast<int>(y.size())) {
        double pos = 0.0;
        for (ItemId k = 0; k < items_; ++k) {
            const double len = std::clamp(y[k], 0.0, 1.0);
            if (len <= 0.0) {
                continue;
            }
            const double a = pos;
            const double b = pos + len;
            for (int m = static_cast<int>(std::floor(a)); m < b; ++m) {
                const double s = std::max(a, static_cast<double>(m)) - m;
                const double e = std::min(b, static_cast<double>(m + 1)) - m;
                if (e > s) {
                    bars_.push_back({k, m, s, e});
                }
            }
            pos = b;
        }
        total_ = pos;
    }

    int catalog_size() const noexcept { return items_; }
    double total_length() const noexcept { return total_; }
    const std::vector<BarInterval>& intervals() const noexcept { return bars_; }

    // Colored length of item k on all lines.
    double length(ItemId k) const {
        double acc = 0.0;
        for (const auto& b : bars_) {
            if (b.item == k) {
                acc += b.end - b.start;
            }
        }
        return acc;
    }

    // P(t) in ascending item order. t = 1 is read as 0.
    std::vector<ItemId> items_at(double t) const {
        if (t >= 1.0) {
            t = 0.0;
        }
        std::vector<ItemId> out;
        for (const auto& b : bars_) {
            if (b.start <= t && t < b.end && (out.empty() || out.back() != b.item)) {
                out.push_back(b.item);
            }
        }
        return out;
    }

private:
    int items_ = 0;
    double total_ = 0.0;
    std::vector<BarInterval> bars_;
};

inline BarMap build_bar_map(std::span<const double> y) { return BarMap(y); }

// x(k) = 1 iff k in P(u).
inline std::vector<std::uint8_t> sample_decision(const BarMap& map, double u) {
    std::vector<std::uint8_t> x(map.catalog_size(), 0);
    for (ItemId k : map.items_at(u)) {
        x[k] = 1;
    }
    return x;
}

// Per-node bar maps of a caching strategy.
inline std::vector<BarMap> build_bar_maps(const Strategy& s) {
    std::vector<BarMap> maps;
    maps.reserve(s.node_count());
    std::vector<double> row(s.catalog_size());
    for (NodeId i = 0; i < s.node_count(); ++i) {
        for (ItemId k = 0; k < s.catalog_size(); ++k) {
            row[k] = s.y(i, k);
        }
        maps.emplace_back(row);
    }
    return maps;
}

// One DRR slot: each node draws its own u from a stream derived from
// (seed, node, slot).
inline CacheDecision round_caching(const std::vector<BarMap>& maps, int catalog_size, std::uint64_t seed,
                                   std::uint64_t slot) {
    CacheDecision x(static_cast<int>(maps.size()), catalog_size);
    for (NodeId i = 0; i < static_cast<NodeId>(maps.size()); ++i) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i), slot}));
        for (ItemId k : maps[i].items_at(rng.uniform())) {
            x.set(i, k, true);
        }
    }
    return x;
}

} // namespace ecn
