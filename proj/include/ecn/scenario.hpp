#pragma once

#include "ecn/cost.hpp"
#include "ecn/error.hpp"
#include "ecn/network.hpp"
#include "ecn/random.hpp"
#include "ecn/topology.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ecn {

enum class TopologyKind { ConnectedER, Grid, FullTree, Fog, SmallWorld, File };
enum class LinkCostFamily { Cubic, Linear, Queueing };

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct ScenarioSpec {
    std::string name = "grid-25";
    TopologyKind topology = TopologyKind::Grid;
    int width = 5;  // grid
    int height = 5; // grid
    int arity = 2;  // trees
    int depth = 6;  // trees, number of levels
    int nodes = 50; // ER and small-world
    double er_probability = 0.07;
    double long_range_probability = 1.0; // small-world
    std::string file;                    // File topologies
    int catalog = 30;
    int requests = 100;
    double zipf = 1.0;
    Range rate{1.0, 5.0};
    Range link_cost{0.1, 0.1};
    Range cache_price{10.0, 10.0};
    LinkCostFamily family = LinkCostFamily::Cubic;
};

// A generated instance plus the linear parameters it was drawn from.
struct Scenario {
    std::string name;
    Network net;
    std::vector<double> d; // per directed link
    std::vector<double> b; // per node
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------- topologies

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

inline EdgeList grid_edges(int w, int h) {
    if (w < 1 || h < 1) {
        throw ConfigError("grid dimensions must be positive");
    }
    EdgeList out;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const NodeId v = r * w + c;
            if (c + 1 < w) {
                out.emplace_back(v, v + 1);
            }
            if (r + 1 < h) {
                out.emplace_back(v, v + w);
            }
        }
    }
    return out;
}

inline int full_tree_size(int arity, int depth) {
    if (arity < 1 || depth < 1) {
        throw ConfigError("tree arity and depth must be positive");
    }
    long n = 0;
    long level = 1;
    for (int d = 0; d < depth; ++d) {
        n += level;
        level *= arity;
        if (n > 1000000) {
            throw ConfigError("tree too large");
        }
    }
    return static_cast<int>(n);
}

// Nodes in breadth-first order; children of v are arity*v+1 .. arity*v+arity.
inline EdgeList full_tree_edges(int arity, int depth) {
    const int n = full_tree_size(arity, depth);
    EdgeList out;
    for (NodeId v = 1; v < n; ++v) {
        out.emplace_back((v - 1) / arity, v);
    }
    return out;
}

// Full tree with the children of each parent chained in a line.
inline EdgeList fog_edges(int arity, int depth) {
    const int n = full_tree_size(arity, depth);
    EdgeList out = full_tree_edges(arity, depth);
    for (NodeId p = 0; p < n; ++p) {
        for (int c = 1; c < arity; ++c) {
            const long a = static_cast<long>(arity) * p + c;
            if (a + 1 < n) {
                out.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(a + 1));
            }
        }
    }
    return out;
}

inline bool connected(int n, const EdgeList& edges) {
    if (n == 0) {
        return true;
    }
    std::vector<std::vector<NodeId>> adj(n);
    for (auto [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<char> seen(n, 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == n;
}

// Erdos-Renyi G(n, p), redrawn from the same stream until connected.
inline EdgeList connected_er_edges(int n, double p, Rng& rng, int max_attempts = 100000) {
    if (n < 1 || !(p > 0.0) || p > 1.0) {
        throw ConfigError("connected-ER needs n >= 1 and p in (0, 1]");
    }
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        EdgeList out;
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                if (rng.bernoulli(p)) {
                    out.emplace_back(u, v);
                }
            }
        }
        if (connected(n, out)) {
            return out;
        }
    }
    throw ConfigError("could not draw a connected ER graph; increase p");
}

// Ring plus distance-2 chords plus, per node, one long-range chord to a random
// non-adjacent node with the given probability. Redrawn until the directed
// link count is within 10% of 6n.
inline EdgeList small_world_edges(int n, double long_range_p, Rng& rng, int max_attempts = 10000) {
    if (n < 5) {
        throw ConfigError("small-world needs at least 5 nodes");
    }
    const double target = 6.0 * n;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::set<std::pair<NodeId, NodeId>> edges;
        auto add = [&](NodeId u, NodeId v) {
            if (u == v) {
                return false;
            }
            return edges.emplace(std::min(u, v), std::max(u, v)).second;
        };
        for (NodeId v = 0; v < n; ++v) {
            add(v, (v + 1) % n);
            add(v, (v + 2) % n);
        }
        for (NodeId v = 0; v < n; ++v) {
            if (!rng.bernoulli(long_range_p)) {
                continue;
            }
            for (int tries = 0; tries < 32; ++tries) {
                const auto u = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
                if (add(v, u)) {
                    break;
                }
            }
        }
        const double links = 2.0 * static_cast<double>(edges.size());
        if (std::abs(links - target) <= 0.1 * target) {
            return EdgeList(edges.begin(), edges.end());
        }
    }
    throw ConfigError("could not draw a small-world graph near the target edge count");
}

// ---------------------------------------------------------------- topology files

struct TopologyFile {
    Topology topology;
    std::vector<double> d;                // per directed link
    std::vector<std::optional<double>> b; // per node
    std::vector<std::string> warnings;
};

// Line-oriented format:
//   nodes N
//   edge u v d      directed link u -> v with linear weight d
//   cache i b       unit cache price of node i
// '#' starts a comment. A missing reverse link is added with the same weight.
inline TopologyFile parse_topology(std::istream& in) {
    int n = -1;
    std::vector<Link> links;
    std::vector<double> weights;
    std::map<std::pair<NodeId, NodeId>, int> seen;
    std::map<NodeId, double> prices;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) {
            raw.erase(hash);
        }
        std::istringstream ls(raw);
        std::string key;
        if (!(ls >> key)) {
            continue;
        }
        auto require_nodes = [&] {
            if (n < 0) {
                throw ParseError(lineno, "'" + key + "' before 'nodes'");
            }
        };
        auto check_node = [&](long v) {
            if (v < 0 || v >= n) {
                throw ParseError(lineno, "node " + std::to_string(v) + " out of range");
            }
        };
        std::string extra;
        if (key == "nodes") {
            long count;
            if (n >= 0) {
                throw ParseError(lineno, "'nodes' given twice");
            }
            if (!(ls >> count) || count < 1 || (ls >> extra)) {
                throw ParseError(lineno, "expected 'nodes N' with N >= 1");
            }
            n = static_cast<int>(count);
        } else if (key == "edge") {
            require_nodes();
            long u, v;
            double d;
            if (!(ls >> u >> v >> d) || (ls >> extra)) {
                throw ParseError(lineno, "expected 'edge u v d'");
            }
            check_node(u);
            check_node(v);
            if (u == v) {
                throw ParseError(lineno, "self-link at node " + std::to_string(u));
            }
            if (!(d >= 0.0) || !std::isfinite(d)) {
                throw ParseError(lineno, "link weight must be finite and nonnegative");
            }
            const auto key_uv = std::make_pair(static_cast<NodeId>(u), static_cast<NodeId>(v));
            if (auto it = seen.find(key_uv); it != seen.end()) {
                throw ParseError(lineno, "duplicate edge " + std::to_string(u) + " " + std::to_string(v) +
                                             " (first on line " + std::to_string(it->second) + ")");
            }
            seen.emplace(key_uv, lineno);
            links.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
            weights.push_back(d);
        } else if (key == "cache") {
            require_nodes();
            long i;
            double b;
            if (!(ls >> i >> b) || (ls >> extra)) {
                throw ParseError(lineno, "expected 'cache i b'");
            }
            check_node(i);
            if (!(b >= 0.0) || !std::isfinite(b)) {
                throw ParseError(lineno, "cache price must be finite and nonnegative");
            }
            prices[static_cast<NodeId>(i)] = b;
        } else {
            throw ParseError(lineno, "unknown keyword '" + key + "'");
        }
    }
    if (n < 0) {
        throw ParseError(lineno, "missing 'nodes' line");
    }
    TopologyFile out;
    const std::size_t given = links.size();
    for (std::size_t e = 0; e < given; ++e) {
        const auto [u, v] = links[e];
        if (!seen.contains({v, u})) {
            out.warnings.push_back("edge " + std::to_string(u) + " " + std::to_string(v) +
                                   " has no reverse; added " + std::to_string(v) + " " + std::to_string(u));
            links.push_back({v, u});
            weights.push_back(weights[e]);
            seen.emplace(std::make_pair(v, u), 0);
        }
    }
    out.topology = Topology(n, std::move(links));
    out.d = std::move(weights);
    out.b.assign(n, std::nullopt);
    for (auto [i, b] : prices) {
        out.b[i] = b;
    }
    return out;
}

inline TopologyFile load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open topology file " + path);
    }
    return parse_topology(in);
}

// ---------------------------------------------------------------- demand

// Cumulative Zipf(s) weights over ranks 1..n, item k has weight 1/(k+1)^s.
class ZipfSampler {
public:
    ZipfSampler(int n, double s) : cdf_(n) {
        if (n < 1) {
            throw ConfigError("Zipf needs at least one item");
        }
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            acc += std::pow(static_cast<double>(k + 1), -s);
            cdf_[k] = acc;
        }
        for (double& c : cdf_) {
            c /= acc;
        }
    }

    double probability(int k) const { return k == 0 ? cdf_[0] : cdf_[k] - cdf_[k - 1]; }

    int operator()(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return it == cdf_.end() ? static_cast<int>(cdf_.size()) - 1 : static_cast<int>(it - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

inline CostFunction link_cost_function(LinkCostFamily family, double d) {
    switch (family) {
    case LinkCostFamily::Cubic:
        return CostFunction::cubic_expansion(d);
    case LinkCostFamily::Linear:
        return CostFunction::linear(d);
    case LinkCostFamily::Queueing:
        if (!(d > 0.0)) {
            throw ConfigError("queueing link cost needs d > 0");
        }
        return CostFunction::queueing(1.0 / d);
    }
    return CostFunction::linear(d);
}

// Rebuilds link and cache cost functions from the linear parameters.
inline void apply_costs(Scenario& sc, LinkCostFamily family) {
    sc.net.costs.link.clear();
    for (double d : sc.d) {
        sc.net.costs.link.push_back(link_cost_function(family, d));
    }
    sc.net.costs.cache.clear();
    for (double b : sc.b) {
        sc.net.costs.cache.push_back(CostFunction::linear(b));
    }
}

inline double draw(Rng& rng, Range r) { return r.hi > r.lo ? rng.uniform(r.lo, r.hi) : r.lo; }

inline Scenario generate_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
    if (spec.catalog < 1 || spec.requests < 0) {
        throw ConfigError("catalog must be positive and requests nonnegative");
    }
    if (spec.rate.lo < 0.0 || spec.rate.hi < spec.rate.lo || spec.link_cost.lo < 0.0 ||
        spec.link_cost.hi < spec.link_cost.lo || spec.cache_price.lo < 0.0 ||
        spec.cache_price.hi < spec.cache_price.lo) {
        throw ConfigError("invalid parameter range");
    }
    Rng topo_rng(derive_seed(seed, {1}));
    Rng demand_rng(derive_seed(seed, {2}));
    Rng cost_rng(derive_seed(seed, {3}));

    Scenario sc;
    sc.name = spec.name;
    std::vector<std::optional<double>> file_prices;
    std::vector<double> file_weights;
    int n = 0;
    switch (spec.topology) {
    case TopologyKind::Grid:
        n = spec.width * spec.height;
        sc.net.topology = Topology::from_undirected(n, grid_edges(spec.width, spec.height));
        break;
    case TopologyKind::FullTree:
        n = full_tree_size(spec.arity, spec.depth);
        sc.net.topology = Topology::from_undirected(n, full_tree_edges(spec.arity, spec.depth));
        break;
    case TopologyKind::Fog:
        n = full_tree_size(spec.arity, spec.depth);
        sc.net.topology = Topology::from_undirected(n, fog_edges(spec.arity, spec.depth));
        break;
    case TopologyKind::ConnectedER:
        n = spec.nodes;
        sc.net.topology = Topology::from_undirected(n, connected_er_edges(n, spec.er_probability, topo_rng));
        break;
    case TopologyKind::SmallWorld:
        n = spec.nodes;
        sc.net.topology =
            Topology::from_undirected(n, small_world_edges(n, spec.long_range_probability, topo_rng));
        break;
    case TopologyKind::File: {
        auto tf = load_topology_file(spec.file);
        n = tf.topology.node_count();
        sc.net.topology = std::move(tf.topology);
        file_weights = std::move(tf.d);
        file_prices = std::move(tf.b);
        sc.warnings = std::move(tf.warnings);
        std::vector<std::pair<NodeId, NodeId>> und;
        for (const auto& l : sc.net.topology.links()) {
            if (l.from < l.to) {
                und.emplace_back(l.from, l.to);
            }
        }
        if (!connected(n, und)) {
            throw ConfigError("topology file describes a disconnected graph");
        }
        break;
    }
    }

    const auto& topo = sc.net.topology;
    const int c = spec.catalog;
    sc.net.demand = Demand(n, c);
    for (ItemId k = 0; k < c; ++k) {
        sc.net.demand.add_server(k, static_cast<NodeId>(demand_rng.below(static_cast<std::uint64_t>(n))));
    }
    // requester/item pairs without replacement; a server never requests its own item
    const long capacity = static_cast<long>(n) * c - c;
    if (spec.requests > capacity) {
        throw ConfigError("requested " + std::to_string(spec.requests) + " request pairs but only " +
                          std::to_string(capacity) + " non-server pairs exist");
    }
    const ZipfSampler zipf(c, spec.zipf);
    int placed = 0;
    while (placed < spec.requests) {
        const auto i = static_cast<NodeId>(demand_rng.below(static_cast<std::uint64_t>(n)));
        const ItemId k = zipf(demand_rng);
        if (sc.net.demand.is_server(i, k) || sc.net.demand.rate(i, k) > 0.0) {
            continue;
        }
        double r = draw(demand_rng, spec.rate);
        if (!(r > 0.0)) {
            throw ConfigError("request rates must be positive");
        }
        sc.net.demand.set_rate(i, k, r);
        ++placed;
    }

    sc.d.assign(topo.link_count(), 0.0);
    if (spec.topology == TopologyKind::File) {
        sc.d = file_weights;
    } else {
        // one weight per undirected pair
        for (LinkId e = 0; e < topo.link_count(); ++e) {
            if (topo.link(e).from < topo.link(e).to) {
                sc.d[e] = draw(cost_rng, spec.link_cost);
                sc.d[topo.reverse(e)] = sc.d[e];
            }
        }
    }
    sc.b.assign(n, 0.0);
    for (NodeId i = 0; i < n; ++i) {
        const double drawn = draw(cost_rng, spec.cache_price);
        sc.b[i] = (i < static_cast<NodeId>(file_prices.size()) && file_prices[i]) ? *file_prices[i] : drawn;
    }
    apply_costs(sc, spec.family);
    sc.net.validate();
    return sc;
}

// Named scenario rows. File-backed rows (geant, lhc, dtelekom) need spec.file set.
inline ScenarioSpec preset(const std::string& name) {
    ScenarioSpec s;
    s.name = name;
    s.link_cost = {0.05, 0.1};
    if (name == "grid-25") {
        s.topology = TopologyKind::Grid;
        s.width = s.height = 5;
        s.catalog = 30;
        s.requests = 100;
        s.link_cost = {0.1, 0.1};
        s.cache_price = {10, 10};
    } else if (name == "grid-100") {
        s.topology = TopologyKind::Grid;
        s.width = s.height = 10;
        s.catalog = 100;
        s.requests = 400;
        s.cache_price = {20, 40};
    } else if (name == "connected-er") {
        s.topology = TopologyKind::ConnectedER;
        s.nodes = 50;
        s.catalog = 80;
        s.requests = 200;
        s.cache_price = {5, 10};
    } else if (name == "full-tree") {
        s.topology = TopologyKind::FullTree;
        s.arity = 2;
        s.depth = 6;
        s.catalog = 50;
        s.requests = 150;
        s.cache_price = {20, 30};
    } else if (name == "fog") {
        s.topology = TopologyKind::Fog;
        s.arity = 3;
        s.depth = 4;
        s.catalog = 50;
        s.requests = 200;
        s.cache_price = {30, 50};
    } else if (name == "small-world") {
        s.topology = TopologyKind::SmallWorld;
        s.nodes = 120;
        s.catalog = 100;
        s.requests = 400;
        s.cache_price = {10, 20};
    } else if (name == "geant") {
        s.topology = TopologyKind::File;
        s.catalog = 40;
        s.requests = 100;
        s.cache_price = {10, 15};
    } else if (name == "lhc") {
        s.topology = TopologyKind::File;
        s.catalog = 30;
        s.requests = 100;
        s.link_cost = {0.1, 0.15};
        s.cache_price = {10, 15};
    } else if (name == "dtelekom") {
        s.topology = TopologyKind::File;
        s.catalog = 100;
        s.requests = 300;
        s.link_cost = {0.1, 0.2};
        s.cache_price = {10, 20};
    } else {
        throw ConfigError("unknown scenario preset '" + name + "'");
    }
    return s;
}

// ---------------------------------------------------------------- scenario documents

inline nlohmann::json cost_to_json(const CostFunction& f) {
    using K = CostFunction::Kind;
    switch (f.kind()) {
    case K::Zero:
        return {{"kind", "zero"}};
    case K::Linear:
        return {{"kind", "linear"}, {"c", f.coefficients()[0]}};
    case K::Polynomial:
        return {{"kind", "polynomial"}, {"coefficients", f.coefficients()}};
    case K::Queueing:
        return {{"kind", "queueing"}, {"mu", f.service_rate()}};
    }
    return {};
}

inline CostFunction cost_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
        return CostFunction::zero();
    }
    if (kind == "linear") {
        return CostFunction::linear(j.at("c").get<double>());
    }
    if (kind == "polynomial") {
        return CostFunction::polynomial(j.at("coefficients").get<std::vector<double>>());
    }
    if (kind == "queueing") {
        return CostFunction::queueing(j.at("mu").get<double>());
    }
    throw ConfigError("unknown cost kind '" + kind + "'");
}

// {"name", "nodes", "catalog", "links": [{"from","to","d","cost"}], "nodes_info": [{"b","cost"}],
//  "servers": [[...] per item], "requests": [{"node","item","rate"}]}
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    const auto& net = sc.net;
    nlohmann::json j;
    j["name"] = sc.name;
    j["nodes"] = net.nodes();
    j["catalog"] = net.items();
    auto& links = j["links"] = nlohmann::json::array();
    for (LinkId e = 0; e < net.links(); ++e) {
        const auto& l = net.topology.link(e);
        links.push_back({{"from", l.from},
                         {"to", l.to},
                         {"d", e < static_cast<LinkId>(sc.d.size()) ? sc.d[e] : 0.0},
                         {"cost", cost_to_json(net.costs.link[e])}});
    }
    auto& nodes = j["nodes_info"] = nlohmann::json::array();
    for (NodeId i = 0; i < net.nodes(); ++i) {
        nodes.push_back({{"b", i < static_cast<NodeId>(sc.b.size()) ? sc.b[i] : 0.0},
                         {"cost", cost_to_json(net.costs.cache[i])}});
    }
    auto& servers = j["servers"] = nlohmann::json::array();
    for (ItemId k = 0; k < net.items(); ++k) {
        const auto s = net.demand.servers(k);
        servers.push_back(std::vector<NodeId>(s.begin(), s.end()));
    }
    auto& req = j["requests"] = nlohmann::json::array();
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId i = 0; i < net.nodes(); ++i) {
            if (net.demand.rate(i, k) > 0.0) {
                req.push_back({{"node", i}, {"item", k}, {"rate", net.demand.rate(i, k)}});
            }
        }
    }
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario sc;
        sc.name = j.value("name", std::string("scenario"));
        const int n = j.at("nodes").get<int>();
        const int c = j.at("catalog").get<int>();
        std::vector<Link> links;
        for (const auto& l : j.at("links")) {
            links.push_back({l.at("from").get<NodeId>(), l.at("to").get<NodeId>()});
            sc.d.push_back(l.value("d", 0.0));
            sc.net.costs.link.push_back(cost_from_json(l.at("cost")));
        }
        sc.net.topology = Topology(n, std::move(links));
        for (const auto& v : j.at("nodes_info")) {
            sc.b.push_back(v.value("b", 0.0));
            sc.net.costs.cache.push_back(cost_from_json(v.at("cost")));
        }
        sc.net.demand = Demand(n, c);
        const auto& servers = j.at("servers");
        for (ItemId k = 0; k < c && k < static_cast<ItemId>(servers.size()); ++k) {
            for (const auto& s : servers[k]) {
                sc.net.demand.add_server(k, s.get<NodeId>());
            }
        }
        for (const auto& r : j.at("requests")) {
            sc.net.demand.set_rate(r.at("node").get<NodeId>(), r.at("item").get<ItemId>(),
                                   r.at("rate").get<double>());
        }
        sc.net.validate();
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenario document: ") + e.what());
    }
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    out << scenario_to_json(sc).dump(1) << '\n';
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse scenario " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

} // namespace ecn
