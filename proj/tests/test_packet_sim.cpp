#include "oracles.hpp"

#include "ecn/sim/packet_sim.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace ecn;
using namespace ecn::sim;
using Catch::Approx;

namespace {

// 0 - 1 - 2 (- 3 ...) line, server at the far end, requests at node 0.
Network line(int n, double d, double b, double rate) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId v = 0; v + 1 < n; ++v) {
        edges.emplace_back(v, v + 1);
    }
    Network net = oracle::make_linear_network(n, edges, std::vector<double>(edges.size(), d), b, 1);
    net.demand.add_server(0, n - 1);
    if (rate > 0.0) {
        net.demand.set_rate(0, 0, rate);
    }
    return net;
}

SimConfig quick(Policy p, int periods) {
    SimConfig cfg;
    cfg.policy = p;
    cfg.periods = periods;
    cfg.slots_per_period = 5;
    cfg.slot_duration = 10.0;
    cfg.monitor_interval = 10.0;
    return cfg;
}

} // namespace

TEST_CASE("largest-remainder apportionment", "[sim]") {
    CHECK(apportion(std::vector<double>{0.5, 0.5}, 50) == std::vector<int>{25, 25});
    CHECK(apportion(std::vector<double>{1.0}, 50) == std::vector<int>{50});
    CHECK(apportion(std::vector<double>{1.0, 1.0, 1.0}, 50) == std::vector<int>{17, 17, 16});
    CHECK(apportion(std::vector<double>{0.0, 0.7, 0.3}, 10) == std::vector<int>{0, 7, 3});
    CHECK(apportion(std::vector<double>{0.0, 0.0}, 10) == std::vector<int>{0, 0});
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(1 + rng.below(6));
        for (auto& x : w) {
            x = rng.uniform();
        }
        const auto n = apportion(w, 50);
        CHECK(std::accumulate(n.begin(), n.end(), 0) == 50);
        const double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (std::size_t a = 0; a < w.size(); ++a) {
            CHECK(std::abs(n[a] - 50.0 * w[a] / sum) < 1.0);
        }
    }
}

TEST_CASE("token pools drain before refilling", "[sim]") {
    const Topology topo = Topology::from_undirected(3, {{0, 1}, {0, 2}});
    Strategy s(topo, 1);
    s.phi(topo.link_between(0, 1), 0) = 0.5;
    s.phi(topo.link_between(0, 2), 0) = 0.5;
    TokenPool pool;
    Rng rng(5);
    int to1 = 0;
    for (int a = 0; a < 50; ++a) {
        to1 += token_forward(pool, topo, s, 0, 0, 50, rng) == 1;
        CHECK(pool.refills() == 1);
    }
    CHECK(to1 == 25);
    CHECK(pool.empty());
    token_forward(pool, topo, s, 0, 0, 50, rng);
    CHECK(pool.refills() == 2);
    CHECK(pool.size() == 49);

    Strategy single(topo, 1);
    single.phi(topo.link_between(0, 2), 0) = 1.0;
    TokenPool p2;
    CHECK(token_forward(p2, topo, single, 0, 0, 50, rng) == 2);
    CHECK(p2.count(2) == 49);

    Strategy none(topo, 1);
    TokenPool p3;
    CHECK(token_forward(p3, topo, none, 0, 0, 50, rng) == kNoNode);
}

TEST_CASE("eviction caches respect capacity", "[sim]") {
    EvictionCache lru(5, false);
    lru.set_capacity(2);
    lru.on_response(0);
    lru.on_response(1);
    lru.on_request(0);
    lru.on_response(2); // evicts 1
    CHECK(lru.contains(0));
    CHECK(!lru.contains(1));
    CHECK(lru.contains(2));
    CHECK(lru.size() == 2);
    lru.set_capacity(1);
    CHECK(lru.size() == 1);

    EvictionCache lfu(5, true);
    lfu.set_capacity(1);
    for (int a = 0; a < 3; ++a) {
        lfu.on_request(0);
    }
    lfu.on_response(0);
    lfu.on_request(1);
    lfu.on_response(1); // less frequent: not admitted
    CHECK(lfu.contains(0));
    CHECK(!lfu.contains(1));
    for (int a = 0; a < 5; ++a) {
        lfu.on_request(1);
    }
    lfu.on_response(1);
    CHECK(lfu.contains(1));
    CHECK(lfu.size() == 1);

    EvictionCache none(3, false);
    none.on_response(0);
    CHECK(none.size() == 0);
}

TEST_CASE("argmax over miss costs", "[sim]") {
    CHECK(argmax_node(std::vector<double>{10, 4, 7}) == 0);
    CHECK(argmax_node(std::vector<double>{1, 7, 7}) == 1);
    CHECK(argmax_node(std::vector<double>{0, 0}) == kNoNode);
}

TEST_CASE("no demand means no traffic", "[sim]") {
    const Network net = line(3, 0.1, 1.0, 0.0);
    const auto res = run_simulation(net, quick(Policy::Static, 2));
    REQUIRE(res.windows.size() == 10);
    for (const auto& w : res.windows) {
        CHECK(w.measured_link_cost == 0.0);
        CHECK(w.measured_cache_cost == 0.0);
    }
    CHECK(res.counters.requests_issued == 0);
}

TEST_CASE("measured flow on a single path matches the request rate", "[sim]") {
    const Network net = line(3, 0.1, 1.0, 2.0);
    auto cfg = quick(Policy::Static, 20);
    const auto res = run_simulation(net, cfg);
    const double horizon = res.horizon;
    const double sigma = std::sqrt(2.0 / horizon);
    for (auto [p, q] : {std::pair{2, 1}, std::pair{1, 0}}) {
        const double f = res.link_responses[net.topology.link_between(p, q)] / horizon;
        CHECK(std::abs(f - 2.0) <= 3.0 * sigma);
    }
    CHECK(res.link_responses[net.topology.link_between(0, 1)] == 0);
    CHECK(res.counters.requests_issued == res.counters.responses_delivered + res.counters.in_flight);
    CHECK(res.counters.unroutable == 0);
}

TEST_CASE("miss cost accumulates along the response path", "[sim]") {
    const Network net = line(3, 0.1, 1.0, 3.0);
    const auto res = run_simulation(net, quick(Policy::Static, 4));
    const long served = res.counters.server_hits;
    REQUIRE(served > 0);
    // responses still in flight have not reached the requester
    const double per_packet = res.miss_cost[0] / (res.counters.responses_delivered);
    CHECK(per_packet == Approx(0.2));
    CHECK(res.miss_cost[2] == 0.0);
}

TEST_CASE("measured and theoretical cost agree at high rate", "[sim]") {
    const Network net = line(4, 0.1, 1.0, 200.0);
    const auto res = run_simulation(net, quick(Policy::Static, 4));
    for (const auto& p : track_costs(res)) {
        CHECK(p.measured / p.theoretical >= 0.98);
        CHECK(p.measured / p.theoretical <= 1.02);
    }
}

TEST_CASE("zero caching means zero measured cache cost", "[sim]") {
    const Network net = line(4, 0.1, 1.0, 5.0);
    const auto res = run_simulation(net, quick(Policy::Static, 3));
    for (const auto& w : res.windows) {
        CHECK(w.measured_cache_cost == 0.0);
        CHECK(w.total_cache_size == 0.0);
    }
}

TEST_CASE("time-averaged flows under rounding match relaxed flows", "[sim]") {
    Network net = line(4, 0.1, 1.0, 5.0);
    Strategy s(net.topology, 1);
    s.y(1, 0) = 0.5;
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    oracle::set_phi(net, s, 1, 2, 0, 0.5);
    oracle::set_phi(net, s, 2, 3, 0, 1.0);
    auto cfg = quick(Policy::Static, 400);
    cfg.initial = s;
    const auto res = run_simulation(net, cfg);
    const auto relaxed = solve_traffic(net, s);
    const double slots = 400.0 * 5;
    for (auto [p, q] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{3, 2}}) {
        const LinkId e = net.topology.link_between(p, q);
        const double f = res.link_responses[e] / res.horizon;
        // slot-level rounding noise plus Poisson counting noise
        const double sigma = std::sqrt(0.25 * 25.0 / slots + relaxed.F[e] / res.horizon);
        CHECK(std::abs(f - relaxed.F[e]) <= 3.0 * sigma);
    }
}

TEST_CASE("uniform deployment grows every cache by one per period", "[sim]") {
    Network net = oracle::make_linear_network(4, {{0, 1}, {1, 2}, {2, 3}}, {0.1, 0.1, 0.1}, 1.0, 3);
    for (ItemId k = 0; k < 3; ++k) {
        net.demand.add_server(k, 3);
        net.demand.set_rate(0, k, 1.0);
    }
    for (auto policy : {Policy::LRU, Policy::LFU}) {
        auto cfg = quick(policy, 3);
        cfg.deployment = Deployment::Uniform;
        const auto res = run_simulation(net, cfg);
        CHECK(res.capacity == std::vector<int>{3, 3, 3, 3});
        for (const auto& w : res.windows) {
            CHECK(w.total_cache_size <= 4.0 * (w.period));
            CHECK(std::isnan(w.theoretical_total));
        }
    }
}

TEST_CASE("min-cost deployment adds capacity at the costliest node", "[sim]") {
    const Network net = line(4, 0.1, 1.0, 3.0);
    auto cfg = quick(Policy::LRU, 1);
    cfg.deployment = Deployment::MinCost;
    const auto res = run_simulation(net, cfg);
    // the requester sees the longest response paths
    CHECK(res.capacity == std::vector<int>{1, 0, 0, 0});
}

TEST_CASE("cost greedy caches one pair per period while misses remain", "[sim]") {
    Network net = oracle::make_linear_network(4, {{0, 1}, {1, 2}, {2, 3}}, {0.1, 0.1, 0.1}, 1.0, 2);
    net.demand.add_server(0, 3);
    net.demand.add_server(1, 3);
    net.demand.set_rate(0, 0, 4.0);
    net.demand.set_rate(1, 1, 1.0);
    const auto res = run_simulation(net, quick(Policy::CostGreedy, 3));
    int cached = 0;
    for (ItemId k = 0; k < 2; ++k) {
        for (NodeId i = 0; i < 4; ++i) {
            cached += res.strategy.y(i, k) == 1.0;
        }
    }
    // once both requesters cache their item no miss cost is left
    CHECK(cached == 2);
    CHECK(res.strategy.y(0, 0) == 1.0);
    CHECK(res.strategy.y(1, 1) == 1.0);
    CHECK(validate_strategy(net.topology, net.demand, res.strategy).ok());
    CHECK(!std::isnan(res.windows.front().theoretical_total));
}

TEST_CASE("GP in the simulator keeps strategies valid and loop-free", "[sim]") {
    Rng rng(derive_seed(23, {1}));
    for (int trial = 0; trial < 5; ++trial) {
        const auto inst = oracle::random_instance(rng, 6, 2);
        for (auto mode : {BlockingMode::Static, BlockingMode::Dynamic}) {
            auto cfg = quick(Policy::GP, 10);
            cfg.blocking = mode;
            cfg.stepsize = 0.05;
            const auto res = run_simulation(inst.net, cfg);
            CHECK(validate_strategy(inst.net.topology, inst.net.demand, res.strategy).max_violation <= 1e-9);
            CHECK(is_loop_free(inst.net.topology, res.strategy));
            CHECK(res.counters.requests_issued == res.counters.responses_delivered + res.counters.in_flight);
            long messages = 0;
            for (const auto& w : res.windows) {
                messages += w.messages;
            }
            CHECK(messages == 10L * inst.net.items() * inst.net.links());
        }
    }
}

TEST_CASE("GCFW with shortest paths in the simulator", "[sim]") {
    const Network net = line(4, 0.5, 0.2, 3.0);
    auto cfg = quick(Policy::GcfwSP, 5);
    cfg.gcfw_iterations = 4;
    const auto res = run_simulation(net, cfg);
    CHECK(res.strategy.y(0, 0) > 0.0);
    CHECK(validate_strategy(net.topology, net.demand, res.strategy).ok());
    const auto tc = track_costs(res);
    CHECK(tc.back().theoretical < tc.front().theoretical);
}

TEST_CASE("measurement CSV and trace output", "[sim]") {
    const Network net = line(3, 0.1, 1.0, 1.0);
    std::ostringstream trace;
    auto cfg = quick(Policy::Static, 2);
    cfg.slot_duration = 10.0;
    cfg.monitor_interval = 5.0;
    cfg.trace = &trace;
    const auto res = run_simulation(net, cfg);
    CHECK(res.windows.size() == 2u * 5u * 2u);
    std::ostringstream csv;
    write_measurement_csv(csv, res.windows);
    std::istringstream in(csv.str());
    std::string line_text;
    std::getline(in, line_text);
    CHECK(line_text ==
          "period,slot,measured_link_cost,measured_cache_cost,measured_total,theoretical_total,"
          "total_cache_size,unroutable_count,messages");
    int rows = 0;
    while (std::getline(in, line_text)) {
        ++rows;
    }
    CHECK(rows == 20);
    const auto text = trace.str();
    REQUIRE(!text.empty());
    CHECK(text.front() == '{');
    CHECK(text.find("\"event\":\"deliver\"") != std::string::npos);
}

TEST_CASE("simulator configuration checks", "[sim]") {
    const Network net = line(3, 0.1, 1.0, 1.0);
    auto cfg = quick(Policy::Static, 1);
    cfg.monitor_interval = 3.0;
    CHECK_THROWS_AS(run_simulation(net, cfg), ConfigError);
    cfg = quick(Policy::Static, 1);
    cfg.tokens = 0;
    CHECK_THROWS_AS(run_simulation(net, cfg), ConfigError);
    cfg = quick(Policy::Static, 1);
    Strategy bad(net.topology, 1);
    cfg.initial = bad;
    CHECK_THROWS_AS(run_simulation(net, cfg), ConfigError);
}

TEST_CASE("simulation is reproducible for a seed", "[sim]") {
    Rng rng(derive_seed(23, {2}));
    const auto inst = oracle::random_instance(rng, 5, 2);
    const auto a = run_simulation(inst.net, quick(Policy::GP, 3));
    const auto b = run_simulation(inst.net, quick(Policy::GP, 3));
    REQUIRE(a.windows.size() == b.windows.size());
    for (std::size_t w = 0; w < a.windows.size(); ++w) {
        CHECK(a.windows[w].measured_total == b.windows[w].measured_total);
    }
    CHECK(a.strategy == b.strategy);
}
