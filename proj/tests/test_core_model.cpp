#include "oracles.hpp"

#include "ecn/blocked_sets.hpp"
#include "ecn/conditions.hpp"
#include "ecn/flow.hpp"
#include "ecn/marginals.hpp"
#include "ecn/network.hpp"
#include "ecn/strategy.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

using namespace ecn;
using Catch::Approx;

namespace {

// i=0, j=1, s=2; d_ij = d_ji = 1, d_js = d_sj = 5; cost-free caching.
Network relay_fixture() {
    Network net = oracle::make_linear_network(3, {{0, 1}, {1, 2}}, {1.0, 5.0}, 0.0, 1);
    net.demand.add_server(0, 2);
    net.demand.set_rate(0, 0, 1.0);
    return net;
}

Strategy relay_loop(const Network& net) {
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    oracle::set_phi(net, s, 1, 0, 0, 0.5);
    s.y(1, 0) = 0.5;
    return s;
}

Strategy relay_loop_free(const Network& net) {
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    oracle::set_phi(net, s, 1, 2, 0, 0.5);
    s.y(1, 0) = 0.5;
    return s;
}

CacheBounds relay_bounds() {
    CacheBounds b(3, 1);
    b.set(0, 0, 0.0);
    b.set(1, 0, 0.5);
    b.set(2, 0, 0.0);
    return b;
}

// 0 - 1 - 2, server 2, unit linear links.
Network unit_path() {
    Network net = oracle::make_linear_network(3, {{0, 1}, {1, 2}}, {1.0, 1.0}, 1.0, 1);
    net.demand.add_server(0, 2);
    net.demand.set_rate(0, 0, 1.0);
    return net;
}

Strategy path_routing(const Network& net) {
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    oracle::set_phi(net, s, 1, 2, 0, 1.0);
    return s;
}

} // namespace

TEST_CASE("validate_strategy accepts exact conservation", "[strategy]") {
    const auto net = unit_path();
    const auto v = validate_strategy(net.topology, net.demand, path_routing(net));
    CHECK(v.ok());
    CHECK(v.max_violation == 0.0);
}

TEST_CASE("validate_strategy flags a caching server", "[strategy]") {
    const auto net = unit_path();
    auto s = path_routing(net);
    s.y(2, 0) = 0.3;
    const auto v = validate_strategy(net.topology, net.demand, s);
    REQUIRE_FALSE(v.ok());
    CHECK(v.violations.front().node == 2);
    CHECK(v.max_violation == Approx(0.3));
}

TEST_CASE("validate_strategy flags a routing fraction above one", "[strategy]") {
    const auto net = unit_path();
    auto s = path_routing(net);
    oracle::set_phi(net, s, 0, 1, 0, 1.2);
    const auto v = validate_strategy(net.topology, net.demand, s);
    REQUIRE_FALSE(v.ok());
    bool box = false;
    for (const auto& x : v.violations) {
        box = box || (x.what.find("outside") != std::string::npos && x.magnitude == Approx(0.2));
    }
    CHECK(box);
}

TEST_CASE("validate_strategy rejects mismatched dimensions", "[strategy]") {
    const auto net = unit_path();
    Strategy s(net.topology, 2);
    CHECK_THROWS_AS(validate_strategy(net.topology, net.demand, s), StructuralError);
}

TEST_CASE("requests at a server terminate immediately", "[traffic]") {
    Network net = oracle::make_linear_network(2, {{0, 1}}, {1.0}, 1.0, 1);
    net.demand.add_server(0, 0);
    net.demand.set_rate(0, 0, 1.0);
    const auto flow = solve_traffic(net, Strategy(net.topology, 1));
    CHECK(flow.arrival(0, 0) == 1.0);
    for (double f : flow.F) {
        CHECK(f == 0.0);
    }
    CHECK(flow.total_cost == 0.0);
}

TEST_CASE("unit relay along a path", "[traffic]") {
    const auto net = unit_path();
    const auto flow = solve_traffic(net, path_routing(net));
    for (NodeId i = 0; i < 3; ++i) {
        CHECK(flow.arrival(i, 0) == Approx(1.0));
    }
    CHECK(flow.F[net.topology.link_between(1, 0)] == Approx(1.0));
    CHECK(flow.F[net.topology.link_between(2, 1)] == Approx(1.0));
    CHECK(flow.F[net.topology.link_between(0, 1)] == 0.0);
}

TEST_CASE("two-node loop matches the closed form", "[traffic]") {
    const auto net = relay_fixture();
    const auto s = relay_loop(net);
    const auto flow = solve_traffic(net, s);
    const double pij = 1.0, pji = 0.5, ri = 1.0, rj = 0.0;
    CHECK(flow.arrival(0, 0) == Approx((ri + pji * rj) / (1 - pij * pji)));
    CHECK(flow.arrival(1, 0) == Approx((rj + pij * ri) / (1 - pij * pji)));
    CHECK(flow.F[net.topology.link_between(1, 0)] == Approx(2.0));
    CHECK(flow.F[net.topology.link_between(0, 1)] == Approx(1.0));
}

TEST_CASE("unit-product circulation is reported as divergent", "[traffic]") {
    const auto net = relay_fixture();
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    oracle::set_phi(net, s, 1, 0, 0, 1.0);
    CHECK_THROWS_AS(solve_traffic(net, s), DivergentCirculation);
}

TEST_CASE("queueing capacity errors propagate from the solver", "[traffic]") {
    Network net = oracle::make_network(2, {{0, 1}}, {CostFunction::queueing(0.5)}, {CostFunction::linear(1.0), CostFunction::linear(1.0)}, 1);
    net.demand.add_server(0, 1);
    net.demand.set_rate(0, 0, 1.0);
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    CHECK_THROWS_AS(solve_traffic(net, s), CapacityExceeded);
}

TEST_CASE("zero flow has zero cost", "[cost]") {
    auto net = unit_path();
    net.demand.set_rate(0, 0, 0.0);
    CHECK(solve_traffic(net, path_routing(net)).total_cost == 0.0);
}

TEST_CASE("relay fixture costs 3 with the loop and 3.5 without", "[cost]") {
    const auto net = relay_fixture();
    const auto loop = solve_traffic(net, relay_loop(net));
    const auto free = solve_traffic(net, relay_loop_free(net));
    CHECK(std::abs(total_cost(loop, net.costs) - 3.0) <= 1e-9);
    CHECK(std::abs(total_cost(free, net.costs) - 3.5) <= 1e-9);
    CHECK(loop.F[net.topology.link_between(2, 1)] == 0.0);
    CHECK(free.F[net.topology.link_between(2, 1)] == Approx(0.5));
}

TEST_CASE("relay fixture weights are pinned by its two totals", "[cost]") {
    // Unknowns: a = d_ij = d_ji, c = d_js = d_sj. Each configuration is linear
    // in (a, c) with coefficients from the solved flows at unit weights.
    Network unit = oracle::make_linear_network(3, {{0, 1}, {1, 2}}, {1.0, 0.0}, 0.0, 1);
    Network far = oracle::make_linear_network(3, {{0, 1}, {1, 2}}, {0.0, 1.0}, 0.0, 1);
    for (Network* n : {&unit, &far}) {
        n->demand.add_server(0, 2);
        n->demand.set_rate(0, 0, 1.0);
    }
    const double a1 = solve_traffic(unit, relay_loop(unit)).total_cost;
    const double c1 = solve_traffic(far, relay_loop(far)).total_cost;
    const double a2 = solve_traffic(unit, relay_loop_free(unit)).total_cost;
    const double c2 = solve_traffic(far, relay_loop_free(far)).total_cost;
    const double det = a1 * c2 - c1 * a2;
    REQUIRE(std::abs(det) > 1e-12);
    const double a = (3.0 * c2 - c1 * 3.5) / det;
    const double c = (a1 * 3.5 - a2 * 3.0) / det;
    CHECK(a == Approx(1.0));
    CHECK(c == Approx(5.0));
}

TEST_CASE("marginals vanish at the server", "[marginals]") {
    const auto net = unit_path();
    const auto s = path_routing(net);
    const auto m = compute_marginals(net, s, solve_traffic(net, s));
    CHECK(m.rate_marginal(2, 0) == 0.0);
    CHECK(m.cache(2, 0) == kInfiniteMarginal);
}

TEST_CASE("rate marginals on a unit path", "[marginals]") {
    const auto net = unit_path();
    const auto s = path_routing(net);
    const auto m = compute_marginals(net, s, solve_traffic(net, s));
    CHECK(m.rate_marginal(1, 0) == Approx(1.0));
    CHECK(m.rate_marginal(0, 0) == Approx(2.0));
    for (NodeId i : {0, 1}) {
        auto f = [&](double h) {
            Network p = net;
            p.demand.set_rate(i, 0, net.demand.rate(i, 0) + h);
            return solve_traffic(p, s).total_cost;
        };
        // forward difference: node 1 has no exogenous rate, costs are linear
        CHECK((f(1e-4) - f(0.0)) / 1e-4 == Approx(m.rate_marginal(i, 0)).epsilon(1e-6));
    }
}

TEST_CASE("cache marginal is infinite without traffic", "[marginals]") {
    auto net = unit_path();
    net.demand.set_rate(0, 0, 0.0);
    const auto s = path_routing(net);
    const auto m = compute_marginals(net, s, solve_traffic(net, s));
    CHECK(m.cache(0, 0) == kInfiniteMarginal);
    CHECK(m.min(0, 0) < kInfiniteMarginal);
}

TEST_CASE("dense and acyclic marginal paths agree on the loop fixture", "[marginals]") {
    const auto net = relay_fixture();
    const auto s = relay_loop(net);
    const auto m = compute_marginals(net, s, solve_traffic(net, s));
    CHECK(m.rate_marginal(1, 0) == Approx(2.0));
    CHECK(m.rate_marginal(0, 0) == Approx(3.0));
    for (NodeId i : {0, 1}) {
        auto f = [&](double h) {
            Network p = net;
            p.demand.set_rate(i, 0, net.demand.rate(i, 0) + h);
            return solve_traffic(p, s).total_cost;
        };
        // forward difference: node 1 has no exogenous rate, costs are linear
        CHECK((f(1e-4) - f(0.0)) / 1e-4 == Approx(m.rate_marginal(i, 0)).epsilon(1e-6));
    }
}

TEST_CASE("KKT passes trivially where no traffic arrives", "[conditions]") {
    auto net = unit_path();
    net.demand.set_rate(0, 0, 0.0);
    const auto rep = check_kkt(net, path_routing(net), 1e-9);
    CHECK(rep.passed());
    CHECK(rep.multiplier[0] == 0.0);
}

TEST_CASE("KKT passes on a single-route network", "[conditions]") {
    Network net = oracle::make_linear_network(2, {{0, 1}}, {1.0}, 10.0, 1);
    net.demand.add_server(0, 1);
    net.demand.set_rate(0, 0, 1.0);
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 1.0);
    CHECK(check_kkt(net, s, 1e-9).passed());
}

TEST_CASE("KKT separates a brute-forced optimum from a perturbation", "[conditions]") {
    // 0 has a direct link to server 2 and a detour through 1; node 1 always
    // forwards to 2. Search over (phi_01, y_0) with phi_02 = 1 - phi_01 - y_0.
    std::vector<CostFunction> ec{CostFunction::polynomial({0.2, 0.5}), CostFunction::polynomial({1.0, 1.0}),
                                 CostFunction::polynomial({0.2, 0.5})};
    std::vector<CostFunction> cc{CostFunction::polynomial({0.5, 0.3}), CostFunction::linear(5.0),
                                 CostFunction::linear(5.0)};
    Network net = oracle::make_network(3, {{0, 1}, {0, 2}, {1, 2}}, ec, cc, 1);
    net.demand.add_server(0, 2);
    net.demand.set_rate(0, 0, 2.0);
    auto make = [&](double a, double y) {
        Strategy s(net.topology, 1);
        oracle::set_phi(net, s, 0, 1, 0, a);
        oracle::set_phi(net, s, 0, 2, 0, 1.0 - a - y);
        s.y(0, 0) = y;
        oracle::set_phi(net, s, 1, 2, 0, 1.0);
        return s;
    };
    const double step = 0.0025;
    double best = std::numeric_limits<double>::infinity();
    double ba = 0, by = 0;
    for (int p = 0; p * step <= 1.0 + 1e-12; ++p) {
        for (int q = 0; (p + q) * step <= 1.0 + 1e-12; ++q) {
            const double a = p * step, y = q * step;
            const double t = solve_traffic(net, make(a, y)).total_cost;
            if (t < best) {
                best = t;
                ba = a;
                by = y;
            }
        }
    }
    REQUIRE(ba > 0.0);
    REQUIRE(by > 0.0);
    const double tol = 0.02;
    CHECK(check_kkt(net, make(ba, by), tol).passed());
    const auto bad = check_kkt(net, make(std::max(0.0, ba - 0.2), by + 0.1), tol);
    CHECK_FALSE(bad.passed());
    CHECK(bad.worst_residual > tol);
}

TEST_CASE("relay loop satisfies the modified condition under its cache bounds", "[conditions]") {
    const auto net = relay_fixture();
    const auto bounds = relay_bounds();
    const auto loop = check_modified_condition(net, relay_loop(net), 1e-9, nullptr, &bounds);
    CHECK(loop.passed());
    CHECK(loop.multiplier[0] == Approx(3.0));
    CHECK(loop.multiplier[1] == Approx(4.0));
    CHECK_FALSE(check_modified_condition(net, relay_loop_free(net), 1e-9, nullptr, &bounds).passed());
}

TEST_CASE("unequal split across two neighbors violates the modified condition", "[conditions]") {
    Network net = oracle::make_linear_network(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 3.0, 1.0}, 50.0, 1);
    net.demand.add_server(0, 2);
    net.demand.set_rate(0, 0, 1.0);
    Strategy s(net.topology, 1);
    oracle::set_phi(net, s, 0, 1, 0, 0.5);
    oracle::set_phi(net, s, 0, 2, 0, 0.5);
    oracle::set_phi(net, s, 1, 2, 0, 1.0);
    const auto rep = check_modified_condition(net, s, 1e-6);
    REQUIRE_FALSE(rep.passed());
    bool at_zero = false;
    for (const auto& v : rep.violations) {
        at_zero = at_zero || v.node == 0;
    }
    CHECK(at_zero);
}

TEST_CASE("modified condition forces an empty cache where no traffic arrives", "[conditions]") {
    auto net = unit_path();
    net.demand.set_rate(0, 0, 0.0);
    auto s = path_routing(net);
    s.y(1, 0) = 0.2;
    oracle::set_phi(net, s, 1, 2, 0, 0.8);
    const auto rep = check_modified_condition(net, s, 1e-9);
    REQUIRE_FALSE(rep.passed());
    CHECK(rep.worst_residual == Approx(0.2));
}

TEST_CASE("marginals match finite differences on random instances", "[marginals][property]") {
    Rng rng(derive_seed(7, {1}));
    for (int trial = 0; trial < 40; ++trial) {
        const auto inst = oracle::random_instance(rng);
        const auto& net = inst.net;
        const auto& s0 = inst.strategy;
        REQUIRE(validate_strategy(net.topology, net.demand, s0).ok());
        const auto flow = solve_traffic(net, s0);
        const auto m = compute_marginals(net, s0, flow);
        for (ItemId k = 0; k < net.items(); ++k) {
            for (NodeId i = 0; i < net.nodes(); ++i) {
                if (net.demand.is_server(i, k)) {
                    continue;
                }
                std::vector<LinkId> used;
                for (LinkId e : net.topology.out_links(i)) {
                    if (s0.phi(e, k) > 0.0) {
                        used.push_back(e);
                    }
                }
                const double t = flow.arrival(i, k);
                // shift mass from the cache to each active routing direction
                for (LinkId e : used) {
                    auto f = [&](double h) {
                        Strategy s = s0;
                        s.phi(e, k) += h;
                        s.y(i, k) -= h;
                        return solve_traffic(net, s).total_cost;
                    };
                    const double expect = routing_gradient(flow, m, net.topology, e, k) -
                                          net.costs.cache[i].derivative(flow.Y[i]);
                    CHECK(oracle::relative_error(oracle::central_difference(f, 1e-5), expect) <= 1e-5);
                    CHECK(routing_gradient(flow, m, net.topology, e, k) == t * m.link(e, k));
                }
            }
        }
    }
}

TEST_CASE("solved traffic conserves requests at every node", "[traffic][property]") {
    Rng rng(derive_seed(7, {2}));
    for (int trial = 0; trial < 40; ++trial) {
        const auto inst = oracle::random_instance(rng);
        const auto& net = inst.net;
        const auto flow = solve_traffic(net, inst.strategy);
        for (ItemId k = 0; k < net.items(); ++k) {
            for (NodeId i = 0; i < net.nodes(); ++i) {
                double in = net.demand.rate(i, k);
                for (LinkId e : net.topology.out_links(i)) {
                    const LinkId back = net.topology.reverse(e);
                    in += flow.arrival(net.topology.link(back).from, k) * inst.strategy.phi(back, k);
                }
                CHECK(std::abs(in - flow.arrival(i, k)) <= 1e-9);
            }
        }
    }
}

TEST_CASE("loop-free rerouting beats any two-node loop under binary caching", "[traffic][property]") {
    // i=0, j=1 with outside neighbors p=2 (of i) and q=3 (of j); p and q serve the item.
    std::vector<CostFunction> ec(3, CostFunction::polynomial({1.0, 0.3}));
    std::vector<CostFunction> cc(4, CostFunction::linear(1.0));
    Network net = oracle::make_network(4, {{0, 1}, {0, 2}, {1, 3}}, ec, cc, 1);
    net.demand.add_server(0, 2);
    net.demand.add_server(0, 3);
    const double ri = 1.0, rj = 0.7;
    net.demand.set_rate(0, 0, ri);
    net.demand.set_rate(1, 0, rj);
    int checked = 0;
    for (int a = 1; a < 20; ++a) {
        for (int b = 1; b < 20; ++b) {
            const double pij = a / 20.0, pji = b / 20.0;
            Strategy s(net.topology, 1);
            oracle::set_phi(net, s, 0, 1, 0, pij);
            oracle::set_phi(net, s, 0, 2, 0, 1 - pij);
            oracle::set_phi(net, s, 1, 0, 0, pji);
            oracle::set_phi(net, s, 1, 3, 0, 1 - pji);
            const auto flow = solve_traffic(net, s);
            const double fip = flow.arrival(0, 0) * (1 - pij);
            const double fjq = flow.arrival(1, 0) * (1 - pji);
            CHECK(fip + fjq == Approx(ri + rj));
            Strategy r(net.topology, 1);
            if (fjq >= rj) {
                oracle::set_phi(net, r, 0, 2, 0, fip / ri);
                oracle::set_phi(net, r, 0, 1, 0, 1 - fip / ri);
                oracle::set_phi(net, r, 1, 3, 0, 1.0);
            } else {
                oracle::set_phi(net, r, 1, 3, 0, fjq / rj);
                oracle::set_phi(net, r, 1, 0, 0, 1 - fjq / rj);
                oracle::set_phi(net, r, 0, 2, 0, 1.0);
            }
            REQUIRE(is_loop_free(net.topology, r));
            const auto rf = solve_traffic(net, r);
            CHECK(rf.F[net.topology.link_between(2, 0)] == Approx(flow.F[net.topology.link_between(2, 0)]));
            CHECK(rf.F[net.topology.link_between(3, 1)] == Approx(flow.F[net.topology.link_between(3, 1)]));
            CHECK(rf.total_cost < flow.total_cost);
            ++checked;
        }
    }
    CHECK(checked == 19 * 19);
}
