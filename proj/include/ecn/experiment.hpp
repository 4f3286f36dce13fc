#pragma once

#include "ecn/fixed_routing.hpp"
#include "ecn/flow.hpp"
#include "ecn/gp.hpp"
#include "ecn/scenario.hpp"
#include "ecn/sim/packet_sim.hpp"

#include <future>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace ecn {

enum class Algorithm { GP, Gcfw, SpLru, SpLfu, Uniform, MinCost, CostGreedy };

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "gp") return Algorithm::GP;
    if (name == "gcfw") return Algorithm::Gcfw;
    if (name == "sp-lru") return Algorithm::SpLru;
    if (name == "sp-lfu") return Algorithm::SpLfu;
    if (name == "uniform") return Algorithm::Uniform;
    if (name == "mincost") return Algorithm::MinCost;
    if (name == "costgreedy") return Algorithm::CostGreedy;
    throw ConfigError("unknown algorithm '" + name + "'");
}

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::GP;
    bool simulate = false; // packet-level run instead of the flow model
    GPConfig gp;           // GP parameters; max_periods also caps CostGreedy steps
    int gcfw_iterations = 100;
    sim::SimConfig sim;
    bool lfu = false; // eviction rule for Uniform / MinCost deployments
};

// One flow-level or packet-level run reduced to the summary record plus its
// per-period rows.
struct RunResult {
    double total_cost = 0.0;
    double link_cost = 0.0;
    double cache_cost = 0.0;
    double total_cache_size = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<PeriodRecord> periods;      // flow runs
    std::vector<sim::WindowRecord> windows; // packet runs
    Strategy strategy;
};

inline double cache_size(const FlowState& flow) { return std::accumulate(flow.Y.begin(), flow.Y.end(), 0.0); }

inline PeriodRecord period_record(int period, const FlowState& flow, double residual = 0.0, long messages = 0) {
    return {period, flow.total_cost, flow.link_cost, flow.cache_cost, residual, messages};
}

inline void summarize(RunResult& r, const FlowState& flow) {
    r.total_cost = flow.total_cost;
    r.link_cost = flow.link_cost;
    r.cache_cost = flow.cache_cost;
    r.total_cache_size = cache_size(flow);
}

inline RunResult run_gp_flow(const Network& net, const GPConfig& cfg) {
    auto gp = run_gp(net, cfg, shortest_path_strategy(net));
    RunResult r;
    summarize(r, gp.flow);
    r.iterations = static_cast<int>(gp.trajectory.size());
    r.converged = gp.converged;
    r.periods = std::move(gp.trajectory);
    r.strategy = std::move(gp.strategy);
    return r;
}

// GCFW on shortest-path routes; row n is the iterate after n steps.
inline RunResult run_gcfw_flow(const Network& net, int iterations) {
    const auto inst = build_fixed_instance(net, shortest_path_next_hops(net));
    GcfwStepper stepper(inst, iterations);
    RunResult r;
    auto row = [&](const std::vector<double>& y) {
        auto flow = solve_traffic(net, induced_strategy(inst, y));
        r.periods.push_back(period_record(stepper.iteration(), flow));
    };
    row(stepper.current());
    while (!stepper.done()) {
        stepper.advance();
        row(stepper.current());
    }
    r.strategy = induced_strategy(inst, stepper.best());
    summarize(r, solve_traffic(net, r.strategy));
    r.iterations = iterations;
    r.converged = true;
    return r;
}

// Expected miss cost c_i(k) = Sum_j phi_ij(k) (w_ji + c_j(k)), w = D'(0) of the
// response link.
inline std::vector<double> miss_cost_rates(const Network& net, const Strategy& s) {
    const auto& topo = net.topology;
    const int n = net.nodes();
    std::vector<double> c(static_cast<std::size_t>(n) * net.items(), 0.0);
    for (ItemId k = 0; k < net.items(); ++k) {
        const auto order = routing_order(topo, s, k);
        if (!order) {
            throw RoutingLoop("miss costs need a loop-free strategy");
        }
        for (auto it = order->rbegin(); it != order->rend(); ++it) {
            const NodeId i = *it;
            double acc = 0.0;
            for (LinkId e : topo.out_links(i)) {
                const double p = s.phi(e, k);
                if (p > 0.0) {
                    const NodeId j = topo.link(e).to;
                    acc += p * (net.costs.link[topo.reverse(e)].derivative(0.0) +
                                c[static_cast<std::size_t>(k) * n + j]);
                }
            }
            c[static_cast<std::size_t>(k) * n + i] = acc;
        }
    }
    return c;
}

// Greedy full caching on shortest-path routes: each step caches the uncached
// pair with the largest miss-cost rate t_i(k) c_i(k). The lowest-cost point of
// the sequence is reported.
inline RunResult run_cost_greedy_flow(const Network& net, int max_steps) {
    const int n = net.nodes();
    Strategy s = shortest_path_strategy(net);
    auto flow = solve_traffic(net, s);
    RunResult r;
    r.periods.push_back(period_record(0, flow));
    r.strategy = s;
    summarize(r, flow);
    for (int step = 1; step <= max_steps; ++step) {
        const auto c = miss_cost_rates(net, s);
        std::size_t best = c.size();
        double best_score = 0.0;
        for (std::size_t a = 0; a < c.size(); ++a) {
            const NodeId i = static_cast<NodeId>(a % n);
            const ItemId k = static_cast<ItemId>(a / n);
            const double score = flow.arrival(i, k) * c[a];
            if (score > best_score && s.y(i, k) < 1.0 && !net.demand.is_server(i, k)) {
                best = a;
                best_score = score;
            }
        }
        if (best == c.size()) {
            break;
        }
        const NodeId i = static_cast<NodeId>(best % n);
        const ItemId k = static_cast<ItemId>(best / n);
        s.y(i, k) = 1.0;
        for (LinkId e : net.topology.out_links(i)) {
            s.phi(e, k) = 0.0;
        }
        flow = solve_traffic(net, s);
        r.periods.push_back(period_record(step, flow));
        if (flow.total_cost < r.total_cost) {
            r.strategy = s;
            summarize(r, flow);
        }
    }
    r.iterations = static_cast<int>(r.periods.size()) - 1;
    r.converged = true;
    return r;
}

inline sim::SimConfig sim_config_for(const ExperimentConfig& cfg) {
    using sim::Deployment;
    using sim::Policy;
    sim::SimConfig sc = cfg.sim;
    sc.stepsize = cfg.gp.stepsize;
    sc.blocking = cfg.gp.blocking;
    sc.gcfw_iterations = cfg.gcfw_iterations;
    switch (cfg.algorithm) {
    case Algorithm::GP:
        sc.policy = Policy::GP;
        break;
    case Algorithm::Gcfw:
        sc.policy = Policy::GcfwSP;
        break;
    case Algorithm::SpLru:
        sc.policy = Policy::LRU;
        sc.deployment = Deployment::Fixed;
        break;
    case Algorithm::SpLfu:
        sc.policy = Policy::LFU;
        sc.deployment = Deployment::Fixed;
        break;
    case Algorithm::Uniform:
        sc.policy = cfg.lfu ? Policy::LFU : Policy::LRU;
        sc.deployment = Deployment::Uniform;
        break;
    case Algorithm::MinCost:
        sc.policy = cfg.lfu ? Policy::LFU : Policy::LRU;
        sc.deployment = Deployment::MinCost;
        break;
    case Algorithm::CostGreedy:
        sc.policy = Policy::CostGreedy;
        break;
    }
    return sc;
}

// Packet-level summary: mean measured costs over the last period's windows.
inline RunResult run_packet(const Network& net, const ExperimentConfig& cfg) {
    auto res = sim::run_simulation(net, sim_config_for(cfg));
    RunResult r;
    if (!res.windows.empty()) {
        const int last = res.windows.back().period;
        int count = 0;
        for (const auto& w : res.windows) {
            if (w.period == last) {
                r.total_cost += w.measured_total;
                r.link_cost += w.measured_link_cost;
                r.cache_cost += w.measured_cache_cost;
                r.total_cache_size += w.total_cache_size;
                ++count;
            }
        }
        r.total_cost /= count;
        r.link_cost /= count;
        r.cache_cost /= count;
        r.total_cache_size /= count;
    }
    r.iterations = cfg.sim.periods;
    r.converged = true;
    r.windows = std::move(res.windows);
    r.strategy = std::move(res.strategy);
    return r;
}

inline RunResult run_experiment(const Network& net, const ExperimentConfig& cfg) {
    if (cfg.simulate) {
        return run_packet(net, cfg);
    }
    switch (cfg.algorithm) {
    case Algorithm::GP:
        return run_gp_flow(net, cfg.gp);
    case Algorithm::Gcfw:
        return run_gcfw_flow(net, cfg.gcfw_iterations);
    case Algorithm::CostGreedy:
        return run_cost_greedy_flow(net, cfg.gp.max_periods);
    default:
        throw ConfigError("this algorithm runs only in packet-simulation mode");
    }
}

// ---------------------------------------------------------------- sweeps

enum class SweepKind { None, Load, CachePrice };

inline const char* sweep_name(SweepKind k) {
    switch (k) {
    case SweepKind::None:
        return "none";
    case SweepKind::Load:
        return "load";
    case SweepKind::CachePrice:
        return "cache_price";
    }
    return "?";
}

inline Network scale_load(Network net, double factor) {
    if (!(factor > 0.0)) {
        throw ConfigError("load factors must be positive");
    }
    for (ItemId k = 0; k < net.items(); ++k) {
        for (NodeId i = 0; i < net.nodes(); ++i) {
            const double r = net.demand.rate(i, k);
            if (r > 0.0) {
                net.demand.set_rate(i, k, r * factor);
            }
        }
    }
    return net;
}

inline Network with_cache_price(Network net, double b) {
    if (!(b > 0.0)) {
        throw ConfigError("cache prices must be positive");
    }
    for (auto& f : net.costs.cache) {
        f = CostFunction::linear(b);
    }
    return net;
}

struct SweepPoint {
    SweepKind kind = SweepKind::None;
    double value = 0.0;
    RunResult result;
};

// Runs every point concurrently; results come back in input order. Packet
// runs get an independent seed per point.
inline std::vector<SweepPoint> run_sweep(const Network& base, const ExperimentConfig& cfg, SweepKind kind,
                                         const std::vector<double>& values) {
    std::vector<std::future<RunResult>> jobs;
    for (std::size_t a = 0; a < values.size(); ++a) {
        Network net = kind == SweepKind::Load ? scale_load(base, values[a]) : with_cache_price(base, values[a]);
        ExperimentConfig point = cfg;
        point.sim.seed = derive_seed(cfg.sim.seed, {0x5eeu, a});
        jobs.push_back(std::async(std::launch::async, [net = std::move(net), point] {
            return run_experiment(net, point);
        }));
    }
    std::vector<SweepPoint> out;
    for (std::size_t a = 0; a < values.size(); ++a) {
        out.push_back({kind, values[a], jobs[a].get()});
    }
    return out;
}

// ---------------------------------------------------------------- output

inline void write_summary_header(std::ostream& out) {
    out << "sweep_param,value,total_cost,link_cost,cache_cost,total_cache_size,iterations\n";
}

inline void write_summary_row(std::ostream& out, const SweepPoint& p) {
    using sim::format_number;
    out << sweep_name(p.kind) << ',' << format_number(p.value) << ',' << format_number(p.result.total_cost) << ','
        << format_number(p.result.link_cost) << ',' << format_number(p.result.cache_cost) << ','
        << format_number(p.result.total_cache_size) << ',' << p.result.iterations << '\n';
}

inline void write_period_csv(std::ostream& out, const std::vector<PeriodRecord>& rows) {
    using sim::format_number;
    out << "period,total_cost,link_cost,cache_cost,residual,messages\n";
    for (const auto& r : rows) {
        out << r.period << ',' << format_number(r.total_cost) << ',' << format_number(r.link_cost) << ','
            << format_number(r.cache_cost) << ',' << format_number(r.residual) << ',' << r.messages << '\n';
    }
}

inline void write_run_csv(std::ostream& out, const RunResult& r, bool simulated) {
    if (simulated) {
        sim::write_measurement_csv(out, r.windows);
    } else {
        write_period_csv(out, r.periods);
    }
}

} // namespace ecn
