#include "ecn/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ecn;

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw ConfigError(flag + ": cannot read '" + part + "' as a number");
        }
    }
    if (out.empty()) {
        throw ConfigError(flag + " needs at least one value");
    }
    return out;
}

Range parse_range(const std::string& text, const std::string& flag) {
    const auto v = parse_list(text, flag);
    if (v.size() == 1) {
        return {v[0], v[0]};
    }
    if (v.size() != 2) {
        throw ConfigError(flag + " expects 'lo,hi'");
    }
    return {v[0], v[1]};
}

std::vector<int> parse_dims(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw ConfigError("--size: cannot read '" + text + "'");
        }
    }
    return out;
}

void apply_topology(ScenarioSpec& spec, const std::string& kind, const std::string& size) {
    static const std::map<std::string, TopologyKind> kinds{
        {"grid", TopologyKind::Grid},          {"er", TopologyKind::ConnectedER},
        {"connected-er", TopologyKind::ConnectedER}, {"full-tree", TopologyKind::FullTree},
        {"fog", TopologyKind::Fog},            {"small-world", TopologyKind::SmallWorld},
        {"file", TopologyKind::File}};
    if (!kind.empty()) {
        const auto it = kinds.find(kind);
        if (it == kinds.end()) {
            throw ConfigError("unknown topology '" + kind + "'");
        }
        spec.topology = it->second;
    }
    if (size.empty()) {
        return;
    }
    const auto dims = parse_dims(size);
    switch (spec.topology) {
    case TopologyKind::Grid:
        if (dims.size() != 2) {
            throw ConfigError("grid --size expects WxH");
        }
        spec.width = dims[0];
        spec.height = dims[1];
        break;
    case TopologyKind::FullTree:
    case TopologyKind::Fog:
        if (dims.size() != 2) {
            throw ConfigError("tree --size expects ARITYxDEPTH");
        }
        spec.arity = dims[0];
        spec.depth = dims[1];
        break;
    case TopologyKind::ConnectedER:
    case TopologyKind::SmallWorld:
        if (dims.size() != 1) {
            throw ConfigError("--size expects a node count for this topology");
        }
        spec.nodes = dims[0];
        break;
    case TopologyKind::File:
        throw ConfigError("--size does not apply to file topologies");
    }
}

LinkCostFamily parse_family(const std::string& name) {
    if (name == "cubic") return LinkCostFamily::Cubic;
    if (name == "linear") return LinkCostFamily::Linear;
    if (name == "queueing") return LinkCostFamily::Queueing;
    throw ConfigError("unknown link cost family '" + name + "'");
}

std::string point_path(const std::string& path, double value) {
    std::filesystem::path p(path);
    const auto stem = p.stem().string() + "-" + sim::format_number(value);
    return (p.parent_path() / (stem + p.extension().string())).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint caching and routing optimizer for edge cache networks"};

    std::string preset = "grid-25";
    std::string topology, size, topology_file, scenario_in, scenario_out;
    std::optional<int> catalog, requests;
    std::optional<double> zipf;
    std::string rate_range, link_cost_range, cache_price, cache_price_range, link_family;
    std::string algorithm = "gp", blocked = "static", schedule = "sync", mode = "flow", fixed_routing = "sp";
    std::string eviction = "lru";
    double alpha = 0.01, tolerance = 1e-4;
    int gcfw_n = 100, capacity = 0, tokens = 50;
    std::optional<int> periods;
    double slot_duration = 10.0, monitor_interval = 0.0;
    int slots_per_period = 20;
    std::uint64_t seed = 1;
    std::string sweep_load, sweep_price;
    std::string out_path, summary_path, trace_path;

    app.add_option("--preset", preset, "Scenario row: grid-25, grid-100, connected-er, full-tree, fog, "
                                       "small-world, geant, lhc, dtelekom");
    app.add_option("--topology", topology, "grid | er | full-tree | fog | small-world | file");
    app.add_option("--size", size, "WxH for grids, ARITYxDEPTH for trees, N otherwise");
    app.add_option("--topology-file", topology_file, "Topology description (implies --topology file)");
    app.add_option("--scenario", scenario_in, "Load a saved scenario document instead of generating one");
    app.add_option("--save-scenario", scenario_out, "Write the scenario document used by this run");
    app.add_option("--catalog", catalog, "Number of items");
    app.add_option("--requests", requests, "Number of requester/item pairs");
    app.add_option("--zipf", zipf, "Zipf exponent of item popularity");
    app.add_option("--rate-range", rate_range, "lo,hi request rate");
    app.add_option("--link-cost-range", link_cost_range, "lo,hi link weight d");
    app.add_option("--link-cost", link_family, "cubic | linear | queueing");
    app.add_option("--cache-price", cache_price, "Unit cache price b; a list runs a sweep");
    app.add_option("--cache-price-range", cache_price_range, "lo,hi unit cache price");
    app.add_option("--algorithm", algorithm, "gp | gcfw | sp-lru | sp-lfu | uniform | mincost | costgreedy");
    app.add_option("--blocked", blocked, "static | dynamic blocked sets");
    app.add_option("--schedule", schedule, "sync | async GP updates");
    app.add_option("--alpha", alpha, "GP stepsize");
    app.add_option("--tolerance", tolerance, "GP convergence residual");
    app.add_option("--N", gcfw_n, "GCFW iterations");
    app.add_option("--fixed-routing", fixed_routing, "Fixed routes for GCFW (sp)");
    app.add_option("--periods", periods, "Exact number of periods (flow GP rows, greedy steps, or simulated periods)");
    app.add_option("--mode", mode, "flow | sim");
    app.add_option("--slot-duration", slot_duration, "Slot length");
    app.add_option("--slots-per-period", slots_per_period, "Slots per period");
    app.add_option("--monitor-interval", monitor_interval, "Measurement window (default: slot length)");
    app.add_option("--tokens", tokens, "Token pool size");
    app.add_option("--capacity", capacity, "Initial per-node capacity for eviction caches");
    app.add_option("--eviction", eviction, "lru | lfu for uniform / mincost deployments");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--sweep-load", sweep_load, "Comma list of load factors");
    app.add_option("--sweep-cache-price", sweep_price, "Comma list of unit cache prices");
    app.add_option("--out", out_path, "Per-period CSV (sweeps add -VALUE before the extension)");
    app.add_option("--summary", summary_path, "Summary CSV (always echoed to stdout)");
    app.add_option("--trace", trace_path, "Line-delimited event trace of a packet simulation");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        cfg.algorithm = parse_algorithm(algorithm);
        if (mode != "flow" && mode != "sim") {
            throw ConfigError("--mode must be flow or sim");
        }
        cfg.simulate = mode == "sim";
        if (fixed_routing != "sp") {
            throw ConfigError("--fixed-routing supports only sp");
        }
        if (blocked != "static" && blocked != "dynamic") {
            throw ConfigError("--blocked must be static or dynamic");
        }
        if (schedule != "sync" && schedule != "async") {
            throw ConfigError("--schedule must be sync or async");
        }
        if (eviction != "lru" && eviction != "lfu") {
            throw ConfigError("--eviction must be lru or lfu");
        }
        if (periods && *periods < 0) {
            throw ConfigError("--periods must be nonnegative");
        }

        Scenario sc;
        if (!scenario_in.empty()) {
            sc = load_scenario(scenario_in);
        } else {
            ScenarioSpec spec = ecn::preset(preset);
            if (!topology_file.empty()) {
                spec.topology = TopologyKind::File;
                spec.file = topology_file;
            }
            apply_topology(spec, topology, size);
            if (spec.topology == TopologyKind::File && spec.file.empty()) {
                throw ConfigError("file topologies need --topology-file");
            }
            if (catalog) spec.catalog = *catalog;
            if (requests) spec.requests = *requests;
            if (zipf) spec.zipf = *zipf;
            if (!rate_range.empty()) spec.rate = parse_range(rate_range, "--rate-range");
            if (!link_cost_range.empty()) spec.link_cost = parse_range(link_cost_range, "--link-cost-range");
            if (!cache_price_range.empty()) spec.cache_price = parse_range(cache_price_range, "--cache-price-range");
            if (!link_family.empty()) spec.family = parse_family(link_family);
            sc = generate_scenario(spec, seed);
        }
        if (!link_family.empty() && !scenario_in.empty()) {
            apply_costs(sc, parse_family(link_family));
        }
        for (const auto& w : sc.warnings) {
            std::cerr << "warning: " << w << '\n';
        }

        SweepKind sweep = SweepKind::None;
        std::vector<double> values{0.0};
        if (!sweep_load.empty() && !sweep_price.empty()) {
            throw ConfigError("choose one of --sweep-load and --sweep-cache-price");
        }
        if (!cache_price.empty()) {
            const auto prices = parse_list(cache_price, "--cache-price");
            if (prices.size() > 1) {
                if (!sweep_load.empty() || !sweep_price.empty()) {
                    throw ConfigError("a --cache-price list cannot be combined with another sweep");
                }
                sweep_price = cache_price;
            } else {
                sc.net = with_cache_price(std::move(sc.net), prices[0]);
                sc.b.assign(sc.b.size(), prices[0]);
            }
        }
        if (!sweep_load.empty()) {
            sweep = SweepKind::Load;
            values = parse_list(sweep_load, "--sweep-load");
        } else if (!sweep_price.empty()) {
            sweep = SweepKind::CachePrice;
            values = parse_list(sweep_price, "--sweep-cache-price");
        }
        if (!scenario_out.empty()) {
            save_scenario(sc, scenario_out);
        }

        cfg.gp.stepsize = alpha;
        cfg.gp.tolerance = tolerance;
        cfg.gp.blocking = blocked == "static" ? BlockingMode::Static : BlockingMode::Dynamic;
        cfg.gp.schedule = schedule == "sync" ? Schedule::Synchronous : Schedule::Asynchronous;
        cfg.gp.seed = seed;
        if (periods) {
            cfg.gp.max_periods = *periods;
            cfg.gp.stop_on_convergence = false;
        } else {
            cfg.gp.max_periods = cfg.algorithm == Algorithm::CostGreedy ? sc.net.nodes() * sc.net.items() : 100000;
        }
        cfg.gcfw_iterations = gcfw_n;
        cfg.lfu = eviction == "lfu";
        cfg.sim.slot_duration = slot_duration;
        cfg.sim.slots_per_period = slots_per_period;
        cfg.sim.monitor_interval = monitor_interval > 0.0 ? monitor_interval : slot_duration;
        cfg.sim.periods = periods.value_or(10);
        cfg.sim.tokens = tokens;
        cfg.sim.initial_capacity = capacity;
        cfg.sim.seed = seed;

        std::unique_ptr<std::ofstream> trace;
        if (!trace_path.empty()) {
            if (!cfg.simulate || sweep != SweepKind::None) {
                throw ConfigError("--trace needs a single packet simulation (--mode sim, no sweep)");
            }
            trace = std::make_unique<std::ofstream>(open_out(trace_path));
            cfg.sim.trace = trace.get();
        }

        std::vector<SweepPoint> points;
        if (sweep == SweepKind::None) {
            cfg.sim.seed = seed;
            points.push_back({SweepKind::None, 0.0, run_experiment(sc.net, cfg)});
        } else {
            points = run_sweep(sc.net, cfg, sweep, values);
        }

        std::ostringstream summary;
        write_summary_header(summary);
        for (const auto& p : points) {
            write_summary_row(summary, p);
        }
        std::cout << summary.str();
        if (!summary_path.empty()) {
            open_out(summary_path) << summary.str();
        }
        if (!out_path.empty()) {
            for (const auto& p : points) {
                const auto path = sweep == SweepKind::None ? out_path : point_path(out_path, p.value);
                auto out = open_out(path);
                write_run_csv(out, p.result, cfg.simulate);
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
