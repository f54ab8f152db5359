#pragma once

// Loading inputs from files and running one configured simulation.

#include "config.hpp"
#include "datacenter.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "topology.hpp"
#include "workload.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace netsched {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

/// A topology argument is either `spine-leaf:...` or a topology file path.
inline Topology load_topology(const std::string& arg) {
    if (const auto p = parse_spine_leaf_arg(arg)) return spine_leaf(*p);
    try {
        return parse_topology(read_file(arg));
    } catch (const ParseError& e) {
        throw Error(arg + ": " + e.what());
    }
}

struct LoadedWorkload {
    JobStream stream;
    std::size_t dropped_rows = 0;
    Tick last_submit = 0;
};

/// Builds the configured workload. Relative paths resolve against `base_dir`.
inline LoadedWorkload load_workload(const SimConfig& cfg, std::span<const HostSpec> hosts,
                                    const std::filesystem::path& base_dir = {}) {
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    LoadedWorkload w;
    switch (cfg.mode) {
    case WorkloadMode::Synthetic: {
        auto spec = cfg.workload;
        spec.seed = cfg.seed;
        w.stream = generate_synthetic(spec);
        break;
    }
    case WorkloadMode::TraceInternal: w.stream = parse_stream(read_file(resolve(cfg.path))); break;
    case WorkloadMode::Trace: {
        const auto mapping = TraceMapping::parse(read_file(resolve(cfg.mapping_path)));
        TraceOptions opts;
        opts.mean_capacity = mean_capacity(hosts);
        opts.comm = cfg.workload.comm;
        opts.seed = cfg.seed;
        auto ingest = ingest_trace(read_file(resolve(cfg.trace_path)), mapping, opts);
        w.stream = std::move(ingest.stream);
        w.dropped_rows = ingest.dropped_rows;
        break;
    }
    }
    if (!w.stream.jobs.empty()) w.last_submit = w.stream.jobs.back().submit_time;
    return w;
}

inline Simulation make_simulation(const SimConfig& cfg, std::vector<HostSpec> hosts, Topology topology,
                                  JobStream stream, Tick last_submit) {
    validate_topology(topology);
    return Simulation(cfg.options(last_submit), std::move(hosts), std::move(topology), std::move(stream));
}

/// Runs to completion and returns the report.
inline SummaryReport run_simulation(const SimConfig& cfg, std::vector<HostSpec> hosts, Topology topology,
                                    JobStream stream) {
    const Tick last = stream.jobs.empty() ? 0 : stream.jobs.back().submit_time;
    auto sim = make_simulation(cfg, std::move(hosts), std::move(topology), std::move(stream), last);
    return sim.run();
}

} // namespace netsched
