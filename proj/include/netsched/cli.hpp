#pragma once

// Command-line driver: `run`, `validate` and `generate-workload`.
// Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

#include "config.hpp"
#include "metrics.hpp"
#include "run.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace netsched {

namespace cli_detail {

struct Inputs {
    std::string config_path;
    std::string hosts_path;
    std::string topology;
    std::optional<std::uint64_t> seed;
};

struct Loaded {
    SimConfig config;
    std::vector<HostSpec> hosts;
    Topology topology;
    LoadedWorkload workload;
};

inline Loaded load_all(const Inputs& in) {
    Loaded l;
    l.config = parse_config(read_file(in.config_path));
    if (in.seed) {
        l.config.seed = *in.seed;
        l.config.workload.seed = *in.seed;
    }
    l.hosts = load_hosts(read_file(in.hosts_path));
    l.topology = load_topology(in.topology);
    validate_topology(l.topology);
    if (l.hosts.size() != l.topology.host_count())
        throw ValidationError(fmt::format("hosts file defines {} hosts but the topology has {}", l.hosts.size(),
                                          l.topology.host_count()));
    l.workload = load_workload(l.config, l.hosts, std::filesystem::path(in.config_path).parent_path());
    return l;
}

inline void run_one(const Loaded& base, std::uint64_t seed, const std::filesystem::path& out_dir, std::ostream* log,
                    const Inputs& in) {
    Loaded l{base.config, base.hosts, base.topology, {}};
    l.config.seed = seed;
    l.config.workload.seed = seed;
    l.workload = seed == base.config.seed
                     ? base.workload
                     : load_workload(l.config, l.hosts, std::filesystem::path(in.config_path).parent_path());
    auto opts = l.config.options(l.workload.last_submit);
    opts.log = log;
    Simulation sim(opts, l.hosts, l.topology, std::move(l.workload.stream));
    const auto report = sim.run();
    export_run(sim.samples(), sim.containers(), report, to_ini(l.config), l.config.variance, out_dir);
}

inline void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--config", in.config_path, "simulation config (INI)")->required();
    cmd->add_option("--hosts", in.hosts_path, "hosts CSV")->required();
    cmd->add_option("--topology", in.topology, "topology file or spine-leaf:<spines>,<leaves>,<hosts-per-leaf>[,bw,delay,loss]")
        ->required();
    cmd->add_option("--seed", in.seed, "override simulation.seed");
}

} // namespace cli_detail

/// Entry point used by main(). `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"Container scheduling simulator for data center networks", "netsched"};
    app.require_subcommand(1);

    Inputs run_in;
    std::string out_dir;
    std::size_t sweep = 0;
    auto* run = app.add_subcommand("run", "run a simulation and write ticks.csv, containers.csv, summary.txt");
    add_inputs(run, run_in);
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--sweep", sweep, "run this many consecutive seeds, each into <out>/seed-<n>")
        ->check(CLI::PositiveNumber);

    Inputs val_in;
    auto* validate = app.add_subcommand("validate", "check all inputs and print the resolved configuration");
    add_inputs(validate, val_in);

    std::string spec_path, gen_out;
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("generate-workload", "write a synthetic workload as CSV");
    gen->add_option("--spec", spec_path, "config holding the [workload] section")->required();
    gen->add_option("--out", gen_out, "output CSV file")->required();
    gen->add_option("--seed", gen_seed, "override simulation.seed");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run 'netsched --help' for usage\n";
        return 2;
    }

    try {
        if (*run) {
            const auto loaded = load_all(run_in);
            for (const auto& w : feasibility_warnings(loaded.workload.stream, loaded.hosts)) err << "warning: " << w << '\n';
            std::ostream* log = loaded.config.verbosity > 0 ? &err : nullptr;
            if (sweep == 0) {
                run_one(loaded, loaded.config.seed, out_dir, log, run_in);
                out << "wrote " << out_dir << '\n';
                return 0;
            }
            const std::size_t workers =
                std::max<std::size_t>(1, std::min<std::size_t>(sweep, std::thread::hardware_concurrency()));
            std::vector<std::future<void>> running;
            std::vector<std::string> failures;
            for (std::size_t k = 0; k < sweep; ++k) {
                const auto seed = loaded.config.seed + k;
                const auto dir = std::filesystem::path(out_dir) / fmt::format("seed-{}", seed);
                running.push_back(std::async(std::launch::async, [&, seed, dir] { run_one(loaded, seed, dir, nullptr, run_in); }));
                if (running.size() == workers || k + 1 == sweep) {
                    for (std::size_t i = 0; i < running.size(); ++i) {
                        try {
                            running[i].get();
                        } catch (const std::exception& e) {
                            failures.push_back(e.what());
                        }
                    }
                    running.clear();
                }
            }
            for (const auto& f : failures) err << "error: " << f << '\n';
            out << "wrote " << sweep - failures.size() << " of " << sweep << " runs under " << out_dir << '\n';
            return failures.empty() ? 0 : 1;
        }
        if (*validate) {
            const auto l = load_all(val_in);
            out << to_ini(l.config);
            out << "\n[resolved]\n";
            out << "hosts = " << l.hosts.size() << '\n';
            out << "topology_nodes = " << l.topology.nodes().size() << '\n';
            out << "topology_links = " << l.topology.links().size() << '\n';
            out << "jobs = " << l.workload.stream.jobs.size() << '\n';
            out << "containers = " << l.workload.stream.containers.size() << '\n';
            if (l.config.mode == WorkloadMode::Trace) out << "dropped_trace_rows = " << l.workload.dropped_rows << '\n';
            out << "max_ticks = " << l.config.effective_max_ticks(l.workload.last_submit) << '\n';
            for (const auto& w : feasibility_warnings(l.workload.stream, l.hosts)) err << "warning: " << w << '\n';
            return 0;
        }
        if (*gen) {
            auto cfg = parse_config(read_file(spec_path), false);
            if (gen_seed) cfg.seed = *gen_seed;
            auto spec = cfg.workload;
            spec.seed = cfg.seed;
            write_file(gen_out, serialize_stream(generate_synthetic(spec)));
            out << "wrote " << gen_out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace netsched
