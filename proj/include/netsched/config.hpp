#pragma once

// INI configuration: parsing with strict key checking, range validation and
// an echo that parses back to the same SimConfig.

#include "engine.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "scheduler.hpp"
#include "text.hpp"
#include "workload.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fmt/format.h>

#include <functional>
#include <optional>
#include <sstream>
#include <string>

namespace netsched {

enum class WorkloadMode : std::uint8_t { Synthetic, Trace, TraceInternal };

inline std::string_view to_string(WorkloadMode m) {
    switch (m) {
    case WorkloadMode::Synthetic: return "synthetic";
    case WorkloadMode::Trace: return "trace";
    case WorkloadMode::TraceInternal: return "trace-internal";
    }
    return "?";
}

struct SimConfig {
    std::uint64_t seed = 1;
    Tick max_ticks = 0; // 0: 100 x max(arrival window, 1)
    int verbosity = 0;
    NetworkConfig network;
    SchedulerConfig scheduler;
    WorkloadMode mode = WorkloadMode::Synthetic;
    WorkloadSpec workload;      // synthetic mode; workload.seed mirrors seed
    std::string path;           // trace-internal
    std::string trace_path;     // trace
    std::string mapping_path;   // trace
    bool block_partner = true;
    VarianceMode variance = VarianceMode::MeanOfThree;

    void validate() const {
        if (max_ticks < 0) throw ConfigError("simulation.max_ticks", "must be >= 0");
        if (verbosity < 0 || verbosity > 2) throw ConfigError("simulation.verbosity", "must be 0, 1 or 2");
        if (network.update_period < 1) throw ConfigError("network.update_period", "must be >= 1");
        if (network.stall_timeout < 1) throw ConfigError("network.stall_timeout", "must be >= 1");
        if (!(network.congestion_threshold >= 0 && network.congestion_threshold <= 1))
            throw ConfigError("network.congestion_threshold", "must be in [0, 1]");
        if (!(network.congestion_k >= 0)) throw ConfigError("network.congestion_k", "must be >= 0");
        if (network.container_nodes_per_host < 1)
            throw ConfigError("network.container_nodes_per_host", "must be >= 1");
        if (!(network.mss_bytes > 0)) throw ConfigError("network.mss_bytes", "must be > 0");
        if (!(network.mathis_const > 0)) throw ConfigError("network.mathis_const", "must be > 0");
        scheduler.validate();
        if (mode == WorkloadMode::Synthetic) {
            try {
                workload.validate();
            } catch (const ValidationError& e) {
                throw ConfigError("workload", e.what());
            }
        }
        if (mode == WorkloadMode::TraceInternal && path.empty())
            throw ConfigError("workload.path", "required when mode = trace-internal");
        if (mode == WorkloadMode::Trace && trace_path.empty())
            throw ConfigError("workload.trace_path", "required when mode = trace");
        if (mode == WorkloadMode::Trace && mapping_path.empty())
            throw ConfigError("workload.mapping_path", "required when mode = trace");
    }

    /// Safety limit for a stream whose last job arrives at `last_submit`.
    Tick effective_max_ticks(Tick last_submit) const {
        if (max_ticks > 0) return max_ticks;
        const Tick window = mode == WorkloadMode::Synthetic ? workload.arrival_window : last_submit;
        return 100 * std::max<Tick>(window, 1);
    }

    SimOptions options(Tick last_submit) const {
        SimOptions o;
        o.network = network;
        o.scheduler = scheduler;
        o.block_partner = block_partner;
        o.max_ticks = effective_max_ticks(last_submit);
        o.variance = variance;
        o.seed = seed;
        o.verbosity = verbosity;
        return o;
    }

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

namespace detail {

inline double parse_real(const std::string& loc, std::string_view v) {
    const auto d = text::to_double(v);
    if (!d || !std::isfinite(*d)) throw ConfigError(loc, "expected a number, got '" + std::string(v) + "'");
    return *d;
}

inline std::int64_t parse_integer(const std::string& loc, std::string_view v) {
    const auto d = text::to_int(v);
    if (!d) throw ConfigError(loc, "expected an integer, got '" + std::string(v) + "'");
    return *d;
}

inline std::size_t parse_count(const std::string& loc, std::string_view v) {
    const auto n = parse_integer(loc, v);
    if (n < 0) throw ConfigError(loc, "must be >= 0");
    return static_cast<std::size_t>(n);
}

inline bool parse_bool(const std::string& loc, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(loc, "expected true or false, got '" + std::string(v) + "'");
}

/// `lo~hi`, or a single value meaning lo == hi.
inline Range<std::int64_t> parse_range(const std::string& loc, std::string_view v) {
    const auto parts = text::split(v, '~');
    if (parts.size() == 1) {
        const auto x = parse_integer(loc, text::trim(parts[0]));
        return {x, x};
    }
    if (parts.size() != 2) throw ConfigError(loc, "expected lo~hi, got '" + std::string(v) + "'");
    Range<std::int64_t> r{parse_integer(loc, text::trim(parts[0])), parse_integer(loc, text::trim(parts[1]))};
    if (!r.valid()) throw ConfigError(loc, "lower bound exceeds upper bound");
    return r;
}

inline std::string range_text(const Range<std::int64_t>& r) { return fmt::format("{}~{}", r.lo, r.hi); }

} // namespace detail

/// Parses INI text. Every key is optional except scheduler.algorithm; unknown
/// sections and keys are rejected with their section.key location.
inline SimConfig parse_config(std::string_view text_in, bool require_algorithm = true) {
    boost::property_tree::ptree tree;
    std::istringstream in{std::string(text_in)};
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ParseError("config: " + e.message(), e.line());
    }

    SimConfig c;
    bool have_algorithm = false;
    using Setter = std::function<void(const std::string&, std::string_view)>;
    using namespace detail;
    const std::map<std::string, std::map<std::string, Setter>> keys = {
        {"simulation",
         {
             {"seed",
              [&](const auto& l, auto v) {
                  const auto s = parse_integer(l, v);
                  if (s < 0) throw ConfigError(l, "must be >= 0");
                  c.seed = static_cast<std::uint64_t>(s);
              }},
             {"max_ticks", [&](const auto& l, auto v) { c.max_ticks = parse_integer(l, v); }},
             {"verbosity", [&](const auto& l, auto v) { c.verbosity = static_cast<int>(parse_integer(l, v)); }},
         }},
        {"network",
         {
             {"update_period", [&](const auto& l, auto v) { c.network.update_period = parse_integer(l, v); }},
             {"max_retransmissions",
              [&](const auto& l, auto v) { c.network.max_retransmissions = parse_count(l, v); }},
             {"congestion_threshold",
              [&](const auto& l, auto v) { c.network.congestion_threshold = parse_real(l, v); }},
             {"congestion_k", [&](const auto& l, auto v) { c.network.congestion_k = parse_real(l, v); }},
             {"stall_timeout", [&](const auto& l, auto v) { c.network.stall_timeout = parse_integer(l, v); }},
             {"container_nodes_per_host",
              [&](const auto& l, auto v) { c.network.container_nodes_per_host = parse_count(l, v); }},
             {"mss_bytes", [&](const auto& l, auto v) { c.network.mss_bytes = parse_real(l, v); }},
             {"mathis_const", [&](const auto& l, auto v) { c.network.mathis_const = parse_real(l, v); }},
             {"full_duplex", [&](const auto& l, auto v) { c.network.full_duplex = parse_bool(l, v); }},
         }},
        {"scheduler",
         {
             {"algorithm",
              [&](const auto& l, auto v) {
                  if (!AlgorithmRegistry::builtin().contains(std::string(v)))
                      throw ConfigError(l, "unknown algorithm '" + std::string(v) + "'");
                  c.scheduler.algorithm = std::string(v);
                  have_algorithm = true;
              }},
             {"overload_threshold",
              [&](const auto& l, auto v) { c.scheduler.overload_threshold = parse_real(l, v); }},
             {"idle_threshold", [&](const auto& l, auto v) { c.scheduler.idle_threshold = parse_real(l, v); }},
             {"migration_bytes_per_gib",
              [&](const auto& l, auto v) { c.scheduler.migration_bytes_per_gib = parse_real(l, v); }},
             {"deploy_placement",
              [&](const auto& l, auto v) {
                  if (v == "overload_migrate" || !AlgorithmRegistry::builtin().contains(std::string(v)))
                      throw ConfigError(l, "must name a plain placement algorithm, got '" + std::string(v) + "'");
                  c.scheduler.deploy_placement = std::string(v);
              }},
         }},
        {"workload",
         {
             {"mode",
              [&](const auto& l, auto v) {
                  if (v == "synthetic") c.mode = WorkloadMode::Synthetic;
                  else if (v == "trace") c.mode = WorkloadMode::Trace;
                  else if (v == "trace-internal") c.mode = WorkloadMode::TraceInternal;
                  else throw ConfigError(l, "expected synthetic, trace or trace-internal");
              }},
             {"n_jobs", [&](const auto& l, auto v) { c.workload.n_jobs = parse_count(l, v); }},
             {"n_tasks", [&](const auto& l, auto v) { c.workload.n_tasks = parse_count(l, v); }},
             {"n_containers", [&](const auto& l, auto v) { c.workload.n_containers = parse_count(l, v); }},
             {"duration", [&](const auto& l, auto v) { c.workload.duration = parse_range(l, v); }},
             {"cpu", [&](const auto& l, auto v) { c.workload.cpu = parse_range(l, v); }},
             {"mem", [&](const auto& l, auto v) { c.workload.mem = parse_range(l, v); }},
             {"gpu", [&](const auto& l, auto v) { c.workload.gpu = parse_range(l, v); }},
             {"comm_count", [&](const auto& l, auto v) { c.workload.comm.count = parse_range(l, v); }},
             {"comm_volume_kb", [&](const auto& l, auto v) { c.workload.comm.volume_kb = parse_range(l, v); }},
             {"arrival_window", [&](const auto& l, auto v) { c.workload.arrival_window = parse_integer(l, v); }},
             {"path", [&](const auto&, auto v) { c.path = std::string(v); }},
             {"trace_path", [&](const auto&, auto v) { c.trace_path = std::string(v); }},
             {"mapping_path", [&](const auto&, auto v) { c.mapping_path = std::string(v); }},
         }},
        {"comm", {{"block_partner", [&](const auto& l, auto v) { c.block_partner = parse_bool(l, v); }}}},
        {"metrics",
         {{"variance",
           [&](const auto& l, auto v) {
               if (v == "mean") c.variance = VarianceMode::MeanOfThree;
               else if (v == "dominant") c.variance = VarianceMode::Dominant;
               else throw ConfigError(l, "expected mean or dominant");
           }}}},
    };

    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError(section, "key outside of any section");
        auto sit = keys.find(section);
        if (sit == keys.end()) throw ConfigError(section, "unknown section");
        for (const auto& [key, value] : body) {
            const auto loc = section + "." + key;
            auto kit = sit->second.find(key);
            if (kit == sit->second.end()) throw ConfigError(loc, "unknown key");
            kit->second(loc, text::trim(value.data()));
        }
    }
    if (require_algorithm && !have_algorithm) throw ConfigError("scheduler.algorithm", "required key is missing");
    c.workload.seed = c.seed;
    c.validate();
    return c;
}

/// Every key with its resolved value. parse_config(to_ini(c)) == c.
inline std::string to_ini(const SimConfig& c) {
    using text::exact;
    std::string out;
    out += "[simulation]\n";
    out += fmt::format("seed = {}\n", c.seed);
    out += fmt::format("max_ticks = {}\n", c.max_ticks);
    out += fmt::format("verbosity = {}\n", c.verbosity);
    out += "\n[network]\n";
    out += fmt::format("update_period = {}\n", c.network.update_period);
    out += fmt::format("max_retransmissions = {}\n", c.network.max_retransmissions);
    out += fmt::format("congestion_threshold = {}\n", exact(c.network.congestion_threshold));
    out += fmt::format("congestion_k = {}\n", exact(c.network.congestion_k));
    out += fmt::format("stall_timeout = {}\n", c.network.stall_timeout);
    out += fmt::format("container_nodes_per_host = {}\n", c.network.container_nodes_per_host);
    out += fmt::format("mss_bytes = {}\n", exact(c.network.mss_bytes));
    out += fmt::format("mathis_const = {}\n", exact(c.network.mathis_const));
    out += fmt::format("full_duplex = {}\n", c.network.full_duplex ? "true" : "false");
    out += "\n[scheduler]\n";
    out += fmt::format("algorithm = {}\n", c.scheduler.algorithm);
    out += fmt::format("overload_threshold = {}\n", exact(c.scheduler.overload_threshold));
    out += fmt::format("idle_threshold = {}\n", exact(c.scheduler.idle_threshold));
    out += fmt::format("migration_bytes_per_gib = {}\n", exact(c.scheduler.migration_bytes_per_gib));
    out += fmt::format("deploy_placement = {}\n", c.scheduler.deploy_placement);
    out += "\n[workload]\n";
    out += fmt::format("mode = {}\n", to_string(c.mode));
    out += fmt::format("n_jobs = {}\n", c.workload.n_jobs);
    out += fmt::format("n_tasks = {}\n", c.workload.n_tasks);
    out += fmt::format("n_containers = {}\n", c.workload.n_containers);
    out += fmt::format("duration = {}\n", detail::range_text(c.workload.duration));
    out += fmt::format("cpu = {}\n", detail::range_text(c.workload.cpu));
    out += fmt::format("mem = {}\n", detail::range_text(c.workload.mem));
    out += fmt::format("gpu = {}\n", detail::range_text(c.workload.gpu));
    out += fmt::format("comm_count = {}\n", detail::range_text(c.workload.comm.count));
    out += fmt::format("comm_volume_kb = {}\n", detail::range_text(c.workload.comm.volume_kb));
    out += fmt::format("arrival_window = {}\n", c.workload.arrival_window);
    if (!c.path.empty()) out += fmt::format("path = {}\n", c.path);
    if (!c.trace_path.empty()) out += fmt::format("trace_path = {}\n", c.trace_path);
    if (!c.mapping_path.empty()) out += fmt::format("mapping_path = {}\n", c.mapping_path);
    out += "\n[comm]\n";
    out += fmt::format("block_partner = {}\n", c.block_partner ? "true" : "false");
    out += "\n[metrics]\n";
    out += fmt::format("variance = {}\n", c.variance == VarianceMode::Dominant ? "dominant" : "mean");
    return out;
}

} // namespace netsched
