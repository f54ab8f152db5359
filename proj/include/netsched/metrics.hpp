#pragma once

// Per-tick samples, end-of-run summary and the CSV / text exports.

#include "datacenter.hpp"
#include "error.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace netsched {

/// Which per-host scalar the utilization variance is computed over.
enum class VarianceMode : std::uint8_t { MeanOfThree, Dominant };

struct TickSample {
    Tick t = 0;
    std::vector<Utilization> host_util; // after this tick's completions
    std::vector<bool> host_busy;        // host had >= 1 deployed container while executing this tick
    std::size_t overloaded = 0;
    std::size_t idle_hosts = 0; // hosts below the idle threshold when migrations were chosen
    std::size_t arrivals = 0;
    std::size_t inactive = 0;
    std::size_t waiting = 0;
    std::size_t undeployed = 0;
    std::size_t deployed = 0;
    std::size_t running = 0;
    std::size_t communicating = 0;
    std::size_t migrating = 0;
    std::size_t completed = 0;
    std::size_t active_flows = 0;
    std::size_t decisions = 0;
    std::size_t migrations = 0;
};

inline double host_scalar(const Utilization& u, VarianceMode mode) {
    return mode == VarianceMode::Dominant ? u.dominant : u.mean();
}

/// Population variance across hosts of the chosen per-host utilization scalar.
inline double utilization_variance(std::span<const Utilization> hosts, VarianceMode mode) {
    if (hosts.empty()) return 0;
    double mean = 0;
    for (const auto& u : hosts) mean += host_scalar(u, mode);
    mean /= static_cast<double>(hosts.size());
    double var = 0;
    for (const auto& u : hosts) {
        const double d = host_scalar(u, mode) - mean;
        var += d * d;
    }
    return var / static_cast<double>(hosts.size());
}

inline std::size_t count_overloaded(std::span<const Utilization> hosts, double overload_threshold) {
    std::size_t n = 0;
    for (const auto& u : hosts) n += u.dominant > overload_threshold ? 1 : 0;
    return n;
}

struct SummaryReport {
    std::string algorithm;
    std::uint64_t seed = 0;
    Tick makespan = 0;
    std::size_t containers = 0;
    std::size_t completed = 0;
    double avg_response_time = 0;
    double avg_runtime = 0;
    double avg_comm_time = 0;
    std::size_t comm_samples = 0; // 0 means avg_comm_time is the empty-mean placeholder
    double total_cost = 0;
    double mean_util_variance = 0;
    std::size_t migrations = 0;
    std::size_t permanent_failures = 0;
    std::size_t dropped_decisions = 0;
    std::size_t skipped_comm_events = 0;

    friend bool operator==(const SummaryReport&, const SummaryReport&) = default;
};

/// Aggregates a finished run. Averages are over completed containers; empty
/// means are reported as 0 (see comm_samples).
inline SummaryReport summarize(std::span<const TickSample> samples, std::span<const Container> containers,
                               std::span<const Job> jobs, std::span<const HostSpec> hosts, VarianceMode mode) {
    SummaryReport r;
    r.makespan = samples.empty() ? 0 : samples.back().t + 1;
    r.containers = containers.size();
    double resp = 0, run = 0, comm = 0;
    for (const auto& c : containers) {
        if (c.status != ContainerStatus::Completed || !c.completion_time) continue;
        ++r.completed;
        resp += static_cast<double>(*c.completion_time - jobs[c.job_id].submit_time);
        run += static_cast<double>(*c.completion_time - c.first_deploy_time.value_or(*c.completion_time));
        if (c.comm_done > 0) {
            comm += c.comm_time_total;
            ++r.comm_samples;
        }
        r.migrations += c.migrations;
    }
    if (r.completed > 0) {
        r.avg_response_time = resp / static_cast<double>(r.completed);
        r.avg_runtime = run / static_cast<double>(r.completed);
    }
    if (r.comm_samples > 0) r.avg_comm_time = comm / static_cast<double>(r.comm_samples);

    double var = 0;
    for (const auto& s : samples) {
        for (std::size_t h = 0; h < s.host_busy.size() && h < hosts.size(); ++h) {
            if (s.host_busy[h]) r.total_cost += hosts[h].price;
        }
        var += utilization_variance(s.host_util, mode);
    }
    if (!samples.empty()) r.mean_util_variance = var / static_cast<double>(samples.size());
    return r;
}

inline constexpr std::string_view kTicksHeader =
    "t,arrivals,inactive,waiting,undeployed,deployed,running,communicating,migrating,completed,"
    "overloaded_hosts,idle_hosts,active_flows,decisions,migrations,busy_hosts,mean_cpu_util,mean_mem_util,"
    "mean_gpu_util,util_variance";

inline std::string ticks_csv(std::span<const TickSample> samples, VarianceMode mode) {
    std::string out(kTicksHeader);
    out += '\n';
    for (const auto& s : samples) {
        double cpu = 0, mem = 0, gpu = 0;
        for (const auto& u : s.host_util) {
            cpu += u.cpu;
            mem += u.mem;
            gpu += u.gpu;
        }
        const double n = s.host_util.empty() ? 1.0 : static_cast<double>(s.host_util.size());
        std::size_t busy = 0;
        for (const bool b : s.host_busy) busy += b ? 1 : 0;
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", s.t,
                           s.arrivals, s.inactive, s.waiting, s.undeployed, s.deployed, s.running, s.communicating,
                           s.migrating, s.completed, s.overloaded, s.idle_hosts, s.active_flows, s.decisions,
                           s.migrations, busy, cpu / n, mem / n, gpu / n, utilization_variance(s.host_util, mode));
    }
    return out;
}

inline constexpr std::string_view kContainersHeader =
    "container_id,job_id,task_id,type,duration,status,submit_time,first_deploy_time,completion_time,"
    "response_time,runtime,final_host,exec_ticks,comm_ticks,comm_events_done,comm_time_total,migrations,"
    "retries_used";

inline std::string containers_csv(std::span<const Container> containers) {
    std::string out(kContainersHeader);
    out += '\n';
    auto opt = [](const std::optional<Tick>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& c : containers) {
        std::string resp, run;
        if (c.completion_time) {
            resp = std::to_string(*c.completion_time - c.submit_time);
            if (c.first_deploy_time) run = std::to_string(*c.completion_time - *c.first_deploy_time);
        }
        out += fmt::format("{},{},{},{},{:.6f},{},{},{},{},{},{},{},{},{},{},{:.6f},{},{}\n", c.id, c.job_id,
                           c.task_id, to_string(c.type), c.duration, to_string(c.status), c.submit_time,
                           opt(c.first_deploy_time), opt(c.completion_time), resp, run,
                           c.host ? std::to_string(*c.host) : std::string(), c.exec_ticks, c.comm_ticks, c.comm_done,
                           c.comm_time_total, c.migrations, c.retries_used);
    }
    return out;
}

/// Stable `key=value` lines.
inline std::string format_summary(const SummaryReport& r) {
    std::string out;
    out += fmt::format("algorithm={}\n", r.algorithm);
    out += fmt::format("seed={}\n", r.seed);
    out += fmt::format("makespan={}\n", r.makespan);
    out += fmt::format("containers={}\n", r.containers);
    out += fmt::format("completed={}\n", r.completed);
    out += fmt::format("avg_response_time={:.6f}\n", r.avg_response_time);
    out += fmt::format("avg_runtime={:.6f}\n", r.avg_runtime);
    out += fmt::format("avg_comm_time={:.6f}\n", r.avg_comm_time);
    out += fmt::format("comm_samples={}\n", r.comm_samples);
    if (r.comm_samples == 0) out += "avg_comm_time_note=no samples\n";
    out += fmt::format("total_cost={:.6f}\n", r.total_cost);
    out += fmt::format("mean_util_variance={:.9f}\n", r.mean_util_variance);
    out += fmt::format("migrations={}\n", r.migrations);
    out += fmt::format("permanent_failures={}\n", r.permanent_failures);
    out += fmt::format("dropped_decisions={}\n", r.dropped_decisions);
    out += fmt::format("skipped_comm_events={}\n", r.skipped_comm_events);
    return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error("failed writing '" + path.string() + "'");
}

/// Writes ticks.csv, containers.csv, summary.txt and config_echo.ini into out_dir.
inline void export_run(std::span<const TickSample> samples, std::span<const Container> containers,
                       const SummaryReport& report, std::string_view config_ini, VarianceMode mode,
                       const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());
    write_file(out_dir / "ticks.csv", ticks_csv(samples, mode));
    write_file(out_dir / "containers.csv", containers_csv(containers));
    write_file(out_dir / "summary.txt", format_summary(report));
    write_file(out_dir / "config_echo.ini", config_ini);
}

} // namespace netsched
