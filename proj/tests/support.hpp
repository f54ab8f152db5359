#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include <netsched/netsched.hpp>

#include <string>
#include <vector>

namespace fixtures {

using namespace netsched;

inline std::string data_path(const std::string& name) { return std::string(NETSCHED_DATA_DIR) + "/" + name; }

inline std::vector<HostSpec> reference_hosts(std::size_t per_category = 5) {
    std::string csv(kHostsHeader);
    csv += "\n";
    const char* rows[] = {"1,{},80,1,128,1,8,1,1", "2,{},80,2,128,2,8,2,1.5", "3,{},80,3,128,3,8,3,3",
                          "4,{},80,4,128,4,8,4,5"};
    for (const auto* r : rows) csv += fmt::format(fmt::runtime(r), per_category) + "\n";
    return load_hosts(csv);
}

inline HostSpec host(HostId id, double cpu, double mem, double gpu, double speed = 1, double price = 1) {
    HostSpec h;
    h.id = id;
    h.category = "t";
    h.cpu_capacity = cpu;
    h.mem_capacity = mem;
    h.gpu_capacity = gpu;
    h.cpu_speed = h.mem_speed = h.gpu_speed = speed;
    h.price = price;
    return h;
}

/// n hosts hanging off one switch.
inline Topology star(std::size_t n, double bw = 1000, double delay_ms = 0.1, double loss = 0) {
    std::string t = "switch s\n";
    for (std::size_t i = 0; i < n; ++i) t += fmt::format("host h{}\n", i);
    for (std::size_t i = 0; i < n; ++i)
        t += fmt::format("link h{} s bw={} delay={} loss={}\n", i, text::exact(bw), text::exact(delay_ms),
                         text::exact(loss));
    return parse_topology(t);
}

/// Hand-built stream: one container per entry of `requests`, all in one job submitted at 0.
struct StreamBuilder {
    JobStream s;

    JobId job(Tick submit) {
        Job j;
        j.id = s.jobs.size();
        j.submit_time = submit;
        s.jobs.push_back(j);
        return j.id;
    }

    ContainerId container(JobId job, ResourceVector req, double duration,
                          ContainerType type = ContainerType::CpuIntensive) {
        Task t;
        t.id = s.tasks.size();
        t.job_id = job;
        t.request = req;
        t.instance_num = 1;
        t.type = type;
        t.duration = duration;
        s.tasks.push_back(t);
        s.jobs[job].task_ids.push_back(t.id);
        Container c;
        c.id = s.containers.size();
        c.task_id = t.id;
        c.job_id = job;
        c.request = req;
        c.type = type;
        c.duration = duration;
        c.submit_time = s.jobs[job].submit_time;
        s.containers.push_back(c);
        s.jobs[job].container_ids.push_back(c.id);
        return c.id;
    }

    void comm(ContainerId from, ContainerId to, double trigger, double volume_kb) {
        s.containers[from].comm_plan.push_back({trigger, to, volume_kb, CommState::Pending});
    }
};

inline SimOptions options(const std::string& algorithm = "first_fit") {
    SimOptions o;
    o.scheduler.algorithm = algorithm;
    o.max_ticks = 10000;
    return o;
}

/// The reference 20-host scenario: four host categories, a 2-spine/4-leaf fabric and the default workload.
struct Scenario {
    std::string algorithm = "first_fit";
    std::uint64_t seed = 1;
    double bandwidth = 1000;
    double loss = 0;
    double delay_ms = 0.5;
    Tick window = 36;
    std::size_t scale = 1; // multiplies hosts and workload
    std::size_t leaves = 4;
    NetworkConfig network;

    SimConfig config() const {
        SimConfig c;
        c.seed = seed;
        c.network = network;
        c.scheduler.algorithm = algorithm;
        c.workload.seed = seed;
        c.workload.arrival_window = window;
        c.workload.n_jobs = 100 * scale;
        c.workload.n_tasks = 300 * scale;
        c.workload.n_containers = 300 * scale;
        return c;
    }

    Simulation build() const {
        const auto cfg = config();
        SpineLeafParams p;
        p.spines = 2;
        p.leaves = leaves * scale;
        p.hosts_per_leaf = 5;
        p.bandwidth_mbps = bandwidth;
        p.delay_ms = delay_ms;
        p.loss = loss;
        auto stream = generate_synthetic(cfg.workload);
        const Tick last = stream.jobs.empty() ? 0 : stream.jobs.back().submit_time;
        return make_simulation(cfg, reference_hosts(5 * scale), spine_leaf(p), std::move(stream), last);
    }

    /// Runs to the end and returns the finished engine.
    Simulation run() const {
        auto sim = build();
        sim.run();
        return sim;
    }
};

} // namespace fixtures
