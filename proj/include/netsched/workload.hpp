#pragma once

// Workload sources: the synthetic generator, external trace ingestion and the
// internal round-trippable CSV form. All produce a JobStream sorted by submit time.

#include "datacenter.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace netsched {

template <typename T>
struct Range {
    T lo{};
    T hi{};

    bool valid() const { return lo <= hi; }
    bool contains(T v) const { return lo <= v && v <= hi; }

    friend bool operator==(const Range&, const Range&) = default;
};

struct CommSpec {
    Range<std::int64_t> count{1, 5};
    Range<std::int64_t> volume_kb{100, 102400};

    friend bool operator==(const CommSpec&, const CommSpec&) = default;
};

struct WorkloadSpec {
    std::size_t n_jobs = 100;
    std::size_t n_tasks = 300;
    std::size_t n_containers = 300;
    Range<std::int64_t> duration{20, 30};
    Range<std::int64_t> cpu{100, 1700};
    Range<std::int64_t> mem{1, 32};
    Range<std::int64_t> gpu{50, 200};
    CommSpec comm;
    Tick arrival_window = 36;
    std::uint64_t seed = 1;

    void validate() const {
        auto check = [](const auto& r, const char* name, std::int64_t min_lo) {
            if (!r.valid()) throw ValidationError(std::string("workload: ") + name + " range is empty");
            if (r.lo < min_lo)
                throw ValidationError(std::string("workload: ") + name + " lower bound must be >= " +
                                      std::to_string(min_lo));
        };
        check(duration, "duration", 1);
        check(cpu, "cpu", 0);
        check(mem, "mem", 0);
        check(gpu, "gpu", 0);
        check(comm.count, "comm_count", 0);
        check(comm.volume_kb, "comm_volume", 0);
        if (arrival_window < 0) throw ValidationError("workload: arrival_window must be >= 0");
        if (n_tasks < n_jobs) throw ValidationError("workload: n_tasks must be >= n_jobs");
        if (n_containers < n_tasks) throw ValidationError("workload: n_containers must be >= n_tasks");
        if (n_jobs == 0 && n_tasks > 0) throw ValidationError("workload: tasks need at least one job");
    }

    friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Jobs in submit order; `next` is the first job not yet handed out.
struct JobStream {
    std::vector<Job> jobs;
    std::vector<Task> tasks;
    std::vector<Container> containers;
    std::size_t next = 0;

    bool exhausted() const { return next >= jobs.size(); }

    friend bool operator==(const JobStream&, const JobStream&) = default;
};

/// Jobs whose submit time has been reached. Called once per tick with
/// non-decreasing t this returns exactly the jobs submitted at t.
inline std::vector<JobId> arrivals_at(JobStream& stream, Tick t) {
    std::vector<JobId> out;
    while (stream.next < stream.jobs.size() && stream.jobs[stream.next].submit_time <= t) {
        out.push_back(stream.jobs[stream.next].id);
        ++stream.next;
    }
    return out;
}

namespace detail {

inline void push_task(JobStream& s, Job& job, Task task) {
    task.id = s.tasks.size();
    task.job_id = job.id;
    job.task_ids.push_back(task.id);
    for (std::size_t i = 0; i < task.instance_num; ++i) {
        Container c;
        c.id = s.containers.size();
        c.task_id = task.id;
        c.job_id = job.id;
        c.request = task.request;
        c.type = task.type;
        c.duration = task.duration;
        c.submit_time = job.submit_time;
        job.container_ids.push_back(c.id);
        s.containers.push_back(std::move(c));
    }
    s.tasks.push_back(task);
}

} // namespace detail

/// Fills every container's comm plan: count partners drawn from the same job,
/// strictly increasing trigger thresholds in [0, duration). Solo containers get none.
inline void assign_comm_plans(JobStream& s, const CommSpec& spec, Rng& rng) {
    for (auto& c : s.containers) {
        c.comm_plan.clear();
        const auto& siblings = s.jobs[c.job_id].container_ids;
        if (siblings.size() < 2) continue;
        const auto count = static_cast<std::size_t>(rng.uniform_int(spec.count.lo, spec.count.hi));
        std::vector<double> triggers(count);
        while (true) {
            for (auto& t : triggers) t = rng.uniform_real(0.0, c.duration);
            std::sort(triggers.begin(), triggers.end());
            if (std::adjacent_find(triggers.begin(), triggers.end()) == triggers.end()) break;
        }
        for (const double trig : triggers) {
            CommEvent e;
            e.trigger_at = trig;
            auto pick = rng.index(siblings.size() - 1);
            const auto self = static_cast<std::size_t>(
                std::find(siblings.begin(), siblings.end(), c.id) - siblings.begin());
            if (pick >= self) ++pick;
            e.partner = siblings[pick];
            e.volume_kb = static_cast<double>(rng.uniform_int(spec.volume_kb.lo, spec.volume_kb.hi));
            c.comm_plan.push_back(e);
        }
    }
}

/// Seeded synthetic workload. Tasks go to jobs round-robin, each task gets one
/// instance and the remaining containers are spread round-robin over tasks.
inline JobStream generate_synthetic(const WorkloadSpec& spec) {
    spec.validate();
    auto arrivals = Rng::substream(spec.seed, "arrivals");
    auto requests = Rng::substream(spec.seed, "requests");
    auto comm = Rng::substream(spec.seed, "comm");

    std::vector<Tick> submit(spec.n_jobs);
    for (auto& s : submit) s = arrivals.uniform_int(0, spec.arrival_window);
    std::vector<std::size_t> order(spec.n_jobs);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return submit[a] < submit[b]; });

    std::vector<std::size_t> instances(spec.n_tasks, 1);
    for (std::size_t e = 0; e + spec.n_tasks < spec.n_containers; ++e) ++instances[e % spec.n_tasks];

    JobStream s;
    s.jobs.reserve(spec.n_jobs);
    s.tasks.reserve(spec.n_tasks);
    s.containers.reserve(spec.n_containers);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto slot = order[rank];
        Job job;
        job.id = rank;
        job.submit_time = submit[slot];
        for (std::size_t k = slot; k < spec.n_tasks; k += spec.n_jobs) {
            Task t;
            t.instance_num = instances[k];
            t.duration = static_cast<double>(requests.uniform_int(spec.duration.lo, spec.duration.hi));
            t.request.cpu = static_cast<double>(requests.uniform_int(spec.cpu.lo, spec.cpu.hi));
            t.request.mem = static_cast<double>(requests.uniform_int(spec.mem.lo, spec.mem.hi));
            t.request.gpu = static_cast<double>(requests.uniform_int(spec.gpu.lo, spec.gpu.hi));
            t.type = static_cast<ContainerType>(requests.uniform_int(0, 2));
            detail::push_task(s, job, t);
        }
        s.jobs.push_back(std::move(job));
    }
    assign_comm_plans(s, spec.comm, comm);
    return s;
}

/// Containers whose request exceeds the capacity of every host. They can never run.
inline std::vector<std::string> feasibility_warnings(const JobStream& s, std::span<const HostSpec> hosts) {
    std::vector<std::string> out;
    for (const auto& t : s.tasks) {
        const bool fits = std::any_of(hosts.begin(), hosts.end(),
                                      [&](const HostSpec& h) { return t.request.fits_within(h.capacity()); });
        if (!fits)
            out.push_back("task " + std::to_string(t.id) + " (job " + std::to_string(t.job_id) +
                          ") requests more than any single host offers");
    }
    return out;
}

/// Which trace columns hold which attribute. Read from an INI `[columns]` section.
struct TraceMapping {
    std::string job_id;
    std::string task_id;
    std::string instance_num;
    std::string cpu;
    std::string mem;
    std::string gpu;
    std::string duration;
    std::string submit_time;
    std::string container_type; // optional, derived when empty

    static TraceMapping parse(std::string_view ini_text) {
        boost::property_tree::ptree tree;
        std::istringstream in{std::string(ini_text)};
        try {
            boost::property_tree::ini_parser::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ParseError("trace mapping: " + e.message(), e.line());
        }
        TraceMapping m;
        const std::pair<const char*, std::string*> keys[] = {
            {"job_id", &m.job_id}, {"task_id", &m.task_id},         {"instance_num", &m.instance_num},
            {"cpu", &m.cpu},       {"mem", &m.mem},                 {"gpu", &m.gpu},
            {"duration", &m.duration}, {"submit_time", &m.submit_time}, {"container_type", &m.container_type},
        };
        for (const auto& [section, body] : tree) {
            if (section != "columns") throw ConfigError(section, "unknown section in trace mapping");
            for (const auto& [key, value] : body) {
                auto it = std::find_if(std::begin(keys), std::end(keys),
                                       [&](const auto& kv) { return key == kv.first; });
                if (it == std::end(keys)) throw ConfigError("columns." + key, "unknown key");
                *it->second = std::string(text::trim(value.data()));
            }
        }
        for (const auto& [key, field] : keys) {
            if (std::string_view(key) != "container_type" && field->empty())
                throw ConfigError(std::string("columns.") + key, "required mapping is missing");
        }
        return m;
    }
};

struct TraceOptions {
    ResourceVector mean_capacity{8000, 128, 800};
    CommSpec comm;
    std::uint64_t seed = 1;
};

struct TraceIngest {
    JobStream stream;
    std::size_t dropped_rows = 0;
};

/// Builds a JobStream from a task-level trace. Each row is one task; submit
/// times are shifted so the earliest becomes tick 0 and floored to ticks.
inline TraceIngest ingest_trace(std::string_view csv_text, const TraceMapping& mapping, const TraceOptions& opts) {
    const auto rows = text::lines(csv_text);
    if (rows.empty()) throw ParseError("trace is empty (no header)", 1);
    std::unordered_map<std::string, std::size_t> col;
    const auto header = text::split(rows[0], ',');
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(text::trim(header[i])), i);

    auto locate = [&](const std::string& key, const std::string& name) -> std::size_t {
        auto it = col.find(name);
        if (it == col.end()) throw ConfigError("columns." + key, "column '" + name + "' not found in trace header");
        return it->second;
    };
    const auto c_job = locate("job_id", mapping.job_id);
    const auto c_task = locate("task_id", mapping.task_id);
    const auto c_inst = locate("instance_num", mapping.instance_num);
    const auto c_cpu = locate("cpu", mapping.cpu);
    const auto c_mem = locate("mem", mapping.mem);
    const auto c_gpu = locate("gpu", mapping.gpu);
    const auto c_dur = locate("duration", mapping.duration);
    const auto c_sub = locate("submit_time", mapping.submit_time);
    constexpr auto no_column = static_cast<std::size_t>(-1);
    const std::size_t c_type =
        mapping.container_type.empty() ? no_column : locate("container_type", mapping.container_type);

    struct Row {
        std::string job;
        std::string task;
        Task t;
        double submit;
    };
    std::vector<Row> kept;
    TraceIngest result;
    for (std::size_t ln = 1; ln < rows.size(); ++ln) {
        if (text::trim(rows[ln]).empty()) continue;
        const auto cells = text::split(rows[ln], ',');
        auto cell = [&](std::size_t c) -> std::string_view {
            if (c >= cells.size()) throw ParseError("row has too few fields", ln + 1);
            return text::trim(cells[c]);
        };
        auto num = [&](std::size_t c, std::string_view what) {
            const auto v = text::to_double(cell(c));
            if (!v) throw ParseError(std::string(what) + " is not a number", ln + 1);
            return *v;
        };
        Row r;
        r.job = std::string(cell(c_job));
        r.task = std::string(cell(c_task));
        const double inst = num(c_inst, "instance_num");
        if (inst < 1 || inst != std::floor(inst)) throw ParseError("instance_num must be an integer >= 1", ln + 1);
        r.t.instance_num = static_cast<std::size_t>(inst);
        r.t.request = {num(c_cpu, "cpu"), num(c_mem, "mem"), num(c_gpu, "gpu")};
        if (!r.t.request.non_negative()) throw ParseError("resource requests must be >= 0", ln + 1);
        r.t.duration = num(c_dur, "duration");
        r.submit = num(c_sub, "submit_time");
        if (!(r.t.duration > 0)) {
            ++result.dropped_rows;
            continue;
        }
        if (c_type != no_column) {
            const std::string name(cell(c_type));
            const auto ty = parse_container_type(name);
            if (!ty) throw ParseError("unknown container type '" + name + "'", ln + 1);
            r.t.type = *ty;
        } else {
            r.t.type = derive_container_type(r.t.request, opts.mean_capacity);
        }
        kept.push_back(std::move(r));
    }

    double origin = 0;
    if (!kept.empty())
        origin = std::min_element(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.submit < b.submit; })
                     ->submit;

    // Jobs in order of first appearance, then stably by submit time.
    std::vector<std::string> job_keys;
    std::unordered_map<std::string, std::vector<std::size_t>> job_rows;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        auto [it, inserted] = job_rows.try_emplace(kept[i].job);
        if (inserted) job_keys.push_back(kept[i].job);
        for (const auto prev : it->second) {
            if (kept[prev].task == kept[i].task)
                throw ValidationError("trace: duplicate task '" + kept[i].task + "' in job '" + kept[i].job + "'");
        }
        it->second.push_back(i);
    }
    std::vector<Tick> job_submit(job_keys.size());
    for (std::size_t j = 0; j < job_keys.size(); ++j) {
        double m = kept[job_rows[job_keys[j]].front()].submit;
        for (const auto i : job_rows[job_keys[j]]) m = std::min(m, kept[i].submit);
        job_submit[j] = static_cast<Tick>(std::floor(m - origin));
    }
    std::vector<std::size_t> order(job_keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return job_submit[a] < job_submit[b]; });

    auto& s = result.stream;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        Job job;
        job.id = rank;
        job.submit_time = job_submit[order[rank]];
        for (const auto i : job_rows[job_keys[order[rank]]]) detail::push_task(s, job, kept[i].t);
        s.jobs.push_back(std::move(job));
    }
    auto comm = Rng::substream(opts.seed, "comm");
    assign_comm_plans(s, opts.comm, comm);
    return result;
}

inline constexpr std::string_view kStreamHeader =
    "job_id,submit_time,task_id,container_id,container_type,duration,cpu,mem,gpu,instance_num,comm_plan";

/// One row per container. comm_plan is `trigger@partner@volume_kb` items joined by ';'.
inline std::string serialize_stream(const JobStream& s) {
    std::string out(kStreamHeader);
    out += '\n';
    for (const auto& c : s.containers) {
        const auto& t = s.tasks[c.task_id];
        out += std::to_string(c.job_id) + ',' + std::to_string(s.jobs[c.job_id].submit_time) + ',' +
               std::to_string(c.task_id) + ',' + std::to_string(c.id) + ',' + std::string(to_string(c.type)) + ',' +
               text::exact(c.duration) + ',' + text::exact(c.request.cpu) + ',' + text::exact(c.request.mem) + ',' +
               text::exact(c.request.gpu) + ',' + std::to_string(t.instance_num) + ',';
        for (std::size_t i = 0; i < c.comm_plan.size(); ++i) {
            const auto& e = c.comm_plan[i];
            if (i) out += ';';
            out += text::exact(e.trigger_at) + '@' + std::to_string(e.partner) + '@' + text::exact(e.volume_kb);
        }
        out += '\n';
    }
    return out;
}

/// Inverse of serialize_stream.
inline JobStream parse_stream(std::string_view csv_text) {
    const auto rows = text::lines(csv_text);
    if (rows.empty() || text::trim(rows[0]) != kStreamHeader)
        throw ParseError("workload header must be '" + std::string(kStreamHeader) + "'", 1);
    JobStream s;
    for (std::size_t ln = 1; ln < rows.size(); ++ln) {
        if (text::trim(rows[ln]).empty()) continue;
        const auto f = text::split(rows[ln], ',');
        if (f.size() != 11) throw ParseError("expected 11 fields", ln + 1);
        auto integer = [&](std::size_t i, const char* what) {
            const auto v = text::to_int(f[i]);
            if (!v || *v < 0) throw ParseError(std::string(what) + " must be a non-negative integer", ln + 1);
            return static_cast<std::size_t>(*v);
        };
        auto real = [&](std::string_view v, const char* what) {
            const auto d = text::to_double(v);
            if (!d) throw ParseError(std::string(what) + " is not a number", ln + 1);
            return *d;
        };
        const auto job_id = integer(0, "job_id");
        const auto task_id = integer(2, "task_id");
        const auto cid = integer(3, "container_id");
        if (cid != s.containers.size()) throw ParseError("container ids must be consecutive from 0", ln + 1);
        if (job_id == s.jobs.size()) {
            Job j;
            j.id = job_id;
            j.submit_time = static_cast<Tick>(integer(1, "submit_time"));
            if (!s.jobs.empty() && j.submit_time < s.jobs.back().submit_time)
                throw ParseError("jobs must be sorted by submit_time", ln + 1);
            s.jobs.push_back(j);
        } else if (job_id + 1 != s.jobs.size()) {
            throw ParseError("job ids must be consecutive and grouped", ln + 1);
        }
        auto& job = s.jobs.back();
        if (task_id == s.tasks.size()) {
            Task t;
            t.id = task_id;
            t.job_id = job_id;
            const auto ty = parse_container_type(f[4]);
            if (!ty) throw ParseError("unknown container type", ln + 1);
            t.type = *ty;
            t.duration = real(f[5], "duration");
            if (!(t.duration > 0)) throw ParseError("duration must be > 0", ln + 1);
            t.request = {real(f[6], "cpu"), real(f[7], "mem"), real(f[8], "gpu")};
            t.instance_num = integer(9, "instance_num");
            job.task_ids.push_back(t.id);
            s.tasks.push_back(t);
        } else if (task_id + 1 != s.tasks.size()) {
            throw ParseError("task ids must be consecutive and grouped", ln + 1);
        }
        const auto& t = s.tasks.back();
        Container c;
        c.id = cid;
        c.task_id = t.id;
        c.job_id = job_id;
        c.request = t.request;
        c.type = t.type;
        c.duration = t.duration;
        c.submit_time = job.submit_time;
        const auto plan = text::trim(f[10]);
        if (!plan.empty()) {
            for (const auto item : text::split(plan, ';')) {
                const auto parts = text::split(item, '@');
                if (parts.size() != 3) throw ParseError("comm_plan item must be trigger@partner@volume", ln + 1);
                CommEvent e;
                e.trigger_at = real(parts[0], "comm trigger");
                const auto p = text::to_int(parts[1]);
                if (!p || *p < 0) throw ParseError("comm partner must be a container id", ln + 1);
                e.partner = static_cast<ContainerId>(*p);
                e.volume_kb = real(parts[2], "comm volume");
                if (!c.comm_plan.empty() && e.trigger_at <= c.comm_plan.back().trigger_at)
                    throw ParseError("comm triggers must be strictly increasing", ln + 1);
                c.comm_plan.push_back(e);
            }
        }
        job.container_ids.push_back(c.id);
        s.containers.push_back(std::move(c));
    }
    for (const auto& t : s.tasks) {
        const auto n = std::count_if(s.containers.begin(), s.containers.end(),
                                     [&](const Container& c) { return c.task_id == t.id; });
        if (static_cast<std::size_t>(n) != t.instance_num)
            throw ValidationError("task " + std::to_string(t.id) + ": instance_num does not match its rows");
    }
    for (const auto& c : s.containers) {
        for (const auto& e : c.comm_plan) {
            if (e.partner >= s.containers.size() || s.containers[e.partner].job_id != c.job_id || e.partner == c.id)
                throw ValidationError("container " + std::to_string(c.id) + ": comm partner outside its job");
        }
    }
    return s;
}

} // namespace netsched
