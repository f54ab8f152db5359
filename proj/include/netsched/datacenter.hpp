#pragma once

// Hosts, the job -> task -> container hierarchy, container lifecycle and
// resource accounting.

#include "error.hpp"
#include "text.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace netsched {

using Tick = std::int64_t;
using HostId = std::size_t;
using JobId = std::size_t;
using TaskId = std::size_t;
using ContainerId = std::size_t;

enum class Resource : std::uint8_t { Cpu, Mem, Gpu };

inline constexpr std::array<Resource, 3> kResources{Resource::Cpu, Resource::Mem, Resource::Gpu};

inline std::string_view to_string(Resource r) {
    switch (r) {
    case Resource::Cpu: return "cpu";
    case Resource::Mem: return "mem";
    case Resource::Gpu: return "gpu";
    }
    return "?";
}

enum class ContainerType : std::uint8_t { CpuIntensive, MemIntensive, GpuIntensive };

constexpr Resource primary_resource(ContainerType t) {
    switch (t) {
    case ContainerType::CpuIntensive: return Resource::Cpu;
    case ContainerType::MemIntensive: return Resource::Mem;
    case ContainerType::GpuIntensive: return Resource::Gpu;
    }
    return Resource::Cpu;
}

inline std::string_view to_string(ContainerType t) {
    switch (t) {
    case ContainerType::CpuIntensive: return "cpu";
    case ContainerType::MemIntensive: return "mem";
    case ContainerType::GpuIntensive: return "gpu";
    }
    return "?";
}

inline std::optional<ContainerType> parse_container_type(std::string_view s) {
    s = text::trim(s);
    if (s == "cpu" || s == "CpuIntensive") return ContainerType::CpuIntensive;
    if (s == "mem" || s == "MemIntensive") return ContainerType::MemIntensive;
    if (s == "gpu" || s == "GpuIntensive") return ContainerType::GpuIntensive;
    return std::nullopt;
}

/// CPU and GPU in percent-of-one-device units (100 = one core / one GPU), memory in GiB.
struct ResourceVector {
    double cpu = 0;
    double mem = 0;
    double gpu = 0;

    double operator[](Resource r) const {
        switch (r) {
        case Resource::Cpu: return cpu;
        case Resource::Mem: return mem;
        case Resource::Gpu: return gpu;
        }
        return 0;
    }

    bool non_negative() const { return cpu >= 0 && mem >= 0 && gpu >= 0; }

    bool fits_within(const ResourceVector& cap) const {
        return cpu <= cap.cpu && mem <= cap.mem && gpu <= cap.gpu;
    }

    ResourceVector& operator+=(const ResourceVector& o) {
        cpu += o.cpu;
        mem += o.mem;
        gpu += o.gpu;
        return *this;
    }

    friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }

    /// Componentwise difference; throws instead of going negative.
    ResourceVector minus(const ResourceVector& o) const {
        ResourceVector r{cpu - o.cpu, mem - o.mem, gpu - o.gpu};
        if (!r.non_negative()) throw ValidationError("resource subtraction would go negative");
        return r;
    }

    friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
};

struct HostSpec {
    HostId id = 0;
    std::string category;
    double cpu_capacity = 0;
    double cpu_speed = 1;
    double mem_capacity = 0;
    double mem_speed = 1;
    double gpu_capacity = 0;
    double gpu_speed = 1;
    double price = 0;

    ResourceVector capacity() const { return {cpu_capacity, mem_capacity, gpu_capacity}; }

    double speed(Resource r) const {
        switch (r) {
        case Resource::Cpu: return cpu_speed;
        case Resource::Mem: return mem_speed;
        case Resource::Gpu: return gpu_speed;
        }
        return 0;
    }

    double speed_for(ContainerType t) const { return speed(primary_resource(t)); }

    void validate() const {
        const auto where = "host " + std::to_string(id) + ": ";
        if (!(cpu_capacity > 0 && mem_capacity > 0 && gpu_capacity > 0))
            throw ValidationError(where + "capacities must be > 0");
        if (!(cpu_speed > 0 && mem_speed > 0 && gpu_speed > 0))
            throw ValidationError(where + "speeds must be > 0");
        if (!(price >= 0)) throw ValidationError(where + "price must be >= 0");
    }

    friend bool operator==(const HostSpec&, const HostSpec&) = default;
};

inline constexpr std::string_view kHostsHeader =
    "category,count,cpu_cores,cpu_speed,mem_gb,mem_speed,gpu_count,gpu_speed,price";

/// Reads the hosts CSV. A row with count=N expands to N hosts with sequential ids.
inline std::vector<HostSpec> load_hosts(std::string_view csv_text) {
    const auto rows = text::lines(csv_text);
    std::vector<HostSpec> hosts;
    if (rows.empty()) return hosts;

    const auto header = text::split(rows[0], ',');
    const auto expected = text::split(kHostsHeader, ',');
    for (std::size_t i = 0; i < std::max(header.size(), expected.size()); ++i) {
        const auto got = i < header.size() ? text::trim(header[i]) : std::string_view{"<missing>"};
        if (i >= expected.size())
            throw ParseError("unexpected hosts column '" + std::string(got) + "'", 1);
        if (got != expected[i])
            throw ParseError("hosts header column " + std::to_string(i + 1) + " is '" + std::string(got) +
                                 "', expected '" + std::string(expected[i]) + "'",
                             1);
    }

    for (std::size_t ln = 1; ln < rows.size(); ++ln) {
        if (text::trim(rows[ln]).empty()) continue;
        const auto cells = text::split(rows[ln], ',');
        if (cells.size() != expected.size())
            throw ParseError("expected " + std::to_string(expected.size()) + " fields, got " +
                                 std::to_string(cells.size()),
                             ln + 1);
        auto num = [&](std::size_t col) {
            const auto v = text::to_double(cells[col]);
            if (!v) throw ParseError("column '" + std::string(expected[col]) + "' is not a number", ln + 1);
            return *v;
        };
        const auto count = text::to_int(cells[1]);
        if (!count || *count < 0) throw ParseError("column 'count' must be a non-negative integer", ln + 1);

        HostSpec proto;
        proto.category = std::string(text::trim(cells[0]));
        proto.cpu_capacity = num(2) * 100.0;
        proto.cpu_speed = num(3);
        proto.mem_capacity = num(4);
        proto.mem_speed = num(5);
        proto.gpu_capacity = num(6) * 100.0;
        proto.gpu_speed = num(7);
        proto.price = num(8);
        for (std::int64_t k = 0; k < *count; ++k) {
            HostSpec h = proto;
            h.id = hosts.size();
            try {
                h.validate();
            } catch (const ValidationError& e) {
                throw ValidationError("line " + std::to_string(ln + 1) + ": " + e.what());
            }
            hosts.push_back(std::move(h));
        }
    }
    return hosts;
}

struct Utilization {
    double cpu = 0;
    double mem = 0;
    double gpu = 0;
    double dominant = 0;
    Resource bottleneck = Resource::Cpu;

    double fraction(Resource r) const {
        switch (r) {
        case Resource::Cpu: return cpu;
        case Resource::Mem: return mem;
        case Resource::Gpu: return gpu;
        }
        return 0;
    }

    double mean() const { return (cpu + mem + gpu) / 3.0; }
};

/// Per-resource fractions plus the dominant (max) one. Ties resolve cpu > mem > gpu.
inline Utilization utilization_of(const ResourceVector& allocated, const ResourceVector& capacity) {
    Utilization u;
    u.cpu = allocated.cpu / capacity.cpu;
    u.mem = allocated.mem / capacity.mem;
    u.gpu = allocated.gpu / capacity.gpu;
    u.dominant = u.cpu;
    u.bottleneck = Resource::Cpu;
    if (u.mem > u.dominant) {
        u.dominant = u.mem;
        u.bottleneck = Resource::Mem;
    }
    if (u.gpu > u.dominant) {
        u.dominant = u.gpu;
        u.bottleneck = Resource::Gpu;
    }
    return u;
}

/// argmax of request_r / mean_capacity_r, ties cpu > mem > gpu.
inline ContainerType derive_container_type(const ResourceVector& request, const ResourceVector& mean_capacity) {
    const double c = request.cpu / mean_capacity.cpu;
    const double m = request.mem / mean_capacity.mem;
    const double g = request.gpu / mean_capacity.gpu;
    if (c >= m && c >= g) return ContainerType::CpuIntensive;
    if (m >= g) return ContainerType::MemIntensive;
    return ContainerType::GpuIntensive;
}

inline ResourceVector mean_capacity(std::span<const HostSpec> hosts) {
    ResourceVector sum;
    for (const auto& h : hosts) sum += h.capacity();
    const double n = hosts.empty() ? 1.0 : static_cast<double>(hosts.size());
    return {sum.cpu / n, sum.mem / n, sum.gpu / n};
}

enum class ContainerStatus : std::uint8_t { Inactive, Running, Communicating, Migrating, Waiting, Completed };

inline std::string_view to_string(ContainerStatus s) {
    switch (s) {
    case ContainerStatus::Inactive: return "inactive";
    case ContainerStatus::Running: return "running";
    case ContainerStatus::Communicating: return "communicating";
    case ContainerStatus::Migrating: return "migrating";
    case ContainerStatus::Waiting: return "waiting";
    case ContainerStatus::Completed: return "completed";
    }
    return "?";
}

constexpr bool is_legal_transition(ContainerStatus from, ContainerStatus to) {
    using S = ContainerStatus;
    switch (from) {
    case S::Inactive: return to == S::Running;
    case S::Running: return to == S::Communicating || to == S::Migrating || to == S::Completed;
    case S::Communicating: return to == S::Running || to == S::Waiting;
    case S::Migrating: return to == S::Running || to == S::Waiting;
    case S::Waiting: return to == S::Running;
    case S::Completed: return false;
    }
    return false;
}

constexpr bool is_deployed(ContainerStatus s) {
    return s == ContainerStatus::Running || s == ContainerStatus::Communicating || s == ContainerStatus::Migrating;
}

constexpr bool is_undeployed(ContainerStatus s) {
    return s == ContainerStatus::Inactive || s == ContainerStatus::Waiting || s == ContainerStatus::Migrating;
}

enum class CommState : std::uint8_t { Pending, Active, Done, Skipped };

struct CommEvent {
    double trigger_at = 0; // work units in [0, duration)
    ContainerId partner = 0;
    double volume_kb = 0;
    CommState state = CommState::Pending;

    friend bool operator==(const CommEvent&, const CommEvent&) = default;
};

struct Job {
    JobId id = 0;
    Tick submit_time = 0;
    std::optional<Tick> completion_time;
    std::vector<TaskId> task_ids;
    std::vector<ContainerId> container_ids;

    friend bool operator==(const Job&, const Job&) = default;
};

struct Task {
    TaskId id = 0;
    JobId job_id = 0;
    ResourceVector request;
    std::size_t instance_num = 1;
    ContainerType type = ContainerType::CpuIntensive;
    double duration = 1; // work units, i.e. seconds at speed 1

    friend bool operator==(const Task&, const Task&) = default;
};

struct Container {
    ContainerId id = 0;
    TaskId task_id = 0;
    JobId job_id = 0;
    // Copied from the task so the hot loop does not chase indices.
    ResourceVector request;
    ContainerType type = ContainerType::CpuIntensive;
    double duration = 1;

    ContainerStatus status = ContainerStatus::Inactive;
    double run_at = 0;
    std::optional<HostId> host;
    std::optional<HostId> migration_target;
    std::vector<CommEvent> comm_plan;

    Tick submit_time = 0;
    std::optional<Tick> first_deploy_time;
    std::optional<Tick> completion_time;
    Tick paused_at = 0;
    double comm_time_total = 0;
    std::size_t comm_done = 0;
    std::size_t retries_used = 0;
    std::size_t migrations = 0;
    Tick exec_ticks = 0;
    Tick comm_ticks = 0;
    // Number of active communication flows this container takes part in.
    std::size_t involvement = 0;

    /// Moves along the lifecycle graph; any other edge is a logic error.
    void set_status(ContainerStatus to) {
        if (!is_legal_transition(status, to))
            throw std::logic_error("container " + std::to_string(id) + ": illegal transition " +
                                   std::string(to_string(status)) + " -> " + std::string(to_string(to)));
        status = to;
    }

    friend bool operator==(const Container&, const Container&) = default;
};

/// Work one tick adds to a container of this type on this host.
inline double run_increment(const Container& c, const HostSpec& host) { return host.speed_for(c.type); }

/// One tick of execution. Returns true when the container has reached its duration.
inline bool advance_run(Container& c, const HostSpec& host) {
    if (c.status != ContainerStatus::Running)
        throw std::logic_error("advance_run on container " + std::to_string(c.id) + " in state " +
                               std::string(to_string(c.status)));
    c.run_at += run_increment(c, host);
    return c.run_at >= c.duration;
}

class HostState {
  public:
    HostState() = default;
    explicit HostState(HostSpec spec) : spec_(std::move(spec)) {}

    const HostSpec& spec() const { return spec_; }
    const ResourceVector& allocated() const { return allocated_; }
    const std::map<ContainerId, ResourceVector>& deployed() const { return deployed_; }

    bool fits(const ResourceVector& request) const {
        return (allocated_ + request).fits_within(spec_.capacity());
    }

    ResourceVector available() const { return spec_.capacity().minus(allocated_); }

    Utilization utilization() const { return utilization_of(allocated_, spec_.capacity()); }

    void allocate(const Container& c) {
        if (deployed_.contains(c.id))
            throw CapacityExceeded("container " + std::to_string(c.id) + " already on host " +
                                   std::to_string(spec_.id));
        if (!fits(c.request))
            throw CapacityExceeded("container " + std::to_string(c.id) + " does not fit on host " +
                                   std::to_string(spec_.id));
        deployed_.emplace(c.id, c.request);
        recompute();
    }

    void release(ContainerId id) {
        if (deployed_.erase(id) == 0)
            throw NotDeployedHere("container " + std::to_string(id) + " is not deployed on host " +
                                  std::to_string(spec_.id));
        recompute();
    }

    /// allocated == sum of deployed requests and allocated <= capacity.
    bool consistent() const {
        ResourceVector sum;
        for (const auto& [id, req] : deployed_) sum += req;
        return sum == allocated_ && allocated_.fits_within(spec_.capacity());
    }

    friend bool operator==(const HostState&, const HostState&) = default;

  private:
    // Summing in container-id order each time keeps allocate/release exact inverses
    // even for non-integer requests.
    void recompute() {
        ResourceVector sum;
        for (const auto& [id, req] : deployed_) sum += req;
        allocated_ = sum;
    }

    HostSpec spec_;
    ResourceVector allocated_;
    std::map<ContainerId, ResourceVector> deployed_;
};

inline Utilization utilization(const HostState& host) { return host.utilization(); }

/// Queue views over admitted containers. A migrating container shows up in
/// both `deployed` and `undeployed`.
struct QueueSet {
    std::vector<ContainerId> undeployed;
    std::vector<ContainerId> deployed;
    std::vector<ContainerId> completed;
    std::size_t inactive = 0;
    std::size_t waiting = 0;
    std::size_t running = 0;
    std::size_t communicating = 0;
    std::size_t migrating = 0;
};

/// Builds the queue views. Undeployed order: inactive FIFO by submit time,
/// then waiting FIFO by pause time, then migrating; ids break ties.
inline QueueSet build_queues(std::span<const Container> containers, std::span<const ContainerId> admitted) {
    QueueSet q;
    std::vector<const Container*> inactive, waiting, migrating;
    for (const auto id : admitted) {
        const auto& c = containers[id];
        switch (c.status) {
        case ContainerStatus::Inactive: inactive.push_back(&c); break;
        case ContainerStatus::Waiting: waiting.push_back(&c); break;
        case ContainerStatus::Migrating:
            migrating.push_back(&c);
            q.deployed.push_back(id);
            break;
        case ContainerStatus::Running:
            ++q.running;
            q.deployed.push_back(id);
            break;
        case ContainerStatus::Communicating:
            ++q.communicating;
            q.deployed.push_back(id);
            break;
        case ContainerStatus::Completed: q.completed.push_back(id); break;
        }
    }
    std::stable_sort(inactive.begin(), inactive.end(), [](const Container* a, const Container* b) {
        return a->submit_time != b->submit_time ? a->submit_time < b->submit_time : a->id < b->id;
    });
    std::stable_sort(waiting.begin(), waiting.end(), [](const Container* a, const Container* b) {
        return a->paused_at != b->paused_at ? a->paused_at < b->paused_at : a->id < b->id;
    });
    for (auto* c : inactive) q.undeployed.push_back(c->id);
    for (auto* c : waiting) q.undeployed.push_back(c->id);
    for (auto* c : migrating) q.undeployed.push_back(c->id);
    q.inactive = inactive.size();
    q.waiting = waiting.size();
    q.migrating = migrating.size();
    std::sort(q.deployed.begin(), q.deployed.end());
    std::sort(q.completed.begin(), q.completed.end());
    return q;
}

} // namespace netsched
