#pragma once

// Selection / placement pipeline and the built-in placement algorithms.
//
// Algorithms see a SchedulerView snapshot. Within one scheduling round every
// decision is applied tentatively to the scheduler's own copy of the view so
// later candidates see the capacity earlier ones consumed; the engine then
// applies the decisions to the real state and drops any that went stale.

#include "datacenter.hpp"
#include "error.hpp"
#include "network.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace netsched {

struct SchedulerConfig {
    std::string algorithm = "first_fit";
    double overload_threshold = 0.7;
    double idle_threshold = 0.3;
    double migration_bytes_per_gib = 256e6;
    // Placement used for deployments when algorithm = overload_migrate.
    std::string deploy_placement = "first_fit";

    void validate() const {
        if (!(0 < idle_threshold && idle_threshold < overload_threshold && overload_threshold < 1))
            throw ConfigError("scheduler.idle_threshold",
                              "thresholds must satisfy 0 < idle_threshold < overload_threshold < 1");
        if (!(migration_bytes_per_gib >= 0))
            throw ConfigError("scheduler.migration_bytes_per_gib", "must be >= 0");
    }

    friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct HostView {
    HostSpec spec;
    ResourceVector allocated;
    Utilization util;

    bool fits(const ResourceVector& request) const { return (allocated + request).fits_within(spec.capacity()); }
};

struct CandidateView {
    ContainerId id = 0;
    JobId job = 0;
    ResourceVector request;
    ContainerType type = ContainerType::CpuIntensive;
    ContainerStatus status = ContainerStatus::Inactive;
    std::optional<HostId> host;
};

/// Read-only input to a scheduling round.
struct SchedulerView {
    std::vector<HostView> hosts;
    /// Undeployed containers eligible for placement: inactive FIFO, then waiting FIFO.
    std::vector<CandidateView> undeployed;
    /// Running containers per host, id order. Only these may be migrated.
    std::vector<std::vector<CandidateView>> running_by_host;
    /// job -> host -> number of deployed containers of that job on the host.
    std::map<JobId, std::map<HostId, std::size_t>> job_hosts;
    const DelayMatrix* delay = nullptr;

    std::size_t siblings_on(JobId job, HostId h) const {
        auto it = job_hosts.find(job);
        if (it == job_hosts.end()) return 0;
        auto jt = it->second.find(h);
        return jt == it->second.end() ? 0 : jt->second;
    }

    void reserve(HostId h, const ResourceVector& request) {
        auto& hv = hosts[h];
        hv.allocated += request;
        hv.util = utilization_of(hv.allocated, hv.spec.capacity());
    }

    void apply_deploy(const CandidateView& c, HostId h) {
        reserve(h, c.request);
        ++job_hosts[c.job][h];
    }

    void apply_migrate(const CandidateView& c, HostId target) {
        reserve(target, c.request);
        if (c.host) {
            auto& list = running_by_host[*c.host];
            std::erase_if(list, [&](const CandidateView& x) { return x.id == c.id; });
        }
    }
};

enum class Action : std::uint8_t { Deploy, Migrate };

struct SchedulingDecision {
    ContainerId container = 0;
    HostId target = 0;
    Action action = Action::Deploy;

    friend bool operator==(const SchedulingDecision&, const SchedulingDecision&) = default;
};

/// Default selection: every undeployed container, in queue order.
inline std::vector<CandidateView> select(const SchedulerView& view) { return view.undeployed; }

inline std::optional<HostId> place_first_fit(const CandidateView& c, const SchedulerView& view) {
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        if (view.hosts[h].fits(c.request)) return h;
    }
    return std::nullopt;
}

/// Scans from the host after `cursor` with wraparound. The cursor moves only on success.
inline std::optional<HostId> place_round(const CandidateView& c, const SchedulerView& view, std::int64_t& cursor) {
    const auto n = static_cast<std::int64_t>(view.hosts.size());
    for (std::int64_t k = 1; k <= n; ++k) {
        const auto h = static_cast<HostId>(((cursor + k) % n + n) % n);
        if (view.hosts[h].fits(c.request)) {
            cursor = static_cast<std::int64_t>(h);
            return h;
        }
    }
    return std::nullopt;
}

/// Feasible host with the highest speed for the container's primary resource; lowest index on ties.
inline std::optional<HostId> place_performance_first(const CandidateView& c, const SchedulerView& view) {
    std::optional<HostId> best;
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        if (!view.hosts[h].fits(c.request)) continue;
        if (!best || view.hosts[h].spec.speed_for(c.type) > view.hosts[*best].spec.speed_for(c.type)) best = h;
    }
    return best;
}

/// Feasible host holding the most containers of the same job; with none
/// deployed anywhere feasible, the host with the most headroom (1 - dominant
/// utilization). Lowest index on ties.
inline std::optional<HostId> place_job_group(const CandidateView& c, const SchedulerView& view) {
    std::optional<HostId> best;
    std::size_t best_count = 0;
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        if (!view.hosts[h].fits(c.request)) continue;
        const auto n = view.siblings_on(c.job, h);
        if (!best || n > best_count) {
            best = h;
            best_count = n;
        }
    }
    if (!best || best_count > 0) return best;
    best.reset();
    double best_free = -1;
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        if (!view.hosts[h].fits(c.request)) continue;
        const double free = 1.0 - view.hosts[h].util.dominant;
        if (free > best_free) {
            best = h;
            best_free = free;
        }
    }
    return best;
}

/// Migration target: the feasible host with the lowest dominant utilization,
/// provided it is below the idle threshold.
inline std::optional<HostId> place_overload_target(const CandidateView& c, const SchedulerView& view,
                                                   const SchedulerConfig& cfg) {
    std::optional<HostId> best;
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        if (c.host && *c.host == h) continue;
        const auto& hv = view.hosts[h];
        if (!(hv.util.dominant < cfg.idle_threshold) || !hv.fits(c.request)) continue;
        if (!best || hv.util.dominant < view.hosts[*best].util.dominant) best = h;
    }
    return best;
}

/// For each host above the overload threshold, in index order, the running
/// container with the largest request in the host's bottleneck resource moves
/// to an idle host. At most one migration per overloaded host.
inline std::vector<SchedulingDecision> select_overload_migrate(SchedulerView view, const SchedulerConfig& cfg) {
    std::vector<SchedulingDecision> out;
    for (HostId h = 0; h < view.hosts.size(); ++h) {
        const auto& hv = view.hosts[h];
        if (!(hv.util.dominant > cfg.overload_threshold)) continue;
        const auto r = hv.util.bottleneck;
        const CandidateView* pick = nullptr;
        for (const auto& c : view.running_by_host[h]) {
            if (!pick || c.request[r] > pick->request[r]) pick = &c;
        }
        if (!pick) continue;
        const auto target = place_overload_target(*pick, view, cfg);
        if (!target) continue;
        out.push_back({pick->id, *target, Action::Migrate});
        const auto chosen = *pick;
        view.apply_migrate(chosen, *target);
    }
    return out;
}

/// Extension point: a placement algorithm picks a host for one candidate.
class PlacementPolicy {
  public:
    virtual ~PlacementPolicy() = default;
    virtual std::optional<HostId> place(const CandidateView& c, const SchedulerView& view) = 0;
};

class FirstFitPlacement final : public PlacementPolicy {
  public:
    std::optional<HostId> place(const CandidateView& c, const SchedulerView& v) override {
        return place_first_fit(c, v);
    }
};

class RoundPlacement final : public PlacementPolicy {
  public:
    std::optional<HostId> place(const CandidateView& c, const SchedulerView& v) override {
        return place_round(c, v, cursor_);
    }
    std::int64_t cursor() const { return cursor_; }

  private:
    std::int64_t cursor_ = -1;
};

class PerformanceFirstPlacement final : public PlacementPolicy {
  public:
    std::optional<HostId> place(const CandidateView& c, const SchedulerView& v) override {
        return place_performance_first(c, v);
    }
};

class JobGroupPlacement final : public PlacementPolicy {
  public:
    std::optional<HostId> place(const CandidateView& c, const SchedulerView& v) override {
        return place_job_group(c, v);
    }
};

/// Named algorithms. Copy `builtin()` and add entries to plug in custom ones.
class AlgorithmRegistry {
  public:
    using Factory = std::function<std::unique_ptr<PlacementPolicy>(const SchedulerConfig&)>;

    struct Entry {
        Factory factory;
        bool overload_migration = false;
    };

    void add(std::string name, Factory f, bool overload_migration = false) {
        entries_[std::move(name)] = Entry{std::move(f), overload_migration};
    }

    bool contains(const std::string& name) const { return entries_.contains(name); }

    const Entry& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("scheduler.algorithm", "unknown algorithm '" + name + "'");
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, e] : entries_) out.push_back(n);
        return out;
    }

    static const AlgorithmRegistry& builtin() {
        static const AlgorithmRegistry reg = [] {
            AlgorithmRegistry r;
            r.add("first_fit", [](const SchedulerConfig&) { return std::make_unique<FirstFitPlacement>(); });
            r.add("round", [](const SchedulerConfig&) { return std::make_unique<RoundPlacement>(); });
            r.add("performance_first",
                  [](const SchedulerConfig&) { return std::make_unique<PerformanceFirstPlacement>(); });
            r.add("job_group", [](const SchedulerConfig&) { return std::make_unique<JobGroupPlacement>(); });
            r.add(
                "overload_migrate",
                [](const SchedulerConfig& cfg) -> std::unique_ptr<PlacementPolicy> {
                    if (cfg.deploy_placement == "overload_migrate")
                        throw ConfigError("scheduler.deploy_placement", "must name a plain placement algorithm");
                    return builtin().at(cfg.deploy_placement).factory(cfg);
                },
                true);
            return r;
        }();
        return reg;
    }

  private:
    std::map<std::string, Entry> entries_;
};

/// Selection + placement for one simulation. Holds the only cross-round state (e.g. the Round cursor).
class Scheduler {
  public:
    explicit Scheduler(SchedulerConfig cfg, const AlgorithmRegistry& registry = AlgorithmRegistry::builtin())
        : cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto& entry = registry.at(cfg_.algorithm);
        placement_ = entry.factory(cfg_);
        migrate_ = entry.overload_migration;
    }

    const SchedulerConfig& config() const { return cfg_; }

    std::vector<SchedulingDecision> decide(SchedulerView view) {
        std::vector<SchedulingDecision> out;
        for (const auto& c : select(view)) {
            if (const auto h = placement_->place(c, view)) {
                out.push_back({c.id, *h, Action::Deploy});
                view.apply_deploy(c, *h);
            }
        }
        if (migrate_) {
            auto moves = select_overload_migrate(std::move(view), cfg_);
            out.insert(out.end(), moves.begin(), moves.end());
        }
        return out;
    }

  private:
    SchedulerConfig cfg_;
    std::unique_ptr<PlacementPolicy> placement_;
    bool migrate_ = false;
};

} // namespace netsched
