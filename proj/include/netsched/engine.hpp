#pragma once

// The tick loop. Each tick runs, in order:
//   faults -> arrivals -> delay refresh -> schedule -> comm triggers ->
//   flows -> execution -> termination check -> stats.

#include "datacenter.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "scheduler.hpp"
#include "workload.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

namespace netsched {

struct SimOptions {
    NetworkConfig network;
    SchedulerConfig scheduler;
    bool block_partner = true;
    Tick max_ticks = 3600;
    VarianceMode variance = VarianceMode::MeanOfThree;
    std::uint64_t seed = 1;
    /// Progress/diagnostic lines go here when set. 0 = quiet, 1 = events, 2 = per tick.
    std::ostream* log = nullptr;
    int verbosity = 0;
};

class Simulation {
  public:
    Simulation(SimOptions opts, std::vector<HostSpec> hosts, Topology topology, JobStream stream,
               const AlgorithmRegistry& registry = AlgorithmRegistry::builtin())
        : opts_(std::move(opts)),
          network_(std::move(topology), opts_.network),
          scheduler_(opts_.scheduler, registry),
          stream_(std::move(stream)) {
        if (hosts.empty()) throw ValidationError("no hosts");
        if (hosts.size() != network_.topology().host_count())
            throw ValidationError("hosts file defines " + std::to_string(hosts.size()) + " hosts but the topology has " +
                                  std::to_string(network_.topology().host_count()));
        for (auto& h : hosts) {
            h.validate();
            hosts_.emplace_back(std::move(h));
        }
        containers_ = stream_.containers;
        jobs_ = stream_.jobs;
        for (const auto& c : containers_) {
            for (const auto& e : c.comm_plan) {
                if (e.partner >= containers_.size())
                    throw ValidationError("container " + std::to_string(c.id) + " names unknown comm partner");
            }
        }
        if (finished()) terminated_ = true;
    }

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;
    Simulation(Simulation&&) = default;
    Simulation& operator=(Simulation&&) = default;

    Tick now() const { return t_; }
    bool terminated() const { return terminated_; }
    const std::vector<HostState>& hosts() const { return hosts_; }
    const std::vector<Container>& containers() const { return containers_; }
    const std::vector<Job>& jobs() const { return jobs_; }
    const std::vector<ContainerId>& admitted() const { return admitted_; }
    const std::vector<TickSample>& samples() const { return samples_; }
    const NetworkSim& network() const { return network_; }
    NetworkSim& network() { return network_; }
    const SimOptions& options() const { return opts_; }
    std::size_t permanent_failures() const { return permanent_failures_; }
    std::size_t dropped_decisions() const { return dropped_decisions_; }

    QueueSet queues() const { return build_queues(containers_, admitted_); }

    /// Snapshot handed to the scheduler.
    SchedulerView view() const {
        SchedulerView v;
        v.delay = &network_.delay();
        v.hosts.reserve(hosts_.size());
        for (const auto& h : hosts_) v.hosts.push_back({h.spec(), h.allocated(), h.utilization()});
        v.running_by_host.resize(hosts_.size());
        const auto q = queues();
        for (const auto id : q.undeployed) {
            const auto& c = containers_[id];
            if (c.status == ContainerStatus::Migrating) continue;
            v.undeployed.push_back(candidate(c));
        }
        for (const auto id : q.deployed) {
            const auto& c = containers_[id];
            ++v.job_hosts[c.job_id][*c.host];
            if (c.status == ContainerStatus::Running) v.running_by_host[*c.host].push_back(candidate(c));
        }
        return v;
    }

    void run_tick() {
        if (terminated_) throw std::logic_error("run_tick after termination");
        const Tick t = t_;
        TickSample sample;
        sample.t = t;

        network_.apply_faults(t);
        sample.arrivals = generate_containers(t);
        if (t % opts_.network.update_period == 0) network_.refresh_delay_matrix(t);
        schedule(t, sample);
        trigger_communications(t);
        advance_flows(t);
        execute_containers(t, sample);
        if (finished()) terminated_ = true;
        save_stats(sample);
        check_invariants();
        ++t_;
    }

    /// Runs to termination. Throws SimulationAborted at max_ticks.
    SummaryReport run() {
        while (!terminated_) {
            if (t_ >= opts_.max_ticks) {
                std::vector<std::size_t> stuck;
                for (const auto id : admitted_) {
                    if (containers_[id].status != ContainerStatus::Completed) stuck.push_back(id);
                }
                std::string msg = "max_ticks " + std::to_string(opts_.max_ticks) + " reached with " +
                                  std::to_string(stuck.size()) + " unfinished containers";
                if (!stream_.exhausted()) msg += " and " + std::to_string(stream_.jobs.size() - stream_.next) +
                                                 " jobs not yet arrived";
                if (!stuck.empty()) {
                    msg += "; stuck:";
                    for (std::size_t k = 0; k < stuck.size() && k < 20; ++k) {
                        const auto& c = containers_[stuck[k]];
                        msg += " " + std::to_string(c.id) + "(" + std::string(to_string(c.status)) + ")";
                    }
                    if (stuck.size() > 20) msg += " ...";
                }
                throw SimulationAborted(msg, std::move(stuck));
            }
            run_tick();
        }
        return report();
    }

    SummaryReport report() const {
        std::vector<HostSpec> specs;
        for (const auto& h : hosts_) specs.push_back(h.spec());
        auto r = summarize(samples_, containers_, jobs_, specs, opts_.variance);
        r.algorithm = opts_.scheduler.algorithm;
        r.seed = opts_.seed;
        r.makespan = t_;
        r.permanent_failures = permanent_failures_;
        r.dropped_decisions = dropped_decisions_;
        r.skipped_comm_events = skipped_events_;
        return r;
    }

  private:
    static CandidateView candidate(const Container& c) {
        return {c.id, c.job_id, c.request, c.type, c.status, c.host};
    }

    bool finished() const {
        if (!stream_.exhausted()) return false;
        return std::all_of(admitted_.begin(), admitted_.end(),
                           [&](ContainerId id) { return containers_[id].status == ContainerStatus::Completed; });
    }

    void log(Tick t, const std::string& msg) const {
        if (opts_.log && opts_.verbosity >= 1) *opts_.log << "t=" << t << " " << msg << '\n';
    }

    std::size_t generate_containers(Tick t) {
        std::size_t n = 0;
        for (const auto j : arrivals_at(stream_, t)) {
            for (const auto id : jobs_[j].container_ids) {
                admitted_.push_back(id);
                ++n;
            }
        }
        return n;
    }

    void schedule(Tick t, TickSample& sample) {
        const auto decisions = scheduler_.decide(view());
        bool counted_idle = false;
        for (const auto& d : decisions) {
            if (d.action == Action::Migrate && !counted_idle) {
                sample.idle_hosts = idle_host_count();
                counted_idle = true;
            }
            if (apply(d, t)) {
                ++sample.decisions;
                if (d.action == Action::Migrate) ++sample.migrations;
            } else {
                ++dropped_decisions_;
            }
        }
        if (!counted_idle) sample.idle_hosts = idle_host_count();
    }

    std::size_t idle_host_count() const {
        std::size_t n = 0;
        for (const auto& h : hosts_) n += h.utilization().dominant < opts_.scheduler.idle_threshold ? 1 : 0;
        return n;
    }

    /// Applies one decision; returns false (and changes nothing) if it went stale.
    bool apply(const SchedulingDecision& d, Tick t) {
        auto& c = containers_.at(d.container);
        auto& target = hosts_.at(d.target);
        if (d.action == Action::Deploy) {
            if ((c.status != ContainerStatus::Inactive && c.status != ContainerStatus::Waiting) ||
                !target.fits(c.request)) {
                log(t, "dropped stale deploy of container " + std::to_string(c.id));
                return false;
            }
            target.allocate(c);
            c.host = d.target;
            c.set_status(ContainerStatus::Running);
            if (!c.first_deploy_time) c.first_deploy_time = t;
            return true;
        }
        if (c.status != ContainerStatus::Running || !c.host || *c.host == d.target || !target.fits(c.request)) {
            log(t, "dropped stale migration of container " + std::to_string(c.id));
            return false;
        }
        target.allocate(c);
        c.migration_target = d.target;
        c.set_status(ContainerStatus::Migrating);
        network_.start_flow(FlowKind::Migration, *c.host, d.target,
                            c.request.mem * opts_.scheduler.migration_bytes_per_gib, {c.id}, t);
        log(t, "migrating container " + std::to_string(c.id) + " from host " + std::to_string(*c.host) + " to " +
                   std::to_string(d.target));
        return true;
    }

    static bool partner_available(const Container& p) {
        return p.status == ContainerStatus::Running || p.status == ContainerStatus::Communicating;
    }

    /// A running container starts the first pending event that this tick's
    /// execution would reach, provided the partner is deployed. Events whose
    /// partner has completed are skipped; otherwise they wait for a later tick.
    void trigger_communications(Tick t) {
        for (const auto id : admitted_) {
            auto& c = containers_[id];
            if (c.status != ContainerStatus::Running) continue;
            const double reach = c.run_at + run_increment(c, hosts_[*c.host].spec());
            for (std::size_t k = 0; k < c.comm_plan.size(); ++k) {
                auto& e = c.comm_plan[k];
                if (e.state != CommState::Pending || !(e.trigger_at < reach)) continue;
                auto& p = containers_[e.partner];
                if (p.status == ContainerStatus::Completed) {
                    e.state = CommState::Skipped;
                    ++skipped_events_;
                    log(t, "container " + std::to_string(c.id) + " skips comm with completed " + std::to_string(p.id));
                    continue;
                }
                if (!partner_available(p)) continue;
                e.state = CommState::Active;
                ++c.involvement;
                c.set_status(ContainerStatus::Communicating);
                if (opts_.block_partner) {
                    ++p.involvement;
                    if (p.status == ContainerStatus::Running) p.set_status(ContainerStatus::Communicating);
                }
                network_.start_flow(FlowKind::Communication, *c.host, *p.host, e.volume_kb * 1000.0, {c.id, p.id}, t,
                                    k);
                break;
            }
        }
    }

    void release_involvement(Container& c) {
        if (c.involvement > 0) --c.involvement;
        if (c.involvement == 0 && c.status == ContainerStatus::Communicating) c.set_status(ContainerStatus::Running);
    }

    /// Ends a communication flow without completing it; the event goes back to
    /// pending. `keep` is left as it is because it is about to be demoted.
    void abandon_comm_flow(const Flow& f, ContainerId keep) {
        auto& init = containers_[f.owners[0]];
        init.comm_plan[f.event_index].state = CommState::Pending;
        if (init.id != keep) release_involvement(init);
        if (opts_.block_partner && f.owners[1] != keep) release_involvement(containers_[f.owners[1]]);
    }

    /// Pulls a container off its host(s) into the waiting state, run_at kept.
    void demote(Container& c, Tick t) {
        std::vector<Flow> touching;
        for (const auto& [id, f] : network_.flows()) {
            if (std::find(f.owners.begin(), f.owners.end(), c.id) != f.owners.end()) touching.push_back(f);
        }
        for (const auto& f : touching) {
            network_.cancel(f.id);
            if (f.kind == FlowKind::Communication) abandon_comm_flow(f, c.id);
        }
        if (c.host) hosts_[*c.host].release(c.id);
        if (c.migration_target) hosts_[*c.migration_target].release(c.id);
        c.host.reset();
        c.migration_target.reset();
        c.involvement = 0;
        c.paused_at = t;
        c.set_status(ContainerStatus::Waiting);
    }

    void advance_flows(Tick t) {
        for (const auto& out : network_.advance(t)) {
            const auto& f = out.flow;
            auto& owner = containers_[f.owners[0]];
            switch (out.kind) {
            case FlowOutcome::Kind::Completed:
                if (f.kind == FlowKind::Communication) {
                    owner.comm_plan[f.event_index].state = CommState::Done;
                    owner.comm_time_total += out.transfer_time;
                    ++owner.comm_done;
                    release_involvement(owner);
                    if (opts_.block_partner) release_involvement(containers_[f.owners[1]]);
                } else {
                    hosts_[*owner.host].release(owner.id);
                    owner.host = owner.migration_target;
                    owner.migration_target.reset();
                    ++owner.migrations;
                    owner.set_status(ContainerStatus::Running);
                }
                break;
            case FlowOutcome::Kind::AttemptFailed:
                ++owner.retries_used;
                log(t, "flow " + std::to_string(f.id) + " attempt " + std::to_string(f.attempt - 1) + " failed");
                break;
            case FlowOutcome::Kind::PermanentFailure:
                ++owner.retries_used;
                ++permanent_failures_;
                log(t, "flow " + std::to_string(f.id) + " failed permanently; container " + std::to_string(owner.id) +
                           " -> waiting");
                if (f.kind == FlowKind::Communication) abandon_comm_flow(f, owner.id);
                demote(owner, t);
                break;
            }
        }
    }

    void execute_containers(Tick t, TickSample& sample) {
        sample.host_busy.resize(hosts_.size());
        for (std::size_t h = 0; h < hosts_.size(); ++h) sample.host_busy[h] = !hosts_[h].deployed().empty();
        for (const auto id : admitted_) {
            auto& c = containers_[id];
            if (c.status == ContainerStatus::Communicating) ++c.comm_ticks;
            if (c.status != ContainerStatus::Running) continue;
            ++c.exec_ticks;
            if (!advance_run(c, hosts_[*c.host].spec())) continue;
            for (auto& e : c.comm_plan) {
                if (e.state == CommState::Pending) {
                    e.state = CommState::Skipped;
                    ++skipped_events_;
                }
            }
            hosts_[*c.host].release(c.id);
            c.host.reset();
            c.set_status(ContainerStatus::Completed);
            c.completion_time = t + 1;
            auto& job = jobs_[c.job_id];
            const bool all_done = std::all_of(job.container_ids.begin(), job.container_ids.end(), [&](ContainerId x) {
                return containers_[x].status == ContainerStatus::Completed;
            });
            if (all_done) job.completion_time = t + 1;
        }
    }

    void save_stats(TickSample& s) {
        const auto q = queues();
        s.inactive = q.inactive;
        s.waiting = q.waiting;
        s.undeployed = q.undeployed.size();
        s.deployed = q.deployed.size();
        s.running = q.running;
        s.communicating = q.communicating;
        s.migrating = q.migrating;
        s.completed = q.completed.size();
        s.active_flows = network_.flows().size();
        s.host_util.reserve(hosts_.size());
        for (const auto& h : hosts_) s.host_util.push_back(h.utilization());
        s.overloaded = count_overloaded(s.host_util, opts_.scheduler.overload_threshold);
        if (opts_.log && opts_.verbosity >= 2)
            *opts_.log << "t=" << s.t << " deployed=" << s.deployed << " undeployed=" << s.undeployed
                       << " completed=" << s.completed << " flows=" << s.active_flows << '\n';
        samples_.push_back(std::move(s));
    }

    void check_invariants() const {
        for (const auto& h : hosts_) {
            if (!h.consistent())
                throw std::logic_error("host " + std::to_string(h.spec().id) + " accounting is inconsistent");
        }
    }

    SimOptions opts_;
    NetworkSim network_;
    Scheduler scheduler_;
    JobStream stream_;
    std::vector<HostState> hosts_;
    std::vector<Container> containers_;
    std::vector<Job> jobs_;
    std::vector<ContainerId> admitted_;
    std::vector<TickSample> samples_;
    Tick t_ = 0;
    bool terminated_ = false;
    std::size_t permanent_failures_ = 0;
    std::size_t dropped_decisions_ = 0;
    std::size_t skipped_events_ = 0;
};

} // namespace netsched
