#pragma once

// Flow-level network model: host-to-host delay matrix with a congestion
// penalty, max-min fair bandwidth sharing with a loss-driven TCP throughput
// cap, and transfers with stall detection and bounded retransmission.

#include "datacenter.hpp"
#include "topology.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace netsched {

struct NetworkConfig {
    Tick update_period = 10;
    std::size_t max_retransmissions = 3;
    double congestion_threshold = 0.2;
    double congestion_k = 4.0;
    Tick stall_timeout = 5;
    std::size_t container_nodes_per_host = 10;
    double mss_bytes = 1500;
    double mathis_const = 1.2247;
    // Each direction of a link has its own capacity; otherwise both directions share it.
    bool full_duplex = true;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Host-to-host latency in seconds.
class DelayMatrix {
  public:
    DelayMatrix() = default;
    explicit DelayMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double at(HostId i, HostId j) const { return d_[i * n_ + j]; }
    void set(HostId i, HostId j, double seconds) { d_[i * n_ + j] = seconds; }

    Tick last_refresh = -1;

  private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

/// Max-min fair rates by progressive filling. `flow_links[f]` lists the links
/// flow f crosses; a flow crossing no link is unconstrained and gets +inf.
inline std::vector<double> max_min_fair(std::span<const double> capacity,
                                        std::span<const std::vector<std::size_t>> flow_links) {
    const auto nf = flow_links.size();
    std::vector<double> rate(nf, 0.0);
    std::vector<bool> frozen(nf, false);
    std::vector<double> remaining(capacity.begin(), capacity.end());
    std::vector<std::size_t> active_on(capacity.size(), 0);
    std::size_t unfrozen = 0;
    for (std::size_t f = 0; f < nf; ++f) {
        if (flow_links[f].empty()) {
            rate[f] = kInf;
            frozen[f] = true;
            continue;
        }
        ++unfrozen;
        for (const auto l : flow_links[f]) ++active_on[l];
    }

    while (unfrozen > 0) {
        double inc = kInf;
        for (std::size_t l = 0; l < remaining.size(); ++l) {
            if (active_on[l] > 0) inc = std::min(inc, remaining[l] / static_cast<double>(active_on[l]));
        }
        inc = std::max(inc, 0.0);
        // Links whose fair share equals the increment saturate this round.
        std::vector<bool> saturated(remaining.size(), false);
        for (std::size_t l = 0; l < remaining.size(); ++l) {
            if (active_on[l] == 0) continue;
            const double share = remaining[l] / static_cast<double>(active_on[l]);
            saturated[l] = share <= inc * (1 + 1e-12);
        }
        for (std::size_t f = 0; f < nf; ++f) {
            if (frozen[f]) continue;
            rate[f] += inc;
            for (const auto l : flow_links[f]) remaining[l] -= inc;
        }
        for (std::size_t f = 0; f < nf; ++f) {
            if (frozen[f]) continue;
            const bool hit = std::any_of(flow_links[f].begin(), flow_links[f].end(),
                                         [&](std::size_t l) { return saturated[l]; });
            if (!hit) continue;
            frozen[f] = true;
            --unfrozen;
            for (const auto l : flow_links[f]) --active_on[l];
        }
        for (std::size_t l = 0; l < remaining.size(); ++l) {
            if (saturated[l]) remaining[l] = 0;
        }
    }
    return rate;
}

/// Loss-limited TCP throughput in Mbps: mss * C / (rtt * sqrt(p)). +inf when p == 0 or rtt == 0.
inline double tcp_rate_cap_mbps(double mss_bytes, double mathis_const, double rtt_s, double loss) {
    if (loss <= 0 || rtt_s <= 0) return kInf;
    return mss_bytes * 8.0 * mathis_const / (rtt_s * std::sqrt(loss)) / 1e6;
}

/// 1 - prod(1 - loss_l) along the route.
inline double path_loss(const Topology& topo, const Route& r) {
    double keep = 1.0;
    for (const auto l : r.links) keep *= 1.0 - topo.links()[l].loss;
    return 1.0 - keep;
}

inline double congestion_penalty(double util, const NetworkConfig& cfg) {
    return util >= cfg.congestion_threshold ? cfg.congestion_k * util : 0.0;
}

/// D_ij = sum over route links of base_latency * (1 + penalty(util)). Unroutable pairs get +inf.
inline DelayMatrix compute_delay_matrix(const Topology& topo, Router& router, std::span<const double> link_util,
                                        const NetworkConfig& cfg, Tick t) {
    const auto n = topo.host_count();
    DelayMatrix d(n);
    d.last_refresh = t;
    for (HostId i = 0; i < n; ++i) {
        for (HostId j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto& r = router.get(i, j);
            if (!r) {
                d.set(i, j, kInf);
                continue;
            }
            double ms = 0;
            for (const auto l : r->links) {
                const double pen = link_util.empty() ? 0.0 : congestion_penalty(link_util[l], cfg);
                ms += topo.links()[l].delay_ms * (1.0 + pen);
            }
            d.set(i, j, ms / 1000.0);
        }
    }
    return d;
}

enum class FlowKind : std::uint8_t { Communication, Migration };

using FlowId = std::size_t;

struct Flow {
    FlowId id = 0;
    FlowKind kind = FlowKind::Communication;
    HostId src = 0;
    HostId dst = 0;
    double bytes_total = 0;
    double bytes_remaining = 0;
    double current_rate = 0; // Mbps
    std::size_t attempt = 1;
    Tick stall_ticks = 0;
    Tick start_tick = 0;
    // Communication: owners = {initiator, partner}. Migration: owners = {container}.
    std::vector<ContainerId> owners;
    std::size_t event_index = 0;
};

struct FlowOutcome {
    enum class Kind : std::uint8_t { Completed, AttemptFailed, PermanentFailure };
    Kind kind = Kind::Completed;
    Flow flow;
    double transfer_time = 0; // seconds; Completed only
};

/// Owns the topology, routing cache, delay matrix and the set of in-flight flows.
class NetworkSim {
  public:
    NetworkSim(Topology topo, NetworkConfig cfg)
        : topo_(std::make_unique<Topology>(std::move(topo))),
          router_(std::make_unique<Router>(*topo_)),
          cfg_(cfg),
          delay_(topo_->host_count()) {}

    Topology& topology() { return *topo_; }
    const Topology& topology() const { return *topo_; }
    const NetworkConfig& config() const { return cfg_; }
    const DelayMatrix& delay() const { return delay_; }
    const std::map<FlowId, Flow>& flows() const { return flows_; }
    Router& router() { return *router_; }

    bool apply_faults(Tick t) { return netsched::apply_faults(*topo_, t); }

    /// Capacity slots a route occupies: one per link, or one per link direction
    /// (2l for a->b, 2l+1 for b->a) when links are full duplex.
    std::vector<std::size_t> capacity_slots(const Route& r) const {
        if (!cfg_.full_duplex) return r.links;
        std::vector<std::size_t> out;
        out.reserve(r.links.size());
        for (std::size_t k = 0; k < r.links.size(); ++k) {
            const auto l = r.links[k];
            out.push_back(2 * l + (topo_->links()[l].a == r.nodes[k] ? 0 : 1));
        }
        return out;
    }

    std::vector<double> slot_capacities() const {
        std::vector<double> cap;
        for (const auto& l : topo_->links()) {
            cap.push_back(l.bandwidth_mbps);
            if (cfg_.full_duplex) cap.push_back(l.bandwidth_mbps);
        }
        return cap;
    }

    /// Link utilization from the rates allocated at the last advance(). With
    /// full duplex links this is the busier direction.
    std::vector<double> link_utilization() {
        const auto cap = slot_capacities();
        std::vector<double> load(cap.size(), 0.0);
        for (const auto& [id, f] : flows_) {
            if (f.src == f.dst || !std::isfinite(f.current_rate)) continue;
            const auto& r = router_->get(f.src, f.dst);
            if (!r) continue;
            for (const auto slot : capacity_slots(*r)) load[slot] += f.current_rate;
        }
        const std::size_t per = cfg_.full_duplex ? 2 : 1;
        std::vector<double> util(topo_->links().size(), 0.0);
        for (std::size_t slot = 0; slot < load.size(); ++slot)
            util[slot / per] = std::max(util[slot / per], load[slot] / cap[slot]);
        return util;
    }

    void refresh_delay_matrix(Tick t) {
        const auto util = link_utilization();
        delay_ = compute_delay_matrix(*topo_, *router_, util, cfg_, t);
    }

    FlowId start_flow(FlowKind kind, HostId src, HostId dst, double bytes, std::vector<ContainerId> owners, Tick t,
                      std::size_t event_index = 0) {
        Flow f;
        f.id = next_id_++;
        f.kind = kind;
        f.src = src;
        f.dst = dst;
        f.bytes_total = bytes;
        f.bytes_remaining = bytes;
        f.start_tick = t;
        f.owners = std::move(owners);
        f.event_index = event_index;
        flows_.emplace(f.id, std::move(f));
        return next_id_ - 1;
    }

    void cancel(FlowId id) { flows_.erase(id); }

    /// Rates for every flow in id order: max-min fair over link capacities,
    /// then capped by the loss-limited TCP rate. Unroutable flows get 0,
    /// intra-host flows +inf.
    std::vector<double> fair_share_rates() {
        std::vector<std::vector<std::size_t>> paths;
        std::vector<const Flow*> order;
        std::vector<bool> routed;
        for (const auto& [id, f] : flows_) {
            order.push_back(&f);
            const auto& r = router_->get(f.src, f.dst);
            routed.push_back(f.src == f.dst || r.has_value());
            paths.push_back(r && f.src != f.dst ? capacity_slots(*r) : std::vector<std::size_t>{});
        }
        const auto cap = slot_capacities();
        // Unroutable flows take part with no links and are zeroed afterwards.
        auto rates = max_min_fair(cap, paths);
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto& f = *order[k];
            if (!routed[k]) {
                rates[k] = 0;
                continue;
            }
            if (f.src == f.dst) continue;
            const auto& r = *router_->get(f.src, f.dst);
            double d = delay_.size() > 0 ? delay_.at(f.src, f.dst) : kInf;
            if (!std::isfinite(d)) d = r.latency_ms / 1000.0;
            rates[k] = std::min(rates[k], tcp_rate_cap_mbps(cfg_.mss_bytes, cfg_.mathis_const, 2.0 * d,
                                                            path_loss(*topo_, r)));
        }
        return rates;
    }

    /// One tick of transfer progress for every flow, in id order.
    std::vector<FlowOutcome> advance(Tick t) {
        const auto rates = fair_share_rates();
        std::vector<FlowOutcome> out;
        std::size_t k = 0;
        for (auto it = flows_.begin(); it != flows_.end(); ++k) {
            auto& f = it->second;
            f.current_rate = rates[k];
            if (f.src == f.dst) {
                f.bytes_remaining = 0;
                out.push_back({FlowOutcome::Kind::Completed, f, 0.0});
                it = flows_.erase(it);
                continue;
            }
            if (!router_->get(f.src, f.dst)) {
                ++f.stall_ticks;
                if (f.stall_ticks >= cfg_.stall_timeout) {
                    f.stall_ticks = 0;
                    f.bytes_remaining = f.bytes_total;
                    if (f.attempt >= cfg_.max_retransmissions + 1) {
                        out.push_back({FlowOutcome::Kind::PermanentFailure, f, 0.0});
                        it = flows_.erase(it);
                        continue;
                    }
                    ++f.attempt;
                    out.push_back({FlowOutcome::Kind::AttemptFailed, f, 0.0});
                }
                ++it;
                continue;
            }
            f.stall_ticks = 0;
            f.bytes_remaining -= f.current_rate * 1e6 / 8.0;
            if (f.bytes_remaining <= 0) {
                f.bytes_remaining = 0;
                const double latency = delay_.size() > 0 ? delay_.at(f.src, f.dst) : 0.0;
                const double tt = static_cast<double>(t - f.start_tick + 1) +
                                  2.0 * (std::isfinite(latency) ? latency : 0.0);
                out.push_back({FlowOutcome::Kind::Completed, f, tt});
                it = flows_.erase(it);
                continue;
            }
            ++it;
        }
        return out;
    }

  private:
    std::unique_ptr<Topology> topo_;
    std::unique_ptr<Router> router_;
    NetworkConfig cfg_;
    DelayMatrix delay_;
    std::map<FlowId, Flow> flows_;
    FlowId next_id_ = 0;
};

} // namespace netsched
