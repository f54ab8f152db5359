#pragma once

// Network graph, the declarative topology format, the spine-leaf generator,
// deterministic shortest-path routing and scheduled faults.

#include "datacenter.hpp"
#include "error.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace netsched {

enum class NodeKind : std::uint8_t { Host, Switch };

struct Node {
    std::string name;
    NodeKind kind = NodeKind::Switch;
};

struct Link {
    std::size_t a = 0;
    std::size_t b = 0;
    double bandwidth_mbps = 1000;
    double delay_ms = 0;
    double loss = 0;
    bool up = true;

    std::size_t other(std::size_t n) const { return n == a ? b : a; }
};

struct Fault {
    enum class Target : std::uint8_t { Link, Node };
    Target target = Target::Link;
    std::size_t element = 0; // link id or node id
    Tick start = 0;
    Tick duration = 0;

    bool active_at(Tick t) const { return t >= start && t < start + duration; }
};

class Topology {
  public:
    std::size_t add_node(std::string name, NodeKind kind) {
        if (by_name_.contains(name)) throw ValidationError("duplicate node '" + name + "'");
        const auto id = nodes_.size();
        by_name_.emplace(name, id);
        nodes_.push_back({std::move(name), kind});
        incident_.emplace_back();
        if (kind == NodeKind::Host) host_nodes_.push_back(id);
        return id;
    }

    std::size_t add_link(std::size_t a, std::size_t b, double bw, double delay_ms, double loss) {
        if (a == b) throw ValidationError("link from '" + nodes_[a].name + "' to itself");
        if (find_link(a, b))
            throw ValidationError("duplicate link " + nodes_[a].name + " " + nodes_[b].name);
        if (!(bw > 0)) throw ValidationError("link bandwidth must be > 0");
        if (!(delay_ms >= 0)) throw ValidationError("link delay must be >= 0");
        if (!(loss >= 0 && loss < 1)) throw ValidationError("link loss must be in [0, 1)");
        const auto id = links_.size();
        links_.push_back({a, b, bw, delay_ms, loss, true});
        incident_[a].push_back(id);
        incident_[b].push_back(id);
        return id;
    }

    void add_fault(Fault f) { faults_.push_back(f); }

    std::optional<std::size_t> node_id(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::size_t> find_link(std::size_t a, std::size_t b) const {
        for (const auto l : incident_[a]) {
            if (links_[l].other(a) == b) return l;
        }
        return std::nullopt;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const std::vector<Fault>& faults() const { return faults_; }
    const std::vector<std::size_t>& incident(std::size_t node) const { return incident_[node]; }
    std::size_t host_count() const { return host_nodes_.size(); }
    std::size_t host_node(HostId h) const { return host_nodes_.at(h); }
    const std::string& host_name(HostId h) const { return nodes_[host_nodes_.at(h)].name; }

    /// Bumped whenever an up flag changes, so cached routes know to rebuild.
    std::uint64_t version() const { return version_; }

    void set_link_up(std::size_t l, bool up) {
        if (links_[l].up != up) {
            links_[l].up = up;
            ++version_;
        }
    }

    /// Test hooks for sweeping link parameters on an existing graph.
    void set_link_bandwidth(std::size_t l, double bw) { links_.at(l).bandwidth_mbps = bw; }
    void set_link_loss(std::size_t l, double loss) { links_.at(l).loss = loss; }

    void set_all_links(double bw, double loss) {
        for (auto& l : links_) {
            l.bandwidth_mbps = bw;
            l.loss = loss;
        }
    }

  private:
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<Fault> faults_;
    std::vector<std::vector<std::size_t>> incident_;
    std::vector<std::size_t> host_nodes_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::uint64_t version_ = 0;
};

/// Connectivity over currently-up links; returns the first unreachable host pair.
inline std::optional<std::pair<HostId, HostId>> unreachable_pair(const Topology& topo) {
    if (topo.host_count() < 2) return std::nullopt;
    std::vector<bool> seen(topo.nodes().size(), false);
    std::vector<std::size_t> stack{topo.host_node(0)};
    seen[topo.host_node(0)] = true;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        for (const auto l : topo.incident(n)) {
            if (!topo.links()[l].up) continue;
            const auto m = topo.links()[l].other(n);
            if (!seen[m]) {
                seen[m] = true;
                stack.push_back(m);
            }
        }
    }
    for (HostId h = 1; h < topo.host_count(); ++h) {
        if (!seen[topo.host_node(h)]) return std::pair<HostId, HostId>{0, h};
    }
    return std::nullopt;
}

inline void validate_topology(const Topology& topo) {
    if (topo.host_count() == 0) throw ValidationError("topology declares no hosts");
    for (HostId h = 0; h < topo.host_count(); ++h) {
        if (topo.incident(topo.host_node(h)).empty())
            throw ValidationError("host '" + topo.host_name(h) + "' has no links (unreachable from every other host)");
    }
    if (const auto p = unreachable_pair(topo))
        throw ValidationError("hosts '" + topo.host_name(p->first) + "' and '" + topo.host_name(p->second) +
                              "' are not connected");
}

/// Parses the line format:
///   switch <name> | host <name> | link <a> <b> bw=<Mbps> delay=<ms> loss=<fraction>
///   fault link <a> <b> at=<tick> for=<ticks> | fault node <name> at=<tick> for=<ticks>
/// Blank lines and '#' comments are ignored. Hosts are numbered in declaration order.
inline Topology parse_topology(std::string_view text_in) {
    Topology topo;
    const auto all = text::lines(text_in);
    for (std::size_t ln = 0; ln < all.size(); ++ln) {
        const auto line_no = ln + 1;
        auto line = all[ln];
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;

        std::vector<std::string_view> tok;
        for (auto t : text::split(line, ' ')) {
            t = text::trim(t);
            if (!t.empty()) tok.push_back(t);
        }
        auto node = [&](std::string_view name) {
            const auto id = topo.node_id(name);
            if (!id) throw ParseError("undeclared node '" + std::string(name) + "'", line_no);
            return *id;
        };
        auto attrs = [&](std::size_t from, std::initializer_list<std::string_view> keys) {
            std::unordered_map<std::string, double> out;
            for (std::size_t i = from; i < tok.size(); ++i) {
                const auto eq = tok[i].find('=');
                if (eq == std::string_view::npos)
                    throw ParseError("expected key=value, got '" + std::string(tok[i]) + "'", line_no);
                const auto key = tok[i].substr(0, eq);
                if (std::find(keys.begin(), keys.end(), key) == keys.end())
                    throw ParseError("unknown attribute '" + std::string(key) + "'", line_no);
                const auto v = text::to_double(tok[i].substr(eq + 1));
                if (!v) throw ParseError("attribute '" + std::string(key) + "' is not a number", line_no);
                if (!out.emplace(std::string(key), *v).second)
                    throw ParseError("repeated attribute '" + std::string(key) + "'", line_no);
            }
            for (const auto k : keys) {
                if (!out.contains(std::string(k)))
                    throw ParseError("missing attribute '" + std::string(k) + "'", line_no);
            }
            return out;
        };

        try {
            if ((tok[0] == "switch" || tok[0] == "host") && tok.size() == 2) {
                topo.add_node(std::string(tok[1]), tok[0] == "host" ? NodeKind::Host : NodeKind::Switch);
            } else if (tok[0] == "link" && tok.size() >= 3) {
                const auto a = node(tok[1]);
                const auto b = node(tok[2]);
                const auto kv = attrs(3, {"bw", "delay", "loss"});
                topo.add_link(a, b, kv.at("bw"), kv.at("delay"), kv.at("loss"));
            } else if (tok[0] == "fault" && tok.size() >= 3 && (tok[1] == "link" || tok[1] == "node")) {
                Fault f;
                std::size_t next = 3;
                if (tok[1] == "link") {
                    if (tok.size() < 4) throw ParseError("fault link needs two endpoints", line_no);
                    const auto a = topo.node_id(tok[2]);
                    const auto b = topo.node_id(tok[3]);
                    const auto l = (a && b) ? topo.find_link(*a, *b) : std::nullopt;
                    if (!l)
                        throw ConfigError("line " + std::to_string(line_no),
                                          "fault names unknown link '" + std::string(tok[2]) + " " +
                                              std::string(tok[3]) + "'");
                    f.target = Fault::Target::Link;
                    f.element = *l;
                    next = 4;
                } else {
                    const auto n = topo.node_id(tok[2]);
                    if (!n)
                        throw ConfigError("line " + std::to_string(line_no),
                                          "fault names unknown node '" + std::string(tok[2]) + "'");
                    f.target = Fault::Target::Node;
                    f.element = *n;
                }
                const auto kv = attrs(next, {"at", "for"});
                if (kv.at("at") < 0 || kv.at("for") < 0 || kv.at("at") != std::floor(kv.at("at")) ||
                    kv.at("for") != std::floor(kv.at("for")))
                    throw ParseError("fault at/for must be non-negative integers", line_no);
                f.start = static_cast<Tick>(kv.at("at"));
                f.duration = static_cast<Tick>(kv.at("for"));
                topo.add_fault(f);
            } else {
                throw ParseError("unrecognised statement '" + std::string(line) + "'", line_no);
            }
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    validate_topology(topo);
    return topo;
}

struct SpineLeafParams {
    std::size_t spines = 2;
    std::size_t leaves = 4;
    std::size_t hosts_per_leaf = 5;
    double bandwidth_mbps = 1000;
    double delay_ms = 0.5;
    double loss = 0;
};

/// Parses `spine-leaf:<spines>,<leaves>,<hosts-per-leaf>[,bw,delay,loss]`.
inline std::optional<SpineLeafParams> parse_spine_leaf_arg(std::string_view arg) {
    constexpr std::string_view prefix = "spine-leaf:";
    if (!arg.starts_with(prefix)) return std::nullopt;
    const auto parts = text::split(arg.substr(prefix.size()), ',');
    if (parts.size() != 3 && parts.size() != 6)
        throw ValidationError("spine-leaf expects 3 or 6 comma-separated values");
    SpineLeafParams p;
    auto count = [&](std::size_t i) {
        const auto v = text::to_int(parts[i]);
        if (!v || *v <= 0) throw ValidationError("spine-leaf counts must be positive integers");
        return static_cast<std::size_t>(*v);
    };
    auto real = [&](std::size_t i) {
        const auto v = text::to_double(parts[i]);
        if (!v) throw ValidationError("spine-leaf link parameters must be numbers");
        return *v;
    };
    p.spines = count(0);
    p.leaves = count(1);
    p.hosts_per_leaf = count(2);
    if (parts.size() == 6) {
        p.bandwidth_mbps = real(3);
        p.delay_ms = real(4);
        p.loss = real(5);
    }
    return p;
}

/// Topology file text for a two-tier spine-leaf fabric. Every leaf links to
/// every spine; hosts h<k> hang off leaf l<k / hosts_per_leaf>.
inline std::string spine_leaf_text(const SpineLeafParams& p) {
    std::string out = "# spine-leaf " + std::to_string(p.spines) + " spines, " + std::to_string(p.leaves) +
                      " leaves, " + std::to_string(p.hosts_per_leaf) + " hosts per leaf\n";
    const auto attrs = " bw=" + text::exact(p.bandwidth_mbps) + " delay=" + text::exact(p.delay_ms) +
                       " loss=" + text::exact(p.loss) + "\n";
    for (std::size_t s = 0; s < p.spines; ++s) out += "switch s" + std::to_string(s) + "\n";
    for (std::size_t l = 0; l < p.leaves; ++l) out += "switch l" + std::to_string(l) + "\n";
    for (std::size_t h = 0; h < p.leaves * p.hosts_per_leaf; ++h) out += "host h" + std::to_string(h) + "\n";
    for (std::size_t l = 0; l < p.leaves; ++l) {
        for (std::size_t s = 0; s < p.spines; ++s)
            out += "link l" + std::to_string(l) + " s" + std::to_string(s) + attrs;
    }
    for (std::size_t h = 0; h < p.leaves * p.hosts_per_leaf; ++h)
        out += "link h" + std::to_string(h) + " l" + std::to_string(h / p.hosts_per_leaf) + attrs;
    return out;
}

inline Topology spine_leaf(const SpineLeafParams& p) { return parse_topology(spine_leaf_text(p)); }

struct Route {
    std::vector<std::size_t> nodes; // from source to destination, inclusive
    std::vector<std::size_t> links;
    double latency_ms = 0;
};

/// Single-source shortest paths over up links. Order: total base latency, then
/// hop count, then lexicographically smallest node-id sequence.
inline std::vector<std::optional<Route>> shortest_routes_from(const Topology& topo, std::size_t src) {
    const auto n = topo.nodes().size();
    std::vector<std::optional<Route>> best(n);
    std::vector<bool> done(n, false);
    best[src] = Route{{src}, {}, 0.0};

    auto better = [](const Route& x, const Route& y) {
        if (x.latency_ms != y.latency_ms) return x.latency_ms < y.latency_ms;
        if (x.links.size() != y.links.size()) return x.links.size() < y.links.size();
        return x.nodes < y.nodes;
    };
    while (true) {
        std::optional<std::size_t> u;
        for (std::size_t v = 0; v < n; ++v) {
            if (done[v] || !best[v]) continue;
            if (!u || better(*best[v], *best[*u])) u = v;
        }
        if (!u) break;
        done[*u] = true;
        for (const auto l : topo.incident(*u)) {
            const auto& link = topo.links()[l];
            if (!link.up) continue;
            const auto v = link.other(*u);
            if (done[v]) continue;
            Route cand = *best[*u];
            cand.nodes.push_back(v);
            cand.links.push_back(l);
            cand.latency_ms += link.delay_ms;
            if (!best[v] || better(cand, *best[v])) best[v] = std::move(cand);
        }
    }
    return best;
}

/// Route between two hosts; empty when i == j. Throws NoRoute when partitioned.
inline Route route(const Topology& topo, HostId i, HostId j) {
    if (i == j) return Route{{topo.host_node(i)}, {}, 0.0};
    auto all = shortest_routes_from(topo, topo.host_node(i));
    auto& r = all[topo.host_node(j)];
    if (!r) throw NoRoute("no route between '" + topo.host_name(i) + "' and '" + topo.host_name(j) + "'");
    return std::move(*r);
}

/// Caches host-to-host routes and rebuilds them when an up flag changes.
class Router {
  public:
    explicit Router(const Topology& topo) : topo_(&topo) {}

    const std::optional<Route>& get(HostId i, HostId j) {
        refresh();
        return table_[i * topo_->host_count() + j];
    }

  private:
    void refresh() {
        if (built_ && version_ == topo_->version()) return;
        const auto h = topo_->host_count();
        table_.assign(h * h, std::nullopt);
        for (HostId i = 0; i < h; ++i) {
            auto from = shortest_routes_from(*topo_, topo_->host_node(i));
            for (HostId j = 0; j < h; ++j) table_[i * h + j] = std::move(from[topo_->host_node(j)]);
        }
        version_ = topo_->version();
        built_ = true;
    }

    const Topology* topo_;
    std::vector<std::optional<Route>> table_;
    std::uint64_t version_ = 0;
    bool built_ = false;
};

/// Sets every link's up flag from the fault schedule at tick t. Returns true if anything changed.
inline bool apply_faults(Topology& topo, Tick t) {
    std::vector<bool> down(topo.links().size(), false);
    for (const auto& f : topo.faults()) {
        if (!f.active_at(t)) continue;
        if (f.target == Fault::Target::Link) {
            down[f.element] = true;
        } else {
            for (const auto l : topo.incident(f.element)) down[l] = true;
        }
    }
    const auto before = topo.version();
    for (std::size_t l = 0; l < down.size(); ++l) topo.set_link_up(l, !down[l]);
    return topo.version() != before;
}

} // namespace netsched
