#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace netsched;
using fixtures::host;

namespace {

SchedulerView view_of(const std::vector<HostSpec>& hosts, const std::vector<ResourceVector>& allocated = {}) {
    SchedulerView v;
    for (std::size_t h = 0; h < hosts.size(); ++h) {
        const auto a = h < allocated.size() ? allocated[h] : ResourceVector{};
        v.hosts.push_back({hosts[h], a, utilization_of(a, hosts[h].capacity())});
    }
    v.running_by_host.resize(hosts.size());
    return v;
}

std::vector<HostSpec> uniform_hosts(std::size_t n, double cpu = 1000, double mem = 100, double gpu = 100) {
    std::vector<HostSpec> out;
    for (HostId h = 0; h < n; ++h) out.push_back(host(h, cpu, mem, gpu));
    return out;
}

CandidateView cand(ContainerId id, ResourceVector req, JobId job = 0, ContainerType type = ContainerType::CpuIntensive) {
    CandidateView c;
    c.id = id;
    c.job = job;
    c.request = req;
    c.type = type;
    return c;
}

void deploy_running(SchedulerView& v, HostId h, CandidateView c) {
    c.status = ContainerStatus::Running;
    c.host = h;
    v.reserve(h, c.request);
    ++v.job_hosts[c.job][h];
    v.running_by_host[h].push_back(c);
}

} // namespace

TEST(Select, DefaultIsUndeployedQueue) {
    auto v = view_of(uniform_hosts(2));
    EXPECT_TRUE(select(v).empty());
    v.undeployed = {cand(4, {}), cand(2, {})};
    const auto s = select(v);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].id, 4u);
}

TEST(FirstFit, SkipsFullHost) {
    const auto v = view_of(uniform_hosts(2), {{1000, 0, 0}});
    EXPECT_EQ(place_first_fit(cand(0, {100, 1, 1}), v), 1u);
}

TEST(FirstFit, NothingFits) {
    const auto v = view_of(uniform_hosts(2), {{1000, 0, 0}, {950, 0, 0}});
    EXPECT_FALSE(place_first_fit(cand(0, {100, 1, 1}), v));
}

TEST(FirstFit, IgnoresSpeed) {
    auto hosts = uniform_hosts(3);
    hosts[2].cpu_speed = 4;
    EXPECT_EQ(place_first_fit(cand(0, {100, 1, 1}), view_of(hosts)), 0u);
}

TEST(FirstFit, FillsPrefixFirst) {
    Scheduler s({});
    auto v = view_of(uniform_hosts(4));
    for (ContainerId i = 0; i < 12; ++i) v.undeployed.push_back(cand(i, {300, 1, 1}));
    const auto d = s.decide(v);
    ASSERT_EQ(d.size(), 12u);
    for (ContainerId i = 0; i < 12; ++i) EXPECT_EQ(d[i].target, i / 3);
}

TEST(Round, CursorExamples) {
    const auto v = view_of(uniform_hosts(3));
    std::int64_t cursor = -1;
    EXPECT_EQ(place_round(cand(0, {}), v, cursor), 0u);
    EXPECT_EQ(cursor, 0);
    EXPECT_EQ(place_round(cand(0, {}), v, cursor), 1u);
    cursor = 2;
    EXPECT_EQ(place_round(cand(0, {}), v, cursor), 0u);
    EXPECT_EQ(cursor, 0);
}

TEST(Round, NoFitKeepsCursor) {
    const auto v = view_of(uniform_hosts(3), {{1000, 0, 0}, {1000, 0, 0}, {1000, 0, 0}});
    std::int64_t cursor = 1;
    EXPECT_FALSE(place_round(cand(0, {1, 0, 0}), v, cursor));
    EXPECT_EQ(cursor, 1);
}

TEST(Round, Dispersion) {
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t k = 1; k <= n; ++k) {
            Scheduler s({.algorithm = "round"});
            auto v = view_of(uniform_hosts(n));
            for (ContainerId i = 0; i < k; ++i) v.undeployed.push_back(cand(i, {100, 1, 1}));
            std::vector<std::size_t> per(n, 0);
            for (const auto& d : s.decide(v)) ++per[d.target];
            for (const auto c : per) EXPECT_LE(c, (k + n - 1) / n);
        }
    }
}

TEST(PerformanceFirst, FastestFeasible) {
    auto hosts = uniform_hosts(8);
    hosts[7].cpu_speed = 4;
    EXPECT_EQ(place_performance_first(cand(0, {100, 1, 1}), view_of(hosts)), 7u);
}

TEST(PerformanceFirst, MatchesContainerType) {
    auto hosts = uniform_hosts(3);
    hosts[1].cpu_speed = 4;
    hosts[2].gpu_speed = 3;
    EXPECT_EQ(place_performance_first(cand(0, {}, 0, ContainerType::GpuIntensive), view_of(hosts)), 2u);
    EXPECT_EQ(place_performance_first(cand(0, {}, 0, ContainerType::MemIntensive), view_of(hosts)), 0u);
}

TEST(PerformanceFirst, EqualSpeedsReduceToFirstFit) {
    const auto v = view_of(uniform_hosts(4), {{1000, 0, 0}});
    EXPECT_EQ(place_performance_first(cand(0, {100, 1, 1}), v), place_first_fit(cand(0, {100, 1, 1}), v));
}

TEST(PerformanceFirst, ConstraintsBeatSpeed) {
    auto hosts = uniform_hosts(2);
    hosts[1].cpu_speed = 4;
    EXPECT_EQ(place_performance_first(cand(0, {100, 1, 1}), view_of(hosts, {{}, {1000, 0, 0}})), 0u);
}

TEST(PerformanceFirst, ScaleInvariant) {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 200; ++trial) {
        auto hosts = uniform_hosts(6);
        for (auto& h : hosts) h.cpu_speed = 1 + static_cast<double>(gen() % 4);
        auto scaled = hosts;
        const double k = 0.25 + static_cast<double>(gen() % 100) / 10.0;
        for (auto& h : scaled) h.cpu_speed *= k;
        std::vector<ResourceVector> alloc;
        for (std::size_t h = 0; h < hosts.size(); ++h) alloc.push_back({static_cast<double>(gen() % 1000), 0, 0});
        const auto c = cand(0, {300, 1, 1});
        EXPECT_EQ(place_performance_first(c, view_of(hosts, alloc)), place_performance_first(c, view_of(scaled, alloc)));
    }
}

TEST(JobGroup, FollowsSibling) {
    auto v = view_of(uniform_hosts(5));
    deploy_running(v, 3, cand(9, {100, 1, 1}, 7));
    EXPECT_EQ(place_job_group(cand(0, {100, 1, 1}, 7), v), 3u);
}

TEST(JobGroup, WorstFitWithoutSiblings) {
    const auto v = view_of(uniform_hosts(2), {{600, 0, 0}, {100, 0, 0}});
    EXPECT_EQ(place_job_group(cand(0, {100, 1, 1}, 7), v), 1u);
}

TEST(JobGroup, FullSiblingHostFallsBackToWorstFit) {
    auto v = view_of(uniform_hosts(3), {{500, 0, 0}, {200, 0, 0}});
    deploy_running(v, 2, cand(9, {1000, 1, 1}, 7));
    EXPECT_EQ(place_job_group(cand(0, {100, 1, 1}, 7), v), 1u);
}

TEST(JobGroup, ColocatesWhenPossible) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 200; ++trial) {
        auto v = view_of(uniform_hosts(5));
        for (ContainerId i = 0; i < 6; ++i)
            deploy_running(v, gen() % 5, cand(100 + i, {static_cast<double>(gen() % 300), 1, 1}, gen() % 3));
        const auto c = cand(0, {static_cast<double>(gen() % 500), 1, 1}, gen() % 3);
        bool sibling_feasible = false;
        for (HostId h = 0; h < 5; ++h) sibling_feasible |= v.siblings_on(c.job, h) > 0 && v.hosts[h].fits(c.request);
        const auto got = place_job_group(c, v);
        if (sibling_feasible) {
            ASSERT_TRUE(got);
            EXPECT_GT(v.siblings_on(c.job, *got), 0u);
        }
    }
}

TEST(OverloadTarget, Examples) {
    auto v = view_of(uniform_hosts(3), {{500, 0, 0}, {200, 0, 0}, {100, 0, 0}});
    const SchedulerConfig cfg;
    EXPECT_EQ(place_overload_target(cand(0, {100, 1, 1}), v, cfg), 2u);
    v = view_of(uniform_hosts(3), {{500, 0, 0}, {500, 0, 0}, {500, 0, 0}});
    EXPECT_FALSE(place_overload_target(cand(0, {100, 1, 1}), v, cfg));
    v = view_of(uniform_hosts(2), {{100, 0, 0}, {0, 0, 0}});
    EXPECT_EQ(place_overload_target(cand(0, {100, 1, 1}), v, cfg), 1u);
}

TEST(OverloadMigrate, NothingAboveThreshold) {
    auto v = view_of(uniform_hosts(2));
    deploy_running(v, 0, cand(0, {700, 1, 1}));
    EXPECT_TRUE(select_overload_migrate(v, {}).empty());
}

TEST(OverloadMigrate, PicksLargestBottleneckRequest) {
    auto hosts = uniform_hosts(2, 2340);
    auto v = view_of(hosts);
    deploy_running(v, 0, cand(1, {400, 1, 1}));
    deploy_running(v, 0, cand(2, {1700, 1, 1}));
    ASSERT_NEAR(v.hosts[0].util.dominant, 0.9, 0.01);
    const auto d = select_overload_migrate(v, {});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0], (SchedulingDecision{2, 1, Action::Migrate}));
}

TEST(OverloadMigrate, NoIdleHostNoMigration) {
    auto v = view_of(uniform_hosts(2), {{}, {500, 0, 0}});
    deploy_running(v, 0, cand(1, {900, 1, 1}));
    EXPECT_TRUE(select_overload_migrate(v, {}).empty());
}

TEST(OverloadMigrate, OnePerHostPerRound) {
    auto v = view_of(uniform_hosts(4));
    deploy_running(v, 0, cand(1, {450, 1, 1}));
    deploy_running(v, 0, cand(2, {450, 1, 1}));
    deploy_running(v, 1, cand(3, {800, 1, 1}));
    const auto d = select_overload_migrate(v, {});
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].container, 1u);
    EXPECT_EQ(d[1].container, 3u);
    EXPECT_NE(d[0].target, d[1].target);
}

TEST(SchedulerConfigTest, ThresholdOrder) {
    SchedulerConfig c;
    c.idle_threshold = 0.8;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.algorithm = "nope";
    EXPECT_THROW(Scheduler{c}, ConfigError);
}

TEST(Registry, CustomPlacementPlugsIn) {
    auto reg = AlgorithmRegistry::builtin();
    struct LastHost final : PlacementPolicy {
        std::optional<HostId> place(const CandidateView& c, const SchedulerView& v) override {
            for (auto h = v.hosts.size(); h-- > 0;)
                if (v.hosts[h].fits(c.request)) return h;
            return std::nullopt;
        }
    };
    reg.add("last_host", [](const SchedulerConfig&) { return std::make_unique<LastHost>(); });
    Scheduler s({.algorithm = "last_host"}, reg);
    auto v = view_of(uniform_hosts(3));
    v.undeployed = {cand(0, {100, 1, 1})};
    EXPECT_EQ(s.decide(v).at(0).target, 2u);
}

// Execution of decisions goes through the engine.

TEST(Execute, DeployStartsRunning) {
    fixtures::StreamBuilder b;
    b.container(b.job(0), {100, 1, 10}, 10);
    Simulation sim(fixtures::options(), {host(0, 1000, 100, 100)}, fixtures::star(1), b.s);
    sim.run_tick();
    const auto& c = sim.containers()[0];
    EXPECT_EQ(c.status, ContainerStatus::Running);
    EXPECT_EQ(c.first_deploy_time, 0);
    EXPECT_EQ(c.host, 0u);
    EXPECT_EQ(c.run_at, 1);
}

TEST(Execute, StaleDecisionDropped) {
    auto reg = AlgorithmRegistry::builtin();
    struct AlwaysZero final : PlacementPolicy {
        std::optional<HostId> place(const CandidateView&, const SchedulerView&) override { return 0; }
    };
    reg.add("always_zero", [](const SchedulerConfig&) { return std::make_unique<AlwaysZero>(); });
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    b.container(j, {800, 1, 1}, 100);
    b.container(j, {800, 1, 1}, 100);
    Simulation sim(fixtures::options("always_zero"), {host(0, 1000, 100, 100), host(1, 1000, 100, 100)},
                   fixtures::star(2), b.s, reg);
    sim.run_tick();
    EXPECT_EQ(sim.containers()[0].status, ContainerStatus::Running);
    EXPECT_EQ(sim.containers()[1].status, ContainerStatus::Inactive);
    EXPECT_EQ(sim.dropped_decisions(), 1u);
    EXPECT_EQ(sim.queues().undeployed, (std::vector<ContainerId>{1}));
    EXPECT_TRUE(sim.hosts()[0].consistent());
}

TEST(Execute, MigrationVolumeFollowsMemory) {
    fixtures::StreamBuilder b;
    b.container(b.job(0), {800, 8, 0}, 100);
    auto opts = fixtures::options("overload_migrate");
    Simulation sim(opts, {host(0, 1000, 100, 100), host(1, 1000, 100, 100)}, fixtures::star(2), b.s);
    sim.run_tick();
    EXPECT_EQ(sim.containers()[0].host, 0u);
    sim.run_tick();
    ASSERT_EQ(sim.network().flows().size(), 1u);
    const auto& f = sim.network().flows().begin()->second;
    EXPECT_EQ(f.kind, FlowKind::Migration);
    EXPECT_DOUBLE_EQ(f.bytes_total, 2048e6);
    EXPECT_EQ(sim.containers()[0].status, ContainerStatus::Migrating);
    const double before = sim.containers()[0].run_at;
    while (sim.containers()[0].status == ContainerStatus::Migrating) {
        sim.run_tick();
        if (sim.containers()[0].status == ContainerStatus::Migrating) EXPECT_EQ(sim.containers()[0].run_at, before);
    }
    EXPECT_EQ(sim.containers()[0].host, 1u);
    EXPECT_EQ(sim.containers()[0].migrations, 1u);
    EXPECT_TRUE(sim.hosts()[0].deployed().empty());
}
