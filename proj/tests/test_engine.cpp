#include "support.hpp"

#include <gtest/gtest.h>

using namespace netsched;
using fixtures::host;

namespace {

std::vector<HostSpec> two_hosts(double cpu = 1000) { return {host(0, cpu, 100, 100), host(1, cpu, 100, 100)}; }

void expect_partition(const Simulation& sim) {
    const auto q = sim.queues();
    EXPECT_EQ(q.undeployed.size() + q.deployed.size() + q.completed.size() - q.migrating, sim.admitted().size());
    for (const auto& h : sim.hosts()) EXPECT_TRUE(h.consistent());
    for (const auto id : q.deployed) {
        const auto& c = sim.containers()[id];
        ASSERT_TRUE(c.host);
        EXPECT_TRUE(sim.hosts()[*c.host].deployed().contains(id));
    }
}

} // namespace

TEST(Engine, EmptyWorkloadTerminatesAtZero) {
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), {});
    EXPECT_TRUE(sim.terminated());
    const auto r = sim.run();
    EXPECT_EQ(r.makespan, 0);
    EXPECT_TRUE(sim.samples().empty());
    EXPECT_THROW(sim.run_tick(), std::logic_error);
}

TEST(Engine, SingleContainerTakesDurationTicks) {
    fixtures::StreamBuilder b;
    b.container(b.job(0), {100, 1, 1}, 10);
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), b.s);
    const auto r = sim.run();
    EXPECT_EQ(r.makespan, 10);
    EXPECT_EQ(sim.samples().size(), 10u);
    EXPECT_EQ(sim.containers()[0].completion_time, 10);
    EXPECT_EQ(sim.containers()[0].exec_ticks, 10u);
    EXPECT_EQ(sim.jobs()[0].completion_time, 10);
    EXPECT_DOUBLE_EQ(r.avg_response_time, 10);
}

TEST(Engine, LateArrivalWaitsForSubmitTime) {
    fixtures::StreamBuilder b;
    b.container(b.job(4), {100, 1, 1}, 3);
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), b.s);
    sim.run();
    EXPECT_EQ(sim.containers()[0].first_deploy_time, 4);
    EXPECT_EQ(sim.containers()[0].completion_time, 7);
}

TEST(Engine, CommTriggerBeatsCompletionInSameTick) {
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    const auto a = b.container(j, {600, 1, 1}, 10);
    const auto p = b.container(j, {600, 1, 1}, 100);
    b.comm(a, p, 9.5, 250000);
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), b.s);
    for (int k = 0; k < 10; ++k) sim.run_tick();
    EXPECT_EQ(sim.containers()[a].status, ContainerStatus::Communicating);
    EXPECT_EQ(sim.containers()[p].status, ContainerStatus::Communicating);
    EXPECT_EQ(sim.containers()[a].run_at, 9);
    while (sim.containers()[a].status != ContainerStatus::Completed) sim.run_tick();
    EXPECT_EQ(sim.containers()[a].comm_plan[0].state, CommState::Done);
    EXPECT_EQ(sim.containers()[a].comm_done, 1u);
    EXPECT_GT(*sim.containers()[a].completion_time, 10);
    EXPECT_GT(sim.containers()[a].comm_time_total, 0);
}

TEST(Engine, UndeployedPartnerDefersWithoutBlocking) {
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    const auto a = b.container(j, {600, 1, 1}, 10);
    const auto p = b.container(j, {600, 1, 1}, 5);
    b.comm(a, p, 2, 10);
    Simulation sim(fixtures::options(), {host(0, 1000, 100, 100)}, fixtures::star(1), b.s);
    for (int k = 0; k < 5; ++k) {
        sim.run_tick();
        EXPECT_EQ(sim.containers()[a].status, ContainerStatus::Running);
        EXPECT_EQ(sim.containers()[a].comm_plan[0].state, CommState::Pending);
    }
    EXPECT_EQ(sim.containers()[a].run_at, 5);
    const auto r = sim.run();
    EXPECT_EQ(sim.containers()[a].completion_time, 10);
    EXPECT_EQ(sim.containers()[a].comm_plan[0].state, CommState::Skipped);
    EXPECT_EQ(sim.containers()[p].first_deploy_time, 10);
    EXPECT_EQ(r.skipped_comm_events, 1u);
    EXPECT_EQ(r.comm_samples, 0u);
}

TEST(Engine, CompletedPartnerSkipsEvent) {
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    const auto a = b.container(j, {100, 1, 1}, 10);
    const auto p = b.container(j, {100, 1, 1}, 2);
    b.comm(a, p, 5, 10);
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), b.s);
    const auto r = sim.run();
    EXPECT_EQ(sim.containers()[a].comm_plan[0].state, CommState::Skipped);
    EXPECT_EQ(sim.containers()[a].completion_time, 10);
    EXPECT_EQ(r.skipped_comm_events, 1u);
}

TEST(Engine, SameHostCommCompletesImmediately) {
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    const auto a = b.container(j, {100, 1, 1}, 10);
    const auto p = b.container(j, {100, 1, 1}, 20);
    b.comm(a, p, 3, 1e6);
    Simulation sim(fixtures::options(), two_hosts(), fixtures::star(2), b.s);
    sim.run();
    EXPECT_EQ(sim.containers()[a].comm_done, 1u);
    EXPECT_EQ(sim.containers()[a].comm_time_total, 0);
    EXPECT_EQ(sim.containers()[a].completion_time, 10);
}

TEST(Engine, DeterministicForFixedSeed) {
    fixtures::Scenario s;
    s.algorithm = "overload_migrate";
    s.seed = 3;
    const auto a = s.run();
    const auto b = s.run();
    EXPECT_EQ(a.report(), b.report());
    EXPECT_EQ(ticks_csv(a.samples(), VarianceMode::MeanOfThree), ticks_csv(b.samples(), VarianceMode::MeanOfThree));
    EXPECT_EQ(containers_csv(a.containers()), containers_csv(b.containers()));
}

TEST(Engine, InvariantsHoldEveryTick) {
    for (const auto* algo : {"first_fit", "round", "performance_first", "job_group", "overload_migrate"}) {
        fixtures::Scenario s;
        s.algorithm = algo;
        s.seed = 2;
        auto sim = s.build();
        std::vector<Tick> last_completion(sim.containers().size(), -1);
        while (!sim.terminated()) {
            sim.run_tick();
            expect_partition(sim);
            for (const auto& c : sim.containers()) {
                if (c.status != ContainerStatus::Completed) continue;
                if (last_completion[c.id] >= 0) EXPECT_EQ(*c.completion_time, last_completion[c.id]);
                last_completion[c.id] = *c.completion_time;
                EXPECT_GE(c.run_at, c.duration);
            }
        }
        for (const auto& c : sim.containers()) EXPECT_EQ(c.status, ContainerStatus::Completed) << algo;
    }
}

TEST(Engine, PermanentFailureDemotesAndRedeploys) {
    const auto topo = parse_topology("switch s\nhost a\nhost b\nlink a s bw=1000 delay=0.1 loss=0\n"
                                     "link b s bw=1000 delay=0.1 loss=0\nfault link b s at=2 for=40\n");
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    const auto a = b.container(j, {600, 1, 1}, 10);
    const auto p = b.container(j, {600, 1, 1}, 200);
    b.comm(a, p, 3, 100);
    Simulation sim(fixtures::options(), two_hosts(), topo, b.s);
    double run_at_before = -1;
    Tick demoted_at = -1;
    while (demoted_at < 0 && sim.now() < 100) {
        run_at_before = sim.containers()[a].run_at;
        sim.run_tick();
        if (sim.containers()[a].status == ContainerStatus::Waiting) demoted_at = sim.now() - 1;
    }
    ASSERT_GE(demoted_at, 0);
    const auto& ca = sim.containers()[a];
    EXPECT_EQ(ca.run_at, run_at_before);
    EXPECT_FALSE(ca.host);
    EXPECT_EQ(ca.paused_at, demoted_at);
    EXPECT_EQ(ca.comm_plan[0].state, CommState::Pending);
    EXPECT_EQ(sim.containers()[p].status, ContainerStatus::Running);
    EXPECT_TRUE(sim.network().flows().empty());
    EXPECT_EQ(sim.permanent_failures(), 1u);
    expect_partition(sim);
    sim.run_tick();
    EXPECT_EQ(sim.containers()[a].status, ContainerStatus::Communicating);
    EXPECT_EQ(sim.containers()[a].run_at, run_at_before);
    sim.run();
    EXPECT_EQ(sim.containers()[a].comm_done, 1u);
    EXPECT_GE(sim.containers()[a].retries_used, 4u);
}

TEST(Engine, AbortListsStuckContainers) {
    fixtures::StreamBuilder b;
    const auto j = b.job(0);
    b.container(j, {100, 1, 1}, 100);
    b.container(j, {100, 1, 1}, 2);
    auto opts = fixtures::options();
    opts.max_ticks = 5;
    Simulation sim(opts, two_hosts(), fixtures::star(2), b.s);
    try {
        sim.run();
        FAIL();
    } catch (const SimulationAborted& e) {
        EXPECT_EQ(e.stuck(), (std::vector<std::size_t>{0}));
        EXPECT_NE(std::string(e.what()).find("max_ticks 5"), std::string::npos);
    }
}

TEST(Engine, HostTopologyMismatch) {
    EXPECT_THROW(Simulation(fixtures::options(), two_hosts(), fixtures::star(3), {}), ValidationError);
    EXPECT_THROW(Simulation(fixtures::options(), {}, fixtures::star(1), {}), ValidationError);
}

TEST(Engine, UnknownCommPartner) {
    fixtures::StreamBuilder b;
    const auto a = b.container(b.job(0), {100, 1, 1}, 10);
    b.comm(a, 7, 1, 1);
    EXPECT_THROW(Simulation(fixtures::options(), two_hosts(), fixtures::star(2), b.s), ValidationError);
}

TEST(Engine, CostCountsBusyTicks) {
    fixtures::StreamBuilder b;
    b.container(b.job(0), {100, 1, 1}, 10);
    auto hosts = two_hosts();
    hosts[0].price = 2.5;
    Simulation sim(fixtures::options(), hosts, fixtures::star(2), b.s);
    EXPECT_DOUBLE_EQ(sim.run().total_cost, 25);
}
