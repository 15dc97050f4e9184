#include <vector>

#include <gtest/gtest.h>

#include "hmcas/campaign.hpp"

using namespace hmcas;

namespace {

// Three processes on V = (0 | 0): p1 cas(0, 1), p2 cas(0, 2), p3 cas(1, 3).
// p1 and p2 compete in round 2 and p1 wins. p2 installs p1's value, then
// stalls before informing p1. p3 sees the new value, wins round 4, and p1
// (reading P after that) installs p3's value and reads its own result slot
// before p2 has informed it.
const std::vector<ProcessProgram> stale_inform_programs{
    {1, {HighOp::cas(0, 1)}}, {2, {HighOp::cas(0, 2)}}, {3, {HighOp::cas(1, 3)}}};

Schedule stale_inform_schedule() {
    std::vector<ProcessId> s;
    auto run = [&](ProcessId p, int n) { s.insert(s.end(), n, p); };
    run(1, 5);  // read V .. close round 2
    run(2, 8);  // read V .. the first of its two final writes
    run(3, 5);  // read V .. close round 4
    run(1, 5);  // read P .. return
    run(2, 2);
    run(3, 5);
    return {s};
}

TEST(Mutation, SwappedFinalWritesLoseAWinnersResult) {
    MachineConfig bad{{0}, {}, Mutation::swap_inform_install};
    auto t = run_schedule(bad, stale_inform_programs, stale_inform_schedule(), hooks::defaults());
    ASSERT_TRUE(t.pending.empty());
    auto verdict = check_linearizable(t.events, 0);
    EXPECT_EQ(verdict.kind, VerdictKind::rejected);
    ASSERT_TRUE(verdict.counterexample.has_value());
    EXPECT_FALSE(validate_assignment(t, linearize_by_definition(t)).valid);

    MachineConfig good{{0}};
    auto ok = run_schedule(good, stale_inform_programs, stale_inform_schedule(), hooks::defaults());
    EXPECT_TRUE(check_linearizable(ok.events, 0).accepted());
    EXPECT_TRUE(validate_assignment(ok, linearize_by_definition(ok)).valid);
}

TEST(Mutation, OddCloseIsCaughtByTwoProcessExhaustiveRun) {
    CampaignConfig cfg;
    cfg.mutation = Mutation::odd_close;
    auto r = run_campaign(cfg);
    EXPECT_GT(r.rejected, 0u);
    EXPECT_GT(r.blackbox_rejections, 0u);
    EXPECT_GT(r.whitebox_rejections, 0u);
    ASSERT_FALSE(r.failures.empty());
    EXPECT_TRUE(r.failures.front().counterexample.has_value());
}

TEST(Mutation, RemainingBugsAreCaughtByMixedRandomCampaign) {
    for (Mutation m : {Mutation::plain_install, Mutation::no_parity_check, Mutation::no_count_check}) {
        CampaignConfig cfg;
        cfg.procs = 3;
        cfg.ops_per_proc = 3;
        cfg.mode = CampaignMode::random;
        cfg.shape = ProgramShape::mixed;
        cfg.count = 100000;
        cfg.seed = 7;
        cfg.mutation = m;
        auto r = run_campaign(cfg);
        EXPECT_GT(r.rejected, 0u) << to_string(m);
    }
}

TEST(Mutation, CorrectBuildPassesTheSameMixedCampaign) {
    CampaignConfig cfg;
    cfg.procs = 3;
    cfg.ops_per_proc = 3;
    cfg.mode = CampaignMode::random;
    cfg.shape = ProgramShape::mixed;
    cfg.count = 20000;
    cfg.seed = 7;
    auto r = run_campaign(cfg);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.disagreements, 0u);
}

}  // namespace
