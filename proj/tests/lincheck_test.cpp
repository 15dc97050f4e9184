#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hmcas/campaign.hpp"
#include "hmcas/linearization_points.hpp"
#include "hmcas/lincheck.hpp"

using namespace hmcas;

namespace {

Event inv(ProcessId p, HighOp op, std::size_t step) { return {EventKind::inv, p, op, 0, step}; }
Event res(ProcessId p, HighOp op, word_t ret, std::size_t step) { return {EventKind::res, p, op, ret, step}; }

// Reference checker: try every subset of pending calls and every order of
// the chosen calls; accept if one respects real time and replays.
bool brute_force_linearizable(const History& h, word_t initial) {
    auto calls = calls_of(h);
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (calls[i].pending()) pending.push_back(i);
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << pending.size()); ++mask) {
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < calls.size(); ++i) {
            auto it = std::ranges::find(pending, i);
            if (it == pending.end() || (mask >> (it - pending.begin())) & 1) chosen.push_back(i);
        }
        std::ranges::sort(chosen);
        do {
            bool ok = true;
            for (std::size_t x = 0; x < chosen.size() && ok; ++x) {
                for (std::size_t y = x + 1; y < chosen.size() && ok; ++y) {
                    const Call& later = calls[chosen[x]];
                    const Call& earlier = calls[chosen[y]];
                    if (earlier.res_step && *earlier.res_step < later.inv_step) ok = false;
                }
            }
            word_t state = initial;
            for (std::size_t k = 0; k < chosen.size() && ok; ++k) {
                const Call& c = calls[chosen[k]];
                auto [next, ret] = spec_apply(state, c.op);
                if (c.ret && *c.ret != ret) ok = false;
                state = next;
            }
            if (ok) return true;
        } while (std::ranges::next_permutation(chosen).found);
    }
    return false;
}

// Replays an accepted witness and checks it against the history.
void expect_witness_valid(const History& h, word_t initial, const LinearizationVerdict& v) {
    auto calls = calls_of(h);
    word_t state = initial;
    for (std::size_t k = 0; k < v.witness.size(); ++k) {
        const Call& c = calls.at(v.witness[k]);
        auto [next, ret] = spec_apply(state, c.op);
        if (c.ret) {
            EXPECT_EQ(*c.ret, ret);
        }
        state = next;
        for (std::size_t j = k + 1; j < v.witness.size(); ++j) {
            const Call& d = calls[v.witness[j]];
            EXPECT_FALSE(d.res_step && *d.res_step < c.inv_step) << "witness breaks real-time order";
        }
    }
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (!calls[i].pending()) {
            EXPECT_NE(std::ranges::find(v.witness, i), v.witness.end());
        }
    }
}

History random_history(std::mt19937_64& rng, std::size_t max_calls) {
    History h;
    std::map<ProcessId, HighOp> open;
    std::size_t started = 0, step = 0;
    const std::size_t target = 1 + rng() % max_calls;
    while (started < target || !open.empty()) {
        ProcessId p = 1 + rng() % 3;
        if (auto it = open.find(p); it != open.end()) {
            if (started >= target && rng() % 4 == 0) break;  // leave the rest pending
            word_t ret = it->second.kind == OpKind::read ? rng() % 3 : rng() % 2;
            h.push_back(res(p, it->second, ret, step++));
            open.erase(it);
        } else if (started < target) {
            HighOp op = rng() % 3 == 0 ? HighOp::read() : HighOp::cas(rng() % 3, rng() % 3);
            h.push_back(inv(p, op, step++));
            open[p] = op;
            ++started;
        }
    }
    return h;
}

TEST(SpecApply, Definitional) {
    EXPECT_EQ(spec_apply(5, HighOp::cas(5, 7)), (std::pair<word_t, word_t>{7, 1}));
    EXPECT_EQ(spec_apply(5, HighOp::cas(4, 7)), (std::pair<word_t, word_t>{5, 0}));
    EXPECT_EQ(spec_apply(5, HighOp::read()), (std::pair<word_t, word_t>{5, 5}));
}

TEST(CheckLinearizable, SingleCasAccepted) {
    History h{inv(1, HighOp::cas(5, 7), 0), res(1, HighOp::cas(5, 7), 1, 1)};
    auto v = check_linearizable(h, 5);
    EXPECT_EQ(v.kind, VerdictKind::accepted);
    EXPECT_EQ(v.witness, std::vector<std::size_t>{0});
}

TEST(CheckLinearizable, TwoSequentialWinnersRejected) {
    History h{inv(1, HighOp::cas(0, 1), 0), res(1, HighOp::cas(0, 1), 1, 1), inv(2, HighOp::cas(0, 2), 2),
              res(2, HighOp::cas(0, 2), 1, 3)};
    auto v = check_linearizable(h, 0);
    EXPECT_EQ(v.kind, VerdictKind::rejected);
    ASSERT_TRUE(v.counterexample.has_value());
    EXPECT_EQ(v.counterexample->size(), 4u);
    EXPECT_FALSE(brute_force_linearizable(h, 0));
}

TEST(CheckLinearizable, OverlappingChainAcceptedInDependencyOrder) {
    History h{inv(1, HighOp::cas(0, 1), 0), inv(2, HighOp::cas(1, 2), 1), res(2, HighOp::cas(1, 2), 1, 2),
              res(1, HighOp::cas(0, 1), 1, 3)};
    auto v = check_linearizable(h, 0);
    ASSERT_EQ(v.kind, VerdictKind::accepted);
    // calls_of lists calls by invocation: 0 = cas(0,1), 1 = cas(1,2).
    EXPECT_EQ(v.witness, (std::vector<std::size_t>{0, 1}));
}

TEST(CheckLinearizable, PendingCallMayTakeEffectOrNot) {
    // A pending cas(0, 1) explains a later read of 1, and its absence is fine too.
    History took{inv(1, HighOp::cas(0, 1), 0), inv(2, HighOp::read(), 1), res(2, HighOp::read(), 1, 2)};
    History skipped{inv(1, HighOp::cas(0, 1), 0), inv(2, HighOp::read(), 1), res(2, HighOp::read(), 0, 2)};
    EXPECT_TRUE(check_linearizable(took, 0).accepted());
    EXPECT_TRUE(check_linearizable(skipped, 0).accepted());
    History impossible{inv(1, HighOp::cas(0, 1), 0), inv(2, HighOp::read(), 1), res(2, HighOp::read(), 2, 2)};
    EXPECT_EQ(check_linearizable(impossible, 0).kind, VerdictKind::rejected);
}

TEST(CheckLinearizable, EmptyHistoryAccepted) { EXPECT_TRUE(check_linearizable(History{}, 3).accepted()); }

TEST(CheckLinearizable, MalformedHistoryThrows) {
    History twice{inv(1, HighOp::read(), 0), inv(1, HighOp::read(), 1)};
    EXPECT_THROW(check_linearizable(twice, 0), malformed_history);
    History orphan{res(1, HighOp::read(), 0, 0)};
    EXPECT_THROW(check_linearizable(orphan, 0), malformed_history);
    History backwards{inv(1, HighOp::read(), 4), res(1, HighOp::read(), 0, 2)};
    EXPECT_THROW(check_linearizable(backwards, 0), malformed_history);
}

TEST(CheckLinearizable, BudgetExceededIsNotARejection) {
    // Many overlapping reads of an unreachable value: rejected given enough
    // budget, budget_exceeded with a tiny one.
    History h;
    std::size_t step = 0;
    for (ProcessId p = 1; p <= 8; ++p) h.push_back(inv(p, HighOp::cas(p % 2, 1 - p % 2), step++));
    h.push_back(inv(9, HighOp::read(), step++));
    h.push_back(res(9, HighOp::read(), 7, step++));
    for (ProcessId p = 1; p <= 8; ++p) h.push_back(res(p, HighOp::cas(p % 2, 1 - p % 2), 1, step++));
    EXPECT_EQ(check_linearizable(h, 0, 5).kind, VerdictKind::budget_exceeded);
    EXPECT_EQ(check_linearizable(h, 0).kind, VerdictKind::rejected);
}

TEST(CheckLinearizable, GenericSpecConcept) {
    // A register whose cas always fails: only reads of the initial value fit.
    struct Stuck {
        word_t v = 0;
        std::pair<Stuck, word_t> apply(const HighOp& op) const { return {*this, op.kind == OpKind::read ? v : 0}; }
        std::size_t hash() const noexcept { return v; }
        bool operator==(const Stuck&) const = default;
    };
    History h{inv(1, HighOp::cas(0, 1), 0), res(1, HighOp::cas(0, 1), 1, 1)};
    EXPECT_EQ(check_linearizable(h, Stuck{0}).kind, VerdictKind::rejected);
    EXPECT_EQ(check_linearizable(h, SequentialCasSpec{0}).kind, VerdictKind::accepted);
}

TEST(CheckLinearizable, AgreesWithBruteForceOnSmallHistories) {
    std::mt19937_64 rng(123);
    std::size_t accepted = 0, rejected = 0;
    for (int i = 0; i < 4000; ++i) {
        History h = random_history(rng, 6);
        word_t initial = rng() % 3;
        bool expected = brute_force_linearizable(h, initial);
        auto v = check_linearizable(h, initial);
        ASSERT_EQ(v.accepted(), expected) << "history " << i;
        if (v.accepted()) {
            ++accepted;
            expect_witness_valid(h, initial, v);
        } else {
            ++rejected;
            ASSERT_TRUE(v.counterexample.has_value());
            EXPECT_FALSE(brute_force_linearizable(*v.counterexample, initial));
            if (v.counterexample->size() > 1) {
                History shorter(v.counterexample->begin(), v.counterexample->end() - 1);
                EXPECT_TRUE(brute_force_linearizable(shorter, initial));
            }
        }
    }
    EXPECT_GT(accepted, 200u);
    EXPECT_GT(rejected, 200u);
}

TEST(CheckLinearizable, AgreesWithBruteForceOnMachineHistories) {
    CampaignConfig cfg;
    cfg.procs = 3;
    cfg.ops_per_proc = 2;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto programs = mixed_programs(cfg, rng);
        auto s = RandomScheduleStream::draw(machine_config(cfg), programs, rng);
        auto t = run_schedule(machine_config(cfg), programs, s);
        ASSERT_TRUE(brute_force_linearizable(t.events, 0));
        auto v = check_linearizable(t.events, 0);
        ASSERT_TRUE(v.accepted());
        expect_witness_valid(t.events, 0, v);
    }
}

TEST(CheckEachObject, ObjectsAreCheckedIndependently) {
    History h{inv(1, HighOp::cas(0, 1, 0), 0), res(1, HighOp::cas(0, 1, 0), 1, 1), inv(2, HighOp::cas(0, 1, 1), 2),
              res(2, HighOp::cas(0, 1, 1), 1, 3)};
    std::vector<word_t> two{0, 0};
    EXPECT_TRUE(check_each_object(h, two).accepted());
    EXPECT_EQ(check_linearizable(h, 0).kind, VerdictKind::rejected);
}

ExecutionTrace solo(HighOp op, word_t initial, std::size_t steps = 10) {
    MachineConfig cfg{{initial}};
    std::vector<ProcessProgram> programs{{1, {op}}};
    return run_schedule(cfg, programs, Schedule{std::vector<ProcessId>(steps, 1)});
}

TEST(LinearizationPoints, SoloSuccessIsCase3aAtItsInstall) {
    auto t = solo(HighOp::cas(5, 7), 5);
    auto a = linearize_by_definition(t);
    ASSERT_EQ(a.calls.size(), 1u);
    const auto& c = a.calls[0];
    EXPECT_EQ(c.tag, LinCase::case3a);
    EXPECT_EQ(t.register_steps[8].site, CallSite::install_value);
    EXPECT_EQ(c.point, 8u);
    EXPECT_EQ(c.identifying_write, std::optional<std::size_t>{8});
    EXPECT_TRUE(validate_assignment(t, a).valid);
}

TEST(LinearizationPoints, GuardCases) {
    auto miss = linearize_by_definition(solo(HighOp::cas(4, 7), 5, 1));
    EXPECT_EQ(miss.calls[0].tag, LinCase::case1);
    EXPECT_EQ(miss.calls[0].point, 0u);
    auto same = linearize_by_definition(solo(HighOp::cas(5, 5), 5, 1));
    EXPECT_EQ(same.calls[0].tag, LinCase::case2);
    EXPECT_EQ(same.calls[0].point, 0u);
}

TEST(LinearizationPoints, CallCutBeforeCompetingIsCase4) {
    auto t = solo(HighOp::cas(5, 7), 5, 3);  // read V, announce, reset result
    ASSERT_EQ(t.pending, std::vector<ProcessId>{1});
    auto a = linearize_by_definition(t);
    EXPECT_EQ(a.calls[0].tag, LinCase::case4);
    EXPECT_EQ(a.calls[0].point, end_of_execution);
    EXPECT_TRUE(validate_assignment(t, a).valid);
}

TEST(LinearizationPoints, ReadsSitAtTheirRead) {
    MachineConfig cfg{{3}};
    std::vector<ProcessProgram> programs{{1, {HighOp::read(), HighOp::read()}}, {2, {HighOp::read()}}};
    auto t = run_schedule(cfg, programs, Schedule{{2, 1, 1}});
    auto a = linearize_by_definition(t);
    ASSERT_EQ(a.calls.size(), 3u);
    for (const auto& c : a.calls) {
        EXPECT_EQ(c.tag, LinCase::read);
        EXPECT_EQ(c.point, c.start);
    }
    EXPECT_TRUE(validate_assignment(t, a).valid);
}

TEST(LinearizationPoints, CorruptedReturnValuesFail) {
    MachineConfig cfg;
    std::vector<ProcessProgram> programs{{1, {HighOp::cas(0, 1)}}, {2, {HighOp::cas(0, 2)}}};
    auto t = run_schedule(cfg, programs, Schedule{std::vector<ProcessId>{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2}});
    ASSERT_TRUE(validate_assignment(t, linearize_by_definition(t)).valid);
    std::vector<Event*> responses;
    for (Event& e : t.events) {
        if (e.kind == EventKind::res) responses.push_back(&e);
    }
    ASSERT_EQ(responses.size(), 2u);
    ASSERT_NE(responses[0]->ret, responses[1]->ret);
    std::swap(responses[0]->ret, responses[1]->ret);
    auto verdict = validate_assignment(t, linearize_by_definition(t));
    EXPECT_FALSE(verdict.valid);
    EXPECT_FALSE(verdict.failures.empty());
    EXPECT_EQ(check_linearizable(t.events, 0).kind, VerdictKind::rejected);
}

TEST(LinearizationPoints, ExhaustiveTwoProcessTracesValidateAndAgree) {
    CampaignConfig cfg;
    auto r = run_campaign(cfg);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.whitebox_rejections, 0u);
    EXPECT_EQ(r.blackbox_rejections, 0u);
    EXPECT_EQ(r.disagreements, 0u);
    EXPECT_EQ(r.cases[static_cast<std::size_t>(LinCase::case4)], 0u);
}

TEST(LinearizationPoints, OneCase3aPerInstalledVersion) {
    CampaignConfig cfg;
    cfg.procs = 3;
    cfg.ops_per_proc = 3;
    std::mt19937_64 rng(31);
    for (int i = 0; i < 2000; ++i) {
        auto programs = mixed_programs(cfg, rng);
        auto t = run_schedule(machine_config(cfg), programs, RandomScheduleStream::draw(machine_config(cfg), programs, rng));
        auto a = linearize_by_definition(t);
        ASSERT_TRUE(validate_assignment(t, a).valid);
        const word_t final_seq = t.final_register({RegKind::V, 0}).hi;
        std::map<word_t, int> winners;
        for (const auto& c : a.calls) {
            switch (c.tag) {
            case LinCase::case3a:
                ++winners[c.start_seq + 2];
                EXPECT_EQ(c.ret, std::optional<word_t>{1});
                break;
            case LinCase::case3b:
            case LinCase::case1: EXPECT_EQ(c.ret, std::optional<word_t>{0}); break;
            case LinCase::case2: EXPECT_EQ(c.ret, std::optional<word_t>{1}); break;
            default: break;
            }
        }
        for (word_t v = 2; v <= final_seq; v += 2) ASSERT_EQ(winners[v], 1) << "version " << v;
        ASSERT_EQ(winners.size(), final_seq / 2);
    }
}

}  // namespace
