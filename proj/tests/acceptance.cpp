// Acceptance run. Prints one PASS/FAIL line per criterion, followed by the
// measured figures, and exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "hmcas/hmcas.hpp"

using namespace hmcas;

namespace {

int failures = 0;

void verdict(int id, const char* title, bool ok, const std::string& detail) {
    std::printf("%s C%d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

template <class F>
auto timed(F&& f, double& seconds) {
    auto start = std::chrono::steady_clock::now();
    auto out = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

CampaignConfig exhaustive_two_procs() {
    CampaignConfig cfg;
    cfg.procs = 2;
    cfg.ops_per_proc = 1;
    cfg.values = {0, 1, 2};
    cfg.mode = CampaignMode::exhaustive;
    cfg.shape = ProgramShape::contend;
    return cfg;
}

CampaignConfig random_three_procs() {
    CampaignConfig cfg;
    cfg.procs = 3;
    cfg.ops_per_proc = 3;
    cfg.values = {0, 1, 2};
    cfg.mode = CampaignMode::random;
    cfg.shape = ProgramShape::mixed;
    cfg.count = 100000;
    cfg.truncated = 10000;
    cfg.seed = 20240601;
    return cfg;
}

}  // namespace

int main() {
    double t1 = 0, t2 = 0;
    const CampaignReport r1 = timed([] { return run_campaign(exhaustive_two_procs()); }, t1);
    verdict(1, "exhaustive linearizability (2 procs, 1 contended cas each)",
            r1.passed() && !r1.partial && r1.blackbox_rejections == 0 && r1.whitebox_rejections == 0 &&
                r1.invariant_violations == 0 && r1.disagreements == 0 && r1.schedules <= 184756 && t1 < 120,
            fmt("%zu schedules, %zu accepted by both engines, black-box rejections %zu, white-box rejections %zu, "
                "invariant violations %zu, %.1f s",
                r1.schedules, r1.accepted, r1.blackbox_rejections, r1.whitebox_rejections, r1.invariant_violations,
                t1));

    const CampaignReport r2 = timed([] { return run_campaign(random_three_procs()); }, t2);
    verdict(2, "randomized campaign (3 procs x 3 ops, 100000 schedules, 10000 truncated)",
            r2.passed() && r2.schedules == 100000 && r2.truncated_schedules == 10000 && r2.pending_calls > 0 &&
                r2.invariant_violations == 0 && r2.disagreements == 0,
            fmt("%zu schedules, %zu accepted, %zu rejected, %zu truncated with %zu pending calls, "
                "invariant violations %zu, %.1f s",
                r2.schedules, r2.accepted, r2.rejected, r2.truncated_schedules, r2.pending_calls,
                r2.invariant_violations, t2));

    {
        const int cmax = std::max(r1.max_contended_cas_ops, r2.max_contended_cas_ops);
        const int cmin = std::min(r1.min_contended_cas_ops, r2.min_contended_cas_ops);
        const int smax = std::max(r1.max_short_cas_ops, r2.max_short_cas_ops);
        const int rmax = std::max(r1.max_read_ops, r2.max_read_ops);
        // Contended calls that see another round in P skip the two final writes (8 ops).
        verdict(3, "wait-freedom bound", cmax == 10 && smax == 1 && rmax == 1,
                fmt("max register ops: contended cas %d (range %d..%d), guard-path cas %d, read %d", cmax, cmin, cmax,
                    smax, rmax));
    }

    verdict(4, "version invariants (V.seq even, grows by exactly 2)",
            r1.invariant_violations == 0 && r2.invariant_violations == 0 && r1.register_steps > 0 &&
                r2.register_steps > 0,
            fmt("%zu register steps checked, %zu violations", r1.register_steps + r2.register_steps,
                r1.invariant_violations + r2.invariant_violations));

    verdict(5, "exactly one winner whose value is installed",
            r1.winner_checks == r1.schedules && r1.winner_failures == 0 && r1.schedules > 0,
            fmt("%zu complete schedules checked, %zu failed", r1.winner_checks, r1.winner_failures));

    {
        std::size_t killed = 0;
        std::string detail;
        for (Mutation m : all_mutations) {
            CampaignConfig cfg = exhaustive_two_procs();
            cfg.mutation = m;
            cfg.keep_failures = 1;
            CampaignReport r = run_campaign(cfg);
            killed += r.rejected > 0;
            detail += fmt("%s %zu/%zu rejected; ", to_string(m), r.rejected, r.schedules);
        }
        verdict(6, "seeded bugs caught by the exhaustive 2-process campaign", killed == std::size(all_mutations),
                fmt("%zu/%zu killed: ", killed, std::size(all_mutations)) + detail);
    }

    {
        std::vector<word_t> zeros(4, 0);
        const std::size_t regs = MultiCas(3, zeros).register_count();
        const std::size_t words = MultiCas(3, zeros).memory().words().size();

        CampaignConfig disjoint = exhaustive_two_procs();
        disjoint.objects = 2;
        CampaignReport rd = run_campaign(disjoint);
        const std::size_t winners = rd.cases[static_cast<std::size_t>(LinCase::case3a)];

        CampaignConfig shared = random_three_procs();
        shared.objects = 2;
        shared.count = 20000;
        shared.truncated = 2000;
        CampaignReport rs = run_campaign(shared);

        verdict(7, "multi-object space bound and non-interference",
                regs == 14 && words == 14 && rd.passed() && winners == 2 * rd.schedules && rs.passed(),
                fmt("n=3, m=4: %zu registers; exhaustive 2 procs x 2 objects: %zu/%zu accepted, %zu winning calls; "
                    "random 3 procs over 2 objects: %zu/%zu accepted",
                    regs, rd.accepted, rd.schedules, winners, rs.accepted, rs.schedules));
    }

    {
        std::mt19937_64 rng(99);
        CasObject obj(1, 0);
        word_t cell = 0;
        std::size_t mismatches = 0;
        for (int i = 0; i < 10000; ++i) {
            if (rng() % 4 == 0) {
                mismatches += obj.read(1) != cell;
            } else {
                word_t a = rng() % 4, b = rng() % 4;
                const bool expect = cell == a;
                if (expect) cell = b;
                mismatches += obj.cas(1, a, b) != expect;
            }
        }
        const bool final_ok = obj.read(1) == cell;
        verdict(8, "sequential equivalence with a reference cell (10^4 ops)", mismatches == 0 && final_ok,
                fmt("%zu mismatched returns, final value %s", mismatches, final_ok ? "equal" : "differs"));
    }

    {
        BenchReport b = run_bench(1, 10000, Contention::high);
        verdict(9, "bench smoke (single thread)",
                b.max_contended_register_ops == 10 && b.simulated.cas_calls == 10000 && b.native.cas_calls == 10000,
                fmt("contended cas %d register ops, guard-fail %d, read %d; native %.0f ops/s, registers %.0f ops/s",
                    b.max_contended_register_ops, b.guard_fail_register_ops, b.read_register_ops,
                    b.native.ops_per_sec, b.simulated.ops_per_sec));
    }

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
