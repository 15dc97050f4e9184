// Tour of the library: sequential use, threads on the live build, and a small
// verification campaign.

#include <cstdio>
#include <thread>
#include <vector>

#include "hmcas/hmcas.hpp"

int main() {
    using namespace hmcas;

    CasObject obj(2, 5);
    std::printf("cas(5, 7) by p1 -> %d\n", obj.cas(1, 5, 7) ? 1 : 0);
    std::printf("cas(5, 9) by p2 -> %d\n", obj.cas(2, 5, 9) ? 1 : 0);
    std::printf("read by p2      -> %llu\n", static_cast<unsigned long long>(obj.read(2)));
    auto v = obj.value_register();
    std::printf("V = (%llu | %llu)\n", static_cast<unsigned long long>(v.hi), static_cast<unsigned long long>(v.lo));

    // Four threads count to 4000 with read-then-cas retries.
    LiveCasObject counter(4, 0);
    {
        std::vector<std::jthread> workers;
        for (ProcessId pid = 1; pid <= 4; ++pid) {
            workers.emplace_back([&counter, pid] {
                for (int done = 0; done < 1000;) {
                    word_t x = counter.read(pid);
                    done += counter.cas(pid, x, x + 1);
                }
            });
        }
    }
    std::printf("live counter    -> %llu\n", static_cast<unsigned long long>(counter.read(1)));

    // Two objects shared by three processes, random schedules.
    CampaignConfig cfg;
    cfg.procs = 3;
    cfg.ops_per_proc = 2;
    cfg.objects = 2;
    cfg.mode = CampaignMode::random;
    cfg.shape = ProgramShape::mixed;
    cfg.count = 2000;
    auto report = run_campaign(cfg);
    std::printf("campaign        -> %zu/%zu accepted\n", report.accepted, report.schedules);
    return report.passed() ? 0 : 1;
}
