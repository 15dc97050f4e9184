#pragma once

// Verification campaigns: generate programs, drive schedules through the
// machine, and judge every trace with both the black-box checker and the
// white-box linearization-point assignment.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hmcas/linearization_points.hpp"
#include "hmcas/lincheck.hpp"
#include "hmcas/machine.hpp"
#include "hmcas/trace_io.hpp"

namespace hmcas {

enum class CampaignMode : std::uint8_t { exhaustive, random };

/// contend: every process cas(x0, b_p) with b_p drawn from the domain minus
/// x0; mixed: random cas/read with operands drawn from the domain.
enum class ProgramShape : std::uint8_t { contend, mixed };

struct CampaignConfig {
    std::size_t procs = 2;
    std::size_t ops_per_proc = 1;
    std::vector<word_t> values{0, 1, 2};
    std::size_t objects = 1;
    CampaignMode mode = CampaignMode::exhaustive;
    ProgramShape shape = ProgramShape::contend;
    std::size_t count = 0;  // random mode
    std::uint64_t seed = 1;
    std::optional<std::size_t> truncate;  // cap every schedule at this many steps
    std::size_t truncated = 0;            // random mode: this many schedules cut at a random point
    Mutation mutation = Mutation::none;
    FieldWidth width{};
    std::size_t budget = default_search_budget;
    std::size_t exhaustive_ceiling = 2'000'000;
    bool check_invariants = true;
    std::size_t jobs = 1;
    std::size_t keep_failures = 16;
    bool record_verdicts = false;  // keep one verdict record per schedule
    std::size_t keep_traces = 0;   // keep the traces of the first schedules, whatever their verdict
};

struct RecordedTrace {
    std::size_t schedule_id = 0;
    bool accepted = false;
    ExecutionTrace trace;
};

/// A schedule that was not accepted, with everything needed to replay it.
struct CampaignFailure {
    std::size_t schedule_id = 0;
    std::string reason;
    std::vector<ProcessProgram> programs;
    Schedule schedule;
    ExecutionTrace trace;
    std::optional<History> counterexample;
};

struct CampaignReport {
    std::size_t schedules = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;  // black-box or white-box rejection, or invariant violation
    std::size_t budget_exceeded = 0;
    std::size_t blackbox_rejections = 0;
    std::size_t whitebox_rejections = 0;
    std::size_t invariant_violations = 0;
    std::size_t disagreements = 0;     // engines disagree on a trace
    std::size_t truncated_schedules = 0;
    std::size_t pending_calls = 0;
    std::size_t winner_checks = 0;     // complete single-round contend schedules
    std::size_t winner_failures = 0;
    std::array<std::size_t, 6> cases{};  // indexed by LinCase
    int max_contended_cas_ops = 0;       // finished cas calls that entered the competition
    int min_contended_cas_ops = 0;       // 0 when there were none
    int max_short_cas_ops = 0;           // finished cas calls that returned at the guards
    int max_read_ops = 0;
    std::size_t register_steps = 0;
    bool partial = false;  // exhaustive enumeration hit the ceiling
    std::vector<CampaignFailure> failures;
    std::vector<std::string> verdict_lines;  // filled only when requested
    std::vector<RecordedTrace> traces;       // first keep_traces schedules

    bool passed() const noexcept {
        return !partial && rejected == 0 && budget_exceeded == 0 && schedules == accepted;
    }

    void merge(CampaignReport&& o, std::size_t keep, std::size_t keep_traces = 0) {
        schedules += o.schedules;
        accepted += o.accepted;
        rejected += o.rejected;
        budget_exceeded += o.budget_exceeded;
        blackbox_rejections += o.blackbox_rejections;
        whitebox_rejections += o.whitebox_rejections;
        invariant_violations += o.invariant_violations;
        disagreements += o.disagreements;
        truncated_schedules += o.truncated_schedules;
        pending_calls += o.pending_calls;
        winner_checks += o.winner_checks;
        winner_failures += o.winner_failures;
        for (std::size_t i = 0; i < cases.size(); ++i) cases[i] += o.cases[i];
        max_contended_cas_ops = std::max(max_contended_cas_ops, o.max_contended_cas_ops);
        if (o.min_contended_cas_ops != 0 &&
            (min_contended_cas_ops == 0 || o.min_contended_cas_ops < min_contended_cas_ops)) {
            min_contended_cas_ops = o.min_contended_cas_ops;
        }
        max_short_cas_ops = std::max(max_short_cas_ops, o.max_short_cas_ops);
        max_read_ops = std::max(max_read_ops, o.max_read_ops);
        register_steps += o.register_steps;
        partial = partial || o.partial;
        for (auto& f : o.failures) {
            if (failures.size() < keep) failures.push_back(std::move(f));
        }
        for (auto& v : o.verdict_lines) verdict_lines.push_back(std::move(v));
        for (auto& t : o.traces) {
            if (traces.size() < keep_traces) traces.push_back(std::move(t));
        }
    }
};

/// Programs for the contend shape. Process p's j-th op targets object
/// (p - 1 + j) mod m, so with m >= n the processes touch disjoint objects.
inline std::vector<ProcessProgram> contend_programs(const CampaignConfig& cfg) {
    if (cfg.values.size() < 2) throw std::invalid_argument("contend programs need at least two domain values");
    std::vector<ProcessProgram> programs;
    const word_t x0 = cfg.values[0];
    for (std::size_t p = 1; p <= cfg.procs; ++p) {
        ProcessProgram prog{p, {}};
        const word_t b = cfg.values[1 + (p - 1) % (cfg.values.size() - 1)];
        for (std::size_t j = 0; j < cfg.ops_per_proc; ++j) {
            prog.ops.push_back(HighOp::cas(x0, b, (p - 1 + j) % cfg.objects));
        }
        programs.push_back(std::move(prog));
    }
    return programs;
}

inline std::vector<ProcessProgram> mixed_programs(const CampaignConfig& cfg, std::mt19937_64& rng) {
    if (cfg.values.empty()) throw std::invalid_argument("empty value domain");
    std::uniform_int_distribution<std::size_t> value(0, cfg.values.size() - 1);
    std::uniform_int_distribution<std::size_t> object(0, cfg.objects - 1);
    std::uniform_int_distribution<int> kind(0, 2);
    std::vector<ProcessProgram> programs;
    for (std::size_t p = 1; p <= cfg.procs; ++p) {
        ProcessProgram prog{p, {}};
        for (std::size_t j = 0; j < cfg.ops_per_proc; ++j) {
            std::size_t k = object(rng);
            if (kind(rng) == 0) {
                prog.ops.push_back(HighOp::read(k));
            } else {
                word_t a = cfg.values[value(rng)];
                word_t b = cfg.values[value(rng)];
                prog.ops.push_back(HighOp::cas(a, b, k));
            }
        }
        programs.push_back(std::move(prog));
    }
    return programs;
}

inline MachineConfig machine_config(const CampaignConfig& cfg) {
    return {std::vector<word_t>(cfg.objects, cfg.values.empty() ? 0 : cfg.values[0]), cfg.width, cfg.mutation};
}

/// Judge one schedule and fold the outcome into `report`.
inline void evaluate_schedule(const CampaignConfig& cfg, std::size_t id, const std::vector<ProcessProgram>& programs,
                              const Schedule& schedule, CampaignReport& report) {
    static const std::vector<InvariantHook> default_hooks = hooks::defaults();
    const MachineConfig mc = machine_config(cfg);
    ++report.schedules;

    std::string reason;
    ExecutionTrace trace;
    bool violated = false;
    try {
        trace = run_schedule(mc, programs, schedule,
                             cfg.check_invariants ? std::span<const InvariantHook>(default_hooks)
                                                  : std::span<const InvariantHook>{});
    } catch (const invariant_violation& v) {
        violated = true;
        trace = v.trace();
        reason = std::string("invariant ") + v.violation().hook + " at step " + std::to_string(v.violation().step);
        ++report.invariant_violations;
    }
    report.register_steps += trace.register_steps.size();
    report.pending_calls += trace.pending.size();
    std::size_t total_ops = 0, responses = 0;
    for (const auto& p : programs) total_ops += p.ops.size();
    for (const Event& e : trace.events) responses += e.kind == EventKind::res;
    const bool complete = responses == total_ops;
    if (!complete && !violated) ++report.truncated_schedules;

    // Register operations per finished call.
    {
        std::vector<std::vector<int>> ops(cfg.procs + 1);
        for (const auto& s : trace.register_steps) {
            auto& v = ops[s.pid];
            if (v.size() <= s.call) v.resize(s.call + 1, 0);
            ++v[s.call];
        }
        std::vector<std::size_t> ordinal(cfg.procs + 1, 0);
        for (const Event& e : trace.events) {
            if (e.kind == EventKind::inv) {
                ++ordinal[e.pid];
                continue;
            }
            int n = ops[e.pid][ordinal[e.pid] - 1];
            if (e.op.kind == OpKind::read) {
                report.max_read_ops = std::max(report.max_read_ops, n);
            } else if (n == 1) {
                report.max_short_cas_ops = std::max(report.max_short_cas_ops, n);
            } else {
                report.max_contended_cas_ops = std::max(report.max_contended_cas_ops, n);
                if (report.min_contended_cas_ops == 0 || n < report.min_contended_cas_ops) {
                    report.min_contended_cas_ops = n;
                }
            }
        }
    }

    // Black box, per object.
    LinearizationVerdict black = check_each_object(trace.events, trace.initial_values, cfg.budget);
    bool black_ok = black.accepted();
    if (black.kind == VerdictKind::rejected) {
        ++report.blackbox_rejections;
        if (reason.empty()) reason = "black-box checker rejected the history";
    }

    // White box, per object.
    bool white_ok = true;
    std::array<std::size_t, 6> cases{};
    for (std::size_t k = 0; k < cfg.objects; ++k) {
        try {
            auto assignment = linearize_by_definition(trace, k);
            auto h = assignment.histogram();
            for (std::size_t i = 0; i < cases.size(); ++i) cases[i] += h[i];
            auto verdict = validate_assignment(trace, assignment);
            if (!verdict.valid) {
                white_ok = false;
                if (reason.empty()) reason = "linearization points invalid: " + verdict.failures.front();
            }
        } catch (const classification_failure& ex) {
            white_ok = false;
            if (reason.empty()) reason = std::string("classification failed: ") + ex.what();
        }
    }
    if (!white_ok) ++report.whitebox_rejections;
    for (std::size_t i = 0; i < cases.size(); ++i) report.cases[i] += cases[i];
    if (black.kind != VerdictKind::budget_exceeded && black_ok != white_ok) ++report.disagreements;

    // Single-round contention on one object: exactly one winner, whose value sticks.
    if (cfg.shape == ProgramShape::contend && cfg.ops_per_proc == 1 && cfg.objects == 1 && complete &&
        !violated) {
        ++report.winner_checks;
        std::size_t winners = 0;
        word_t winner_b = 0;
        for (const Event& e : trace.events) {
            if (e.kind == EventKind::res && e.op.kind == OpKind::cas && e.ret == 1) {
                ++winners;
                winner_b = e.op.b;
            }
        }
        if (winners != 1 || trace.final_register({RegKind::V, 0}).lo != winner_b) {
            ++report.winner_failures;
            if (reason.empty()) reason = "expected exactly one winner whose value is installed";
        }
    }

    const bool ok = !violated && black_ok && white_ok && reason.empty();
    if (ok) {
        ++report.accepted;
    } else if (black.kind == VerdictKind::budget_exceeded && !violated && white_ok && reason.empty()) {
        ++report.budget_exceeded;
    } else {
        ++report.rejected;
        if (report.failures.size() < cfg.keep_failures) {
            report.failures.push_back({id, reason, programs, schedule, trace, black.counterexample});
        }
    }
    if (cfg.record_verdicts) report.verdict_lines.push_back(verdict_record(id, ok, cases, black.counterexample));
    if (id < cfg.keep_traces) report.traces.push_back({id, ok, std::move(trace)});
}

namespace detail {

template <class Work>
CampaignReport run_parallel(std::size_t total, std::size_t jobs, std::size_t keep, std::size_t keep_traces,
                            Work&& work) {
    jobs = std::max<std::size_t>(1, std::min(jobs, total == 0 ? 1 : total));
    std::vector<CampaignReport> parts(jobs);
    // Contiguous slices, merged in order, keep per-schedule output sorted by id.
    auto slice = [&](std::size_t j) {
        const std::size_t lo = total * j / jobs, hi = total * (j + 1) / jobs;
        for (std::size_t i = lo; i < hi; ++i) work(i, parts[j]);
    };
    if (jobs == 1) {
        slice(0);
    } else {
        std::vector<std::exception_ptr> errors(jobs);
        {
            std::vector<std::jthread> workers;
            for (std::size_t j = 0; j < jobs; ++j) {
                workers.emplace_back([&, j] {
                    try {
                        slice(j);
                    } catch (...) {
                        errors[j] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    CampaignReport report;
    for (auto& p : parts) report.merge(std::move(p), keep, keep_traces);
    return report;
}

}  // namespace detail

inline CampaignReport run_campaign(const CampaignConfig& cfg) {
    if (cfg.procs == 0) throw std::invalid_argument("procs must be at least 1");
    if (cfg.objects == 0) throw std::invalid_argument("objects must be at least 1");

    if (cfg.mode == CampaignMode::exhaustive) {
        if (cfg.shape != ProgramShape::contend) {
            throw std::invalid_argument("exhaustive mode needs fixed programs (contend shape)");
        }
        const auto programs = contend_programs(cfg);
        std::vector<Schedule> schedules;
        std::size_t max_steps = cfg.truncate.value_or(std::size_t(-1));
        auto enumerated = enumerate_schedules(machine_config(cfg), programs, max_steps, cfg.exhaustive_ceiling,
                                              [&](Schedule s) { schedules.push_back(std::move(s)); });
        if (enumerated.partial) {
            CampaignReport refused;
            refused.partial = true;
            return refused;
        }
        return detail::run_parallel(schedules.size(), cfg.jobs, cfg.keep_failures, cfg.keep_traces,
                                    [&](std::size_t i, CampaignReport& part) {
                                        evaluate_schedule(cfg, i, programs, schedules[i], part);
                                    });
    }

    const std::size_t count = cfg.count;
    return detail::run_parallel(count, cfg.jobs, cfg.keep_failures, cfg.keep_traces, [&](std::size_t i, CampaignReport& part) {
        std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(i)};
        std::mt19937_64 rng(seq);
        auto programs = cfg.shape == ProgramShape::contend ? contend_programs(cfg) : mixed_programs(cfg, rng);
        const MachineConfig mc = machine_config(cfg);
        // Spread the truncated schedules evenly over the index range.
        const bool cut_here = count > 0 && (i * cfg.truncated) / count != ((i + 1) * cfg.truncated) / count;
        Schedule s = RandomScheduleStream::draw(mc, programs, rng, cfg.truncate);
        if (cut_here && s.steps.size() > 1) {
            std::uniform_int_distribution<std::size_t> cut(1, s.steps.size() - 1);
            s.steps.resize(cut(rng));
        }
        evaluate_schedule(cfg, i, programs, s, part);
    });
}

}  // namespace hmcas
