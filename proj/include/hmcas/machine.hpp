#pragma once

// Deterministic simulated shared-memory machine. One schedule entry executes
// exactly one register operation of the named process's current call; local
// computation is folded into the adjacent register step. Entries naming a
// process whose program is exhausted are skipped.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmcas/cas_object.hpp"
#include "hmcas/history.hpp"

namespace hmcas {

struct Schedule {
    std::vector<ProcessId> steps;
    friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct ProcessProgram {
    ProcessId pid = 1;
    std::vector<HighOp> ops;
};

struct MachineConfig {
    std::vector<word_t> initial_values{0};  // one per object
    FieldWidth width{};
    Mutation mutation = Mutation::none;
};

/// One executed register operation. `call` is the ordinal of the call within
/// its process's program; `observed` is the value read, or the register's
/// post-state for the other primitives.
struct RegisterStep {
    std::size_t step = 0;
    ProcessId pid = 1;
    std::size_t call = 0;
    RegisterRef reg;
    Primitive prim = Primitive::read;
    word_t x = 0;
    word_t y = 0;
    RegisterWord observed;
    CallSite site = CallSite::read_value;

    friend bool operator==(const RegisterStep&, const RegisterStep&) = default;
};

struct ExecutionTrace {
    std::size_t processes = 0;
    std::vector<word_t> initial_values;
    FieldWidth width{};
    std::vector<RegisterStep> register_steps;
    History events;
    std::vector<RegisterWord> final_state;  // indexed by CasLayout::slot
    std::vector<ProcessId> pending;         // pids with an unfinished call

    CasLayout layout() const { return CasLayout(processes, initial_values.size(), width); }
    RegisterWord final_register(RegisterRef r) const { return final_state.at(layout().slot(r)); }

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

/// What an invariant hook sees after each step.
struct StepView {
    const CasLayout& layout;
    std::span<const RegisterWord> before;
    std::span<const RegisterWord> after;
    const RegisterStep& step;
    OpKind call_kind;
    int call_register_ops;  // operations issued so far by the stepping call
};

struct InvariantHook {
    std::string name;
    std::function<bool(const StepView&)> holds;
};

struct Violation {
    std::string hook;
    std::size_t step = 0;
    std::vector<RegisterWord> snapshot;
};

class invariant_violation : public std::runtime_error {
public:
    invariant_violation(Violation v, ExecutionTrace partial)
        : std::runtime_error("invariant '" + v.hook + "' violated at step " + std::to_string(v.step)),
          violation_(std::move(v)),
          trace_(std::move(partial)) {}

    const Violation& violation() const noexcept { return violation_; }
    const ExecutionTrace& trace() const noexcept { return trace_; }

private:
    Violation violation_;
    ExecutionTrace trace_;
};

namespace hooks {

inline InvariantHook v_seq_even() {
    return {"v_seq_even", [](const StepView& s) {
                for (std::size_t k = 0; k < s.layout.objects(); ++k) {
                    if (s.after[s.layout.slot({RegKind::V, k})].hi % 2 != 0) return false;
                }
                return true;
            }};
}

inline InvariantHook v_seq_grows_by_two() {
    return {"v_seq_grows_by_two", [](const StepView& s) {
                for (std::size_t k = 0; k < s.layout.objects(); ++k) {
                    auto slot = s.layout.slot({RegKind::V, k});
                    word_t from = s.before[slot].hi, to = s.after[slot].hi;
                    if (to != from && to != from + 2) return false;
                }
                return true;
            }};
}

// P.seq and V.seq never decrease.
inline InvariantHook seq_monotone() {
    return {"seq_monotone", [](const StepView& s) {
                for (std::size_t k = 0; k < s.layout.objects(); ++k) {
                    for (RegKind kind : {RegKind::V, RegKind::P}) {
                        auto slot = s.layout.slot({kind, k});
                        if (s.after[slot].hi < s.before[slot].hi) return false;
                    }
                }
                return true;
            }};
}

// A[i].c and R[i].c never decrease; for a fixed R[i].c, ret never goes true -> false.
inline InvariantHook counters_monotone() {
    return {"counters_monotone", [](const StepView& s) {
                for (std::size_t i = 1; i <= s.layout.processes(); ++i) {
                    auto a = s.layout.slot({RegKind::A, i});
                    auto r = s.layout.slot({RegKind::R, i});
                    if (s.after[a].hi < s.before[a].hi) return false;
                    if (s.after[r].hi < s.before[r].hi) return false;
                    if (s.after[r].hi == s.before[r].hi && s.after[r].lo < s.before[r].lo) return false;
                }
                return true;
            }};
}

inline InvariantHook step_bound() {
    return {"step_bound", [](const StepView& s) {
                return s.call_register_ops <= (s.call_kind == OpKind::cas ? max_cas_register_ops : 1);
            }};
}

inline std::vector<InvariantHook> defaults() {
    return {v_seq_even(), v_seq_grows_by_two(), seq_monotone(), counters_monotone(), step_bound()};
}

}  // namespace hooks

/// Stepwise executor for n process programs over one MultiCas.
class Machine {
public:
    Machine(const MachineConfig& config, std::span<const ProcessProgram> programs, bool record = true)
        : system_(programs.size(), config.initial_values, config.width, config.mutation),
          procs_(programs.size()),
          record_(record) {
        std::vector<bool> seen(programs.size() + 1, false);
        for (const auto& p : programs) {
            if (p.pid < 1 || p.pid > programs.size() || seen[p.pid]) {
                throw std::invalid_argument("program pids must be a permutation of 1..n");
            }
            seen[p.pid] = true;
            for (const auto& op : p.ops) system_.layout().check_object(op.object);
            procs_[p.pid - 1].ops = p.ops;
        }
        if (record_) {
            trace_.processes = programs.size();
            trace_.initial_values = config.initial_values;
            trace_.width = config.width;
        }
    }

    std::size_t processes() const noexcept { return procs_.size(); }
    const CasLayout& layout() const noexcept { return system_.layout(); }
    std::size_t steps_taken() const noexcept { return steps_; }

    bool finished(ProcessId pid) const {
        const Proc& p = proc(pid);
        return !p.current && p.next_op == p.ops.size();
    }
    bool all_finished() const {
        for (std::size_t i = 1; i <= procs_.size(); ++i) {
            if (!finished(i)) return false;
        }
        return true;
    }
    bool in_call(ProcessId pid) const { return proc(pid).current.has_value(); }

    std::vector<ProcessId> runnable() const {
        std::vector<ProcessId> out;
        for (std::size_t i = 1; i <= procs_.size(); ++i) {
            if (!finished(i)) out.push_back(i);
        }
        return out;
    }

    /// Let `pid` take one step. Returns false (and does nothing) if its
    /// program is exhausted. Throws invariant_violation if a hook fails.
    bool step(ProcessId pid, std::span<const InvariantHook> invariant_hooks = {}) {
        if (pid < 1 || pid > procs_.size()) {
            throw std::out_of_range("schedule names pid " + std::to_string(pid) + " outside 1.." +
                                    std::to_string(procs_.size()));
        }
        Proc& p = procs_[pid - 1];
        if (!p.current) {
            if (p.next_op == p.ops.size()) return false;
            p.current.emplace(system_.start(pid, p.ops[p.next_op]));
            p.call_ordinal = p.next_op++;
            if (record_) trace_.events.push_back({EventKind::inv, pid, p.current->op(), 0, steps_});
        }

        std::vector<RegisterWord> before;
        if (!invariant_hooks.empty()) {
            auto w = system_.memory().words();
            before.assign(w.begin(), w.end());
        }

        CasCall& call = *p.current;
        auto [op, observed] = system_.step(call);
        RegisterStep rs{steps_, pid, p.call_ordinal, op.reg, op.prim, op.x, op.y, observed, op.site};
        if (record_) trace_.register_steps.push_back(rs);

        if (!invariant_hooks.empty()) {
            StepView view{system_.layout(), before, system_.memory().words(), rs, call.op().kind,
                          call.register_ops()};
            for (const auto& hook : invariant_hooks) {
                if (!hook.holds(view)) {
                    auto w = system_.memory().words();
                    Violation v{hook.name, steps_, {w.begin(), w.end()}};
                    ++steps_;
                    throw invariant_violation(std::move(v), std::move(*this).finish());
                }
            }
        }

        if (call.done()) {
            if (record_) trace_.events.push_back({EventKind::res, pid, call.op(), call.result(), steps_});
            p.current.reset();
        }
        ++steps_;
        return true;
    }

    /// Close the run: fills final state and pending set.
    ExecutionTrace finish() && {
        auto w = system_.memory().words();
        trace_.final_state.assign(w.begin(), w.end());
        trace_.pending.clear();
        for (std::size_t i = 1; i <= procs_.size(); ++i) {
            if (procs_[i - 1].current) trace_.pending.push_back(i);
        }
        return std::move(trace_);
    }

    std::span<const RegisterWord> registers() const noexcept { return system_.memory().words(); }

private:
    struct Proc {
        std::vector<HighOp> ops;
        std::size_t next_op = 0;
        std::size_t call_ordinal = 0;
        std::optional<CasCall> current;
    };

    const Proc& proc(ProcessId pid) const { return procs_.at(pid - 1); }

    MultiCas system_;
    std::vector<Proc> procs_;
    bool record_;
    std::size_t steps_ = 0;
    ExecutionTrace trace_;
};

/// Replay `schedule` from the initial state and record the full execution.
inline ExecutionTrace run_schedule(const MachineConfig& config, std::span<const ProcessProgram> programs,
                                   const Schedule& schedule,
                                   std::span<const InvariantHook> invariant_hooks = {}) {
    Machine m(config, programs);
    for (ProcessId pid : schedule.steps) m.step(pid, invariant_hooks);
    return std::move(m).finish();
}

struct EnumerationResult {
    std::size_t schedules = 0;
    bool partial = false;  // stopped at the cap before covering every interleaving
};

/// Depth-first enumeration of every distinct interleaving. Only unfinished
/// processes are branched on, so no schedule contains a skipped entry, and
/// each yielded schedule ends when all programs finish or at max_steps.
/// Stops after `cap` schedules and reports partial = true.
template <class Visitor>
EnumerationResult enumerate_schedules(const MachineConfig& config, std::span<const ProcessProgram> programs,
                                      std::size_t max_steps, std::size_t cap, Visitor&& visit) {
    EnumerationResult result;
    std::vector<ProcessId> prefix;
    bool stop = false;

    auto dfs = [&](auto& self, const Machine& m) -> void {
        if (stop) return;
        auto ready = m.runnable();
        if (ready.empty() || prefix.size() == max_steps) {
            if (result.schedules == cap) {
                result.partial = true;
                stop = true;
                return;
            }
            ++result.schedules;
            visit(Schedule{prefix});
            return;
        }
        for (ProcessId pid : ready) {
            Machine next = m;
            next.step(pid);
            prefix.push_back(pid);
            self(self, next);
            prefix.pop_back();
            if (stop) return;
        }
    };
    dfs(dfs, Machine(config, programs, false));
    return result;
}

/// Random schedules: at each step the next process is drawn uniformly from
/// the unfinished ones. Deterministic in the seed.
class RandomScheduleStream {
public:
    RandomScheduleStream(MachineConfig config, std::vector<ProcessProgram> programs, std::uint64_t seed)
        : config_(std::move(config)), programs_(std::move(programs)), rng_(seed) {}

    /// A schedule that completes every program, cut after `truncate` steps if given.
    Schedule next(std::optional<std::size_t> truncate = std::nullopt) {
        return draw(config_, programs_, rng_, truncate);
    }

    static Schedule draw(const MachineConfig& config, std::span<const ProcessProgram> programs,
                         std::mt19937_64& rng, std::optional<std::size_t> truncate = std::nullopt) {
        Machine m(config, programs, false);
        Schedule s;
        for (;;) {
            if (truncate && s.steps.size() >= *truncate) break;
            auto ready = m.runnable();
            if (ready.empty()) break;
            std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
            ProcessId pid = ready[pick(rng)];
            m.step(pid);
            s.steps.push_back(pid);
        }
        return s;
    }

private:
    MachineConfig config_;
    std::vector<ProcessProgram> programs_;
    std::mt19937_64 rng_;
};

inline std::vector<Schedule> random_schedules(const MachineConfig& config, std::vector<ProcessProgram> programs,
                                              std::size_t count, std::uint64_t seed,
                                              std::optional<std::size_t> truncate = std::nullopt) {
    RandomScheduleStream stream(config, std::move(programs), seed);
    std::vector<Schedule> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(stream.next(truncate));
    return out;
}

}  // namespace hmcas
