#pragma once

// White-box linearization: assign every call the linearization point the
// correctness argument for the algorithm prescribes, then check the points
// against the call spans, the recorded return values and real time.
//
// For a cas(a, b) that read V = (seq | val) first:
//   case 1   val != a                      -> at that first read
//   case 2   val == a == b                 -> at that first read
//   case 3   val == a != b, final V.seq >= seq + 2:
//            let p be the first install step leaving V.seq == seq + 2,
//            executed by some process j during one of its calls
//     3a     the winner j read from P is this call's pid  -> at p
//     3b     otherwise                                     -> just after p
//   case 4   val == a != b, final V.seq < seq + 2  -> after everything else
// A read() is linearized at its single read of V.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "hmcas/lincheck.hpp"
#include "hmcas/machine.hpp"

namespace hmcas {

enum class LinCase : std::uint8_t { read, case1, case2, case3a, case3b, case4 };

inline const char* to_string(LinCase c) noexcept {
    switch (c) {
    case LinCase::read: return "read";
    case LinCase::case1: return "1";
    case LinCase::case2: return "2";
    case LinCase::case3a: return "3a";
    case LinCase::case3b: return "3b";
    case LinCase::case4: return "4";
    }
    return "?";
}

inline constexpr std::size_t end_of_execution = std::numeric_limits<std::size_t>::max();

struct AssignedCall {
    ProcessId pid = 1;
    std::size_t call = 0;  // ordinal within the process's program
    HighOp op;
    LinCase tag = LinCase::read;
    std::size_t point = 0;                        // step index, or end_of_execution
    std::optional<std::size_t> identifying_write;  // case 3: the install step p
    std::size_t start = 0;
    std::optional<std::size_t> end;
    std::optional<word_t> ret;
    word_t start_seq = 0;

    bool finished() const noexcept { return end.has_value(); }

    /// Total order key: step, then "just after" offsets, then pid.
    std::tuple<std::size_t, int, ProcessId> order_key() const noexcept {
        return {point, tag == LinCase::case3b ? 1 : 0, pid};
    }
};

struct LinearizationAssignment {
    std::size_t object = 0;
    std::vector<AssignedCall> calls;

    std::array<std::size_t, 6> histogram() const noexcept {
        std::array<std::size_t, 6> h{};
        for (const auto& c : calls) ++h[static_cast<std::size_t>(c.tag)];
        return h;
    }
};

/// A case-3 call with no qualifying install step: the trace contradicts the
/// algorithm's invariants.
class classification_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline LinearizationAssignment linearize_by_definition(const ExecutionTrace& trace, std::size_t object = 0) {
    const CasLayout layout = trace.layout();
    layout.check_object(object);
    const RegisterRef v_ref{RegKind::V, object};
    const RegisterRef p_ref{RegKind::P, object};
    const word_t final_seq = trace.final_register(v_ref).hi;

    // Calls in invocation order; ordinals follow each process's program.
    LinearizationAssignment out;
    out.object = object;
    std::map<std::pair<ProcessId, std::size_t>, std::size_t> index;  // (pid, ordinal) -> calls slot
    std::map<ProcessId, std::size_t> ordinal;
    std::map<ProcessId, std::size_t> open;
    for (const Event& e : trace.events) {
        if (e.kind == EventKind::inv) {
            std::size_t ord = ordinal[e.pid]++;
            if (e.op.object != object) continue;
            AssignedCall c;
            c.pid = e.pid;
            c.call = ord;
            c.op = e.op;
            c.start = e.step;
            index[{e.pid, ord}] = out.calls.size();
            open[e.pid] = out.calls.size();
            out.calls.push_back(c);
        } else if (e.op.object == object) {
            auto& c = out.calls.at(open.at(e.pid));
            c.end = e.step;
            c.ret = e.ret;
            open.erase(e.pid);
        }
    }

    // First register step of each call, and each call's read of P.
    std::map<std::pair<ProcessId, std::size_t>, const RegisterStep*> first_step;
    std::map<std::pair<ProcessId, std::size_t>, const RegisterStep*> winner_read;
    for (const RegisterStep& s : trace.register_steps) {
        auto key = std::make_pair(s.pid, s.call);
        first_step.try_emplace(key, &s);
        if (s.site == CallSite::read_winner && s.reg == p_ref) winner_read.try_emplace(key, &s);
    }

    for (AssignedCall& c : out.calls) {
        const RegisterStep* first = first_step.at({c.pid, c.call});
        c.start_seq = first->observed.hi;
        if (c.op.kind == OpKind::read) {
            c.tag = LinCase::read;
            c.point = first->step;
            continue;
        }
        const word_t val = first->observed.lo;
        if (val != c.op.a) {
            c.tag = LinCase::case1;
            c.point = first->step;
            continue;
        }
        if (c.op.a == c.op.b) {
            c.tag = LinCase::case2;
            c.point = first->step;
            continue;
        }
        const word_t target = c.start_seq + 2;
        if (final_seq < target) {
            c.tag = LinCase::case4;
            c.point = end_of_execution;
            continue;
        }
        const RegisterStep* install = nullptr;
        for (const RegisterStep& s : trace.register_steps) {
            if (s.site == CallSite::install_value && s.reg == v_ref && s.observed.hi == target) {
                install = &s;
                break;
            }
        }
        if (install == nullptr) {
            throw classification_failure("pid " + std::to_string(c.pid) + " call " + std::to_string(c.call) +
                                         ": V.seq reached " + std::to_string(target) +
                                         " without an install step writing it");
        }
        auto wr = winner_read.find({install->pid, install->call});
        if (wr == winner_read.end() || wr->second->step > install->step) {
            throw classification_failure("install at step " + std::to_string(install->step) +
                                         " has no preceding read of P in the same call");
        }
        const ProcessId winner = layout.p_layout().unpack(wr->second->observed).pid;
        c.identifying_write = install->step;
        c.point = install->step;
        c.tag = winner == c.pid ? LinCase::case3a : LinCase::case3b;
    }
    return out;
}

struct AssignmentVerdict {
    bool valid = true;
    std::vector<std::string> failures;
    std::vector<std::size_t> order;  // indices into assignment.calls

    void fail(std::string why) {
        valid = false;
        failures.push_back(std::move(why));
    }
};

/// Check an assignment: (i) points lie within call spans, (ii) replaying the
/// calls in point order reproduces every finished call's return value and the
/// per-case expected value, (iii) the point order extends real-time order.
/// Case-4 calls take no effect; a finished case-4 call is itself a failure.
inline AssignmentVerdict validate_assignment(const ExecutionTrace& trace, const LinearizationAssignment& assignment) {
    AssignmentVerdict verdict;
    const auto& calls = assignment.calls;
    auto describe = [&](const AssignedCall& c) {
        return "pid " + std::to_string(c.pid) + " call " + std::to_string(c.call) + " (case " + to_string(c.tag) + ")";
    };

    for (const AssignedCall& c : calls) {
        if (c.tag == LinCase::case4) {
            if (c.finished()) verdict.fail(describe(c) + " finished but never took effect");
            continue;
        }
        if (c.point < c.start) verdict.fail(describe(c) + " linearized before it started");
        if (c.finished()) {
            bool after_end = c.tag == LinCase::case3b ? c.point >= *c.end : c.point > *c.end;
            if (after_end) verdict.fail(describe(c) + " linearized after it ended");
        }
    }

    std::vector<std::size_t> order(calls.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return calls[x].order_key() < calls[y].order_key(); });
    verdict.order = order;

    word_t state = trace.initial_values.at(assignment.object);
    for (std::size_t i : order) {
        const AssignedCall& c = calls[i];
        if (c.tag == LinCase::case4) continue;
        auto [next, expected] = spec_apply(state, c.op);
        state = next;
        if (c.finished() && *c.ret != expected) {
            verdict.fail(describe(c) + " returned " + std::to_string(*c.ret) + ", sequential order gives " +
                         std::to_string(expected));
        }
        std::optional<word_t> table;
        switch (c.tag) {
        case LinCase::case1: table = 0; break;
        case LinCase::case2: table = 1; break;
        case LinCase::case3a: table = 1; break;
        case LinCase::case3b: table = 0; break;
        default: break;
        }
        if (table && expected != *table) {
            verdict.fail(describe(c) + " expected return " + std::to_string(*table) + " by case, order gives " +
                         std::to_string(expected));
        }
    }

    std::vector<std::size_t> rank(calls.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    for (std::size_t x = 0; x < calls.size(); ++x) {
        if (!calls[x].finished()) continue;
        for (std::size_t y = 0; y < calls.size(); ++y) {
            if (x != y && *calls[x].end < calls[y].start && rank[x] > rank[y]) {
                verdict.fail(describe(calls[x]) + " precedes " + describe(calls[y]) +
                             " in real time but is linearized after it");
            }
        }
    }
    return verdict;
}

}  // namespace hmcas
