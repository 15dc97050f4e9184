#pragma once

// Wait-free compare-and-swap built from registers that support only read,
// write, half-max and max-write.
//
// Shared state (n processes, m objects):
//   A[i] = (c | val)        announcement of process i's latest contended call
//   R[i] = (c | ret)        return slot for that call, ret in {0, 1}
//   V[k] = (seq | val)      version and current value of object k
//   P[k] = (seq | pid, c)   competition register of object k
// A and R are shared by all m objects, so the total is 2n + 2m registers.
//
// Each call is a CasCall state machine that issues one register operation at
// a time. The simulator interleaves those operations under a schedule; the
// live build runs them back to back against atomic registers. Both run the
// same code.

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmcas/registers.hpp"

namespace hmcas {

using ProcessId = std::size_t;  // 1-based process identifier

enum class RegKind : std::uint8_t { A, R, V, P };

/// A shared register: A[i]/R[i] use the 1-based pid, V[k]/P[k] the 0-based object index.
struct RegisterRef {
    RegKind kind = RegKind::V;
    std::size_t index = 0;
    friend constexpr bool operator==(const RegisterRef&, const RegisterRef&) = default;
};

/// Where in the algorithm a register operation is issued.
enum class CallSite : std::uint8_t {
    read_only,          // read(): the single read of V
    read_value,         // cas: read V
    announce,           // cas: A[id] <- (c | b)
    reset_result,       // cas: R[id] <- (c | false)
    compete,            // cas: P.max_write(seq+1 | id, c)
    close_round,        // cas: P.half_max(seq+2)
    read_winner,        // cas: read P
    read_announcement,  // cas: read A[pid]
    inform_winner,      // cas: R[pid].max_write(ca | true)
    install_value,      // cas: V.max_write(seq | val)
    read_result,        // cas: read R[id]
};

inline const char* to_string(CallSite s) noexcept {
    switch (s) {
    case CallSite::read_only: return "read_only";
    case CallSite::read_value: return "read_value";
    case CallSite::announce: return "announce";
    case CallSite::reset_result: return "reset_result";
    case CallSite::compete: return "compete";
    case CallSite::close_round: return "close_round";
    case CallSite::read_winner: return "read_winner";
    case CallSite::read_announcement: return "read_announcement";
    case CallSite::inform_winner: return "inform_winner";
    case CallSite::install_value: return "install_value";
    case CallSite::read_result: return "read_result";
    }
    return "?";
}

inline std::optional<CallSite> call_site_from_string(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(CallSite::read_result); ++i) {
        auto site = static_cast<CallSite>(i);
        if (s == to_string(site)) return site;
    }
    return std::nullopt;
}

struct RegisterOp {
    RegisterRef reg;
    Primitive prim = Primitive::read;
    word_t x = 0;
    word_t y = 0;
    CallSite site = CallSite::read_value;
};

/// Upper bound on register operations issued by one cas call, on every path.
inline constexpr int max_cas_register_ops = 10;

/// Deliberately broken variants of the algorithm, used to show that the
/// checkers catch each load-bearing detail.
enum class Mutation : std::uint8_t {
    none,
    swap_inform_install,  // install V before informing the winner through R
    plain_install,        // install V with write instead of max_write
    odd_close,            // close the round with seq+1 instead of seq+2
    no_parity_check,      // skip the "seq is even" test before helping
    no_count_check,       // skip the cp == ca test before helping
};

inline constexpr Mutation all_mutations[] = {
    Mutation::swap_inform_install, Mutation::plain_install, Mutation::odd_close,
    Mutation::no_parity_check, Mutation::no_count_check,
};

inline const char* to_string(Mutation m) noexcept {
    switch (m) {
    case Mutation::none: return "none";
    case Mutation::swap_inform_install: return "swap-inform-install";
    case Mutation::plain_install: return "plain-install";
    case Mutation::odd_close: return "odd-close";
    case Mutation::no_parity_check: return "no-parity-check";
    case Mutation::no_count_check: return "no-count-check";
    }
    return "?";
}

inline std::optional<Mutation> mutation_from_string(std::string_view s) {
    if (s == "none") return Mutation::none;
    for (Mutation m : all_mutations) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

/// Static shape of a (multi-)object system: register slots and field formats.
class CasLayout {
public:
    CasLayout(std::size_t processes, std::size_t objects, FieldWidth width = {})
        : n_(processes), m_(objects), width_(width), p_layout_(processes, width) {
        if (objects == 0) throw std::invalid_argument("object count must be at least 1");
    }

    std::size_t processes() const noexcept { return n_; }
    std::size_t objects() const noexcept { return m_; }
    FieldWidth width() const noexcept { return width_; }
    const PackedPLayout& p_layout() const noexcept { return p_layout_; }

    /// Number of shared registers: 2n + 2m.
    std::size_t register_count() const noexcept { return 2 * n_ + 2 * m_; }

    std::size_t slot(RegisterRef r) const {
        switch (r.kind) {
        case RegKind::A: check_pid(r.index); return r.index - 1;
        case RegKind::R: check_pid(r.index); return n_ + r.index - 1;
        case RegKind::V: check_object(r.index); return 2 * n_ + r.index;
        case RegKind::P: check_object(r.index); return 2 * n_ + m_ + r.index;
        }
        return 0;
    }

    RegisterRef ref(std::size_t slot) const {
        if (slot < n_) return {RegKind::A, slot + 1};
        if (slot < 2 * n_) return {RegKind::R, slot - n_ + 1};
        if (slot < 2 * n_ + m_) return {RegKind::V, slot - 2 * n_};
        return {RegKind::P, slot - 2 * n_ - m_};
    }

    /// "V", "P[1]", "A[2]". V and P carry an index only when m > 1.
    std::string name(RegisterRef r) const {
        switch (r.kind) {
        case RegKind::A: return "A[" + std::to_string(r.index) + "]";
        case RegKind::R: return "R[" + std::to_string(r.index) + "]";
        case RegKind::V: return m_ == 1 ? std::string("V") : "V[" + std::to_string(r.index) + "]";
        case RegKind::P: return m_ == 1 ? std::string("P") : "P[" + std::to_string(r.index) + "]";
        }
        return "?";
    }

    void check_pid(std::size_t pid) const {
        if (pid < 1 || pid > n_) {
            throw std::out_of_range("pid " + std::to_string(pid) + " outside 1.." + std::to_string(n_));
        }
    }
    void check_object(std::size_t k) const {
        if (k >= m_) {
            throw std::out_of_range("object " + std::to_string(k) + " outside 0.." + std::to_string(m_ - 1));
        }
    }

private:
    std::size_t n_;
    std::size_t m_;
    FieldWidth width_;
    PackedPLayout p_layout_;
};

enum class OpKind : std::uint8_t { cas, read };

/// One high-level operation on object `object`.
struct HighOp {
    OpKind kind = OpKind::read;
    word_t a = 0;
    word_t b = 0;
    std::size_t object = 0;

    static HighOp cas(word_t a, word_t b, std::size_t object = 0) { return {OpKind::cas, a, b, object}; }
    static HighOp read(std::size_t object = 0) { return {OpKind::read, 0, 0, object}; }

    friend constexpr bool operator==(const HighOp&, const HighOp&) = default;
};

/// A single in-flight cas or read call, advanced one register operation at a
/// time. `counter` is the calling process's private operation count c, shared
/// across all objects.
class CasCall {
public:
    CasCall(const CasLayout& layout, ProcessId pid, HighOp op, Mutation mutation = Mutation::none)
        : pid_(pid), op_(op), mutation_(mutation) {
        layout.check_pid(pid);
        layout.check_object(op.object);
        site_ = op.kind == OpKind::read ? CallSite::read_only : CallSite::read_value;
    }

    bool done() const noexcept { return done_; }
    ProcessId pid() const noexcept { return pid_; }
    const HighOp& op() const noexcept { return op_; }
    int register_ops() const noexcept { return ops_; }

    /// Return value: the read value, or 0/1 for cas. Only valid once done().
    word_t result() const noexcept { return result_; }

    /// Snapshot of V read at the start of the call.
    std::optional<RegisterWord> observed_value() const noexcept { return first_read_; }

    /// The next register operation. `counter` is the calling process's
    /// private c, already incremented once the call is competing.
    RegisterOp next(const CasLayout& layout, word_t counter) const {
        assert(!done_);
        const std::size_t k = op_.object;
        const auto& pl = layout.p_layout();
        switch (site_) {
        case CallSite::read_only:
        case CallSite::read_value:
            return {{RegKind::V, k}, Primitive::read, 0, 0, site_};
        case CallSite::announce:
            return {{RegKind::A, pid_}, Primitive::write, counter, op_.b, site_};
        case CallSite::reset_result:
            return {{RegKind::R, pid_}, Primitive::write, counter, 0, site_};
        case CallSite::compete:
            return {{RegKind::P, k}, Primitive::max_write, seq_ + 1, pl.pack_lo(pid_, counter), site_};
        case CallSite::close_round:
            return {{RegKind::P, k}, Primitive::half_max,
                    seq_ + (mutation_ == Mutation::odd_close ? 1 : 2), 0, site_};
        case CallSite::read_winner:
            return {{RegKind::P, k}, Primitive::read, 0, 0, site_};
        case CallSite::read_announcement:
            return {{RegKind::A, winner_pid_}, Primitive::read, 0, 0, site_};
        case CallSite::inform_winner:
            return {{RegKind::R, winner_pid_}, Primitive::max_write, winner_count_, 1, site_};
        case CallSite::install_value:
            return {{RegKind::V, k},
                    mutation_ == Mutation::plain_install ? Primitive::write : Primitive::max_write,
                    winner_seq_, winner_val_, site_};
        case CallSite::read_result:
            return {{RegKind::R, pid_}, Primitive::read, 0, 0, site_};
        }
        return {};
    }

    /// Consume the outcome of the operation returned by next(). `counter` is
    /// the process-private counter; it is bumped when the call starts competing.
    void complete(const CasLayout& layout, RegisterWord observed, word_t& counter) {
        assert(!done_);
        ++ops_;
        switch (site_) {
        case CallSite::read_only:
            finish(observed.lo);
            return;
        case CallSite::read_value:
            first_read_ = observed;
            seq_ = observed.hi;
            if (op_.a != observed.lo) return finish(0);
            if (op_.a == op_.b) return finish(1);
            if (counter >= layout.p_layout().max_count()) {
                throw register_overflow("operation counter of pid " + std::to_string(pid_) + " exhausted at " +
                                        std::to_string(counter));
            }
            ++counter;
            site_ = CallSite::announce;
            return;
        case CallSite::announce: site_ = CallSite::reset_result; return;
        case CallSite::reset_result: site_ = CallSite::compete; return;
        case CallSite::compete: site_ = CallSite::close_round; return;
        case CallSite::close_round: site_ = CallSite::read_winner; return;
        case CallSite::read_winner: {
            auto f = layout.p_layout().unpack(observed);
            winner_seq_ = f.seq;
            winner_pid_ = f.pid;
            winner_count_ = f.c;
            if (winner_pid_ < 1 || winner_pid_ > layout.processes()) {
                // P.pid is still 0: no competitor has announced itself.
                site_ = CallSite::read_result;
                return;
            }
            site_ = CallSite::read_announcement;
            return;
        }
        case CallSite::read_announcement: {
            word_t ca = observed.hi;
            winner_val_ = observed.lo;
            bool even = winner_seq_ % 2 == 0 || mutation_ == Mutation::no_parity_check;
            bool same_call = winner_count_ == ca || mutation_ == Mutation::no_count_check;
            winner_count_ = ca;
            if (even && same_call) {
                site_ = mutation_ == Mutation::swap_inform_install ? CallSite::install_value
                                                                    : CallSite::inform_winner;
            } else {
                site_ = CallSite::read_result;
            }
            return;
        }
        case CallSite::inform_winner:
            site_ = mutation_ == Mutation::swap_inform_install ? CallSite::read_result
                                                                : CallSite::install_value;
            return;
        case CallSite::install_value:
            site_ = mutation_ == Mutation::swap_inform_install ? CallSite::inform_winner
                                                                : CallSite::read_result;
            return;
        case CallSite::read_result:
            finish(observed.lo);
            return;
        }
    }

private:
    void finish(word_t r) noexcept {
        result_ = r;
        done_ = true;
    }

    ProcessId pid_;
    HighOp op_;
    Mutation mutation_;
    CallSite site_;
    bool done_ = false;
    int ops_ = 0;
    word_t result_ = 0;
    std::optional<RegisterWord> first_read_;
    word_t seq_ = 0;
    std::size_t winner_pid_ = 0;
    word_t winner_seq_ = 0;
    word_t winner_count_ = 0;
    word_t winner_val_ = 0;
};

/// Plain register array, for the single-threaded simulator.
class SimMemory {
public:
    explicit SimMemory(std::size_t count) : regs_(count) {}

    RegisterWord apply(std::size_t slot, const RegisterOp& op, FieldWidth w) {
        return hmcas::apply(regs_.at(slot), op.prim, op.x, op.y, w);
    }
    void init(std::size_t slot, RegisterWord v) { regs_.at(slot) = v; }
    RegisterWord peek(std::size_t slot) const { return regs_.at(slot); }
    std::span<const RegisterWord> words() const noexcept { return regs_; }

    friend bool operator==(const SimMemory&, const SimMemory&) = default;

private:
    std::vector<RegisterWord> regs_;
};

/// Atomic register array, for concurrent use from real threads.
class AtomicMemory {
public:
    explicit AtomicMemory(std::size_t count) : regs_(count) {}

    RegisterWord apply(std::size_t slot, const RegisterOp& op, FieldWidth w) {
        return regs_[slot].apply(op.prim, op.x, op.y, w);
    }
    void init(std::size_t slot, RegisterWord v) { regs_[slot].write(v.hi, v.lo); }
    RegisterWord peek(std::size_t slot) const { return regs_[slot].read(); }

private:
    std::vector<AtomicRegisterWord> regs_;
};

/// Outcome of running a call to completion.
struct CallOutcome {
    word_t result = 0;
    int register_ops = 0;
};

/// m compare-and-swap objects over one shared A/R pair, generic over the
/// register memory. Process pid must only be driven by one caller at a time.
template <class Memory>
class BasicMultiCas {
public:
    BasicMultiCas(std::size_t processes, std::span<const word_t> initial_values, FieldWidth width = {},
                  Mutation mutation = Mutation::none)
        : layout_(processes, initial_values.size(), width),
          memory_(layout_.register_count()),
          counters_(processes, 0),
          mutation_(mutation) {
        for (std::size_t k = 0; k < initial_values.size(); ++k) {
            width.check(initial_values[k], "initial value");
            memory_.init(layout_.slot({RegKind::V, k}), {0, initial_values[k]});
        }
    }

    const CasLayout& layout() const noexcept { return layout_; }
    std::size_t register_count() const noexcept { return layout_.register_count(); }
    Mutation mutation() const noexcept { return mutation_; }

    CasCall start(ProcessId pid, HighOp op) const { return CasCall(layout_, pid, op, mutation_); }

    /// Execute the next register operation of `call`; returns the operation
    /// and what it observed.
    std::pair<RegisterOp, RegisterWord> step(CasCall& call) {
        word_t& counter = counters_.at(call.pid() - 1);
        RegisterOp op = call.next(layout_, counter);
        RegisterWord observed = memory_.apply(layout_.slot(op.reg), op, layout_.width());
        call.complete(layout_, observed, counter);
        return {op, observed};
    }

    CallOutcome run(ProcessId pid, HighOp op) {
        CasCall call = start(pid, op);
        while (!call.done()) step(call);
        return {call.result(), call.register_ops()};
    }

    bool cas(std::size_t object, ProcessId pid, word_t a, word_t b) {
        return run(pid, HighOp::cas(a, b, object)).result != 0;
    }
    word_t read(std::size_t object, ProcessId pid) { return run(pid, HighOp::read(object)).result; }

    RegisterWord peek(RegisterRef r) const { return memory_.peek(layout_.slot(r)); }
    word_t counter(ProcessId pid) const { return counters_.at(pid - 1); }
    const Memory& memory() const noexcept { return memory_; }

private:
    CasLayout layout_;
    Memory memory_;
    // Process-private counters c_1..c_n; each entry is touched only by its own pid.
    std::vector<word_t> counters_;
    Mutation mutation_;
};

/// Single compare-and-swap object: the m = 1 case, object index fixed at 0.
template <class Memory>
class BasicCasObject {
public:
    BasicCasObject(std::size_t processes, word_t initial_value, FieldWidth width = {},
                   Mutation mutation = Mutation::none)
        : impl_(processes, std::span<const word_t>(&initial_value, 1), width, mutation) {}

    bool cas(ProcessId pid, word_t a, word_t b) { return impl_.cas(0, pid, a, b); }
    word_t read(ProcessId pid) { return impl_.read(0, pid); }
    CallOutcome run(ProcessId pid, HighOp op) { return impl_.run(pid, op); }

    RegisterWord value_register() const { return impl_.peek({RegKind::V, 0}); }
    RegisterWord competition_register() const { return impl_.peek({RegKind::P, 0}); }
    RegisterWord announcement(ProcessId pid) const { return impl_.peek({RegKind::A, pid}); }
    RegisterWord result_slot(ProcessId pid) const { return impl_.peek({RegKind::R, pid}); }
    word_t counter(ProcessId pid) const { return impl_.counter(pid); }

    const BasicMultiCas<Memory>& underlying() const noexcept { return impl_; }
    BasicMultiCas<Memory>& underlying() noexcept { return impl_; }

private:
    BasicMultiCas<Memory> impl_;
};

using CasObject = BasicCasObject<SimMemory>;
using MultiCas = BasicMultiCas<SimMemory>;
using LiveCasObject = BasicCasObject<AtomicMemory>;
using LiveMultiCas = BasicMultiCas<AtomicMemory>;

}  // namespace hmcas
