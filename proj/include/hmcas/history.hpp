#pragma once

// Invocation/response histories of high-level cas/read calls.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmcas/cas_object.hpp"

namespace hmcas {

enum class EventKind : std::uint8_t { inv, res };

struct Event {
    EventKind kind = EventKind::inv;
    ProcessId pid = 1;
    HighOp op;
    word_t ret = 0;        // responses only: value for read, 0/1 for cas
    std::size_t step = 0;  // register step at which the call started / ended

    friend bool operator==(const Event&, const Event&) = default;
};

using History = std::vector<Event>;

class malformed_history : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A call reconstructed from a history: an invocation and, unless pending,
/// its response.
struct Call {
    ProcessId pid = 1;
    HighOp op;
    std::size_t inv_step = 0;
    std::optional<std::size_t> res_step;
    std::optional<word_t> ret;

    bool pending() const noexcept { return !res_step.has_value(); }
};

/// Pair up events into calls, in invocation order. Throws malformed_history
/// when a pid has two open calls, a response without invocation, a response
/// whose op differs from the open invocation, or step indices go backwards.
/// A call may start and end at the same step (a one-operation call).
inline std::vector<Call> calls_of(const History& h) {
    std::vector<Call> calls;
    std::map<ProcessId, std::size_t> open;
    std::optional<std::size_t> last_step;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Event& e = h[i];
        if (last_step && e.step < *last_step) {
            throw malformed_history("event " + std::to_string(i) + ": step index goes backwards");
        }
        last_step = e.step;
        if (e.kind == EventKind::inv) {
            if (open.contains(e.pid)) {
                throw malformed_history("event " + std::to_string(i) + ": pid " + std::to_string(e.pid) +
                                        " invokes while a call is pending");
            }
            open[e.pid] = calls.size();
            calls.push_back({e.pid, e.op, e.step, std::nullopt, std::nullopt});
        } else {
            auto it = open.find(e.pid);
            if (it == open.end()) {
                throw malformed_history("event " + std::to_string(i) + ": response from pid " +
                                        std::to_string(e.pid) + " without invocation");
            }
            Call& c = calls[it->second];
            if (!(c.op == e.op)) {
                throw malformed_history("event " + std::to_string(i) + ": response op does not match invocation");
            }
            c.res_step = e.step;
            c.ret = e.ret;
            open.erase(it);
        }
    }
    return calls;
}

/// Events touching object k only (linearizability is local, so objects are
/// checked one at a time).
inline History project(const History& h, std::size_t object) {
    History out;
    for (const Event& e : h) {
        if (e.op.object == object) out.push_back(e);
    }
    return out;
}

}  // namespace hmcas
