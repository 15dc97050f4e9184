#pragma once

// Line-oriented trace format, one JSON object per line:
//
//   {"kind":"init","procs":2,"values":[0],"width":64}
//   {"step":0,"pid":1,"call":0,"reg":"V","op":"read","args":[0,0],"observed":[0,0],"site":"read_value"}
//   {"kind":"inv","pid":1,"op":"cas","args":[0,1],"step":0}
//   {"kind":"res","pid":1,"op":"cas","args":[0,1],"ret":1,"step":9}
//   {"kind":"final","registers":[[1,1],...],"pending":[2]}
//
// Event records name the object in "obj" when it is not 0. Register step
// records are the ones carrying "reg". A history file needs only event
// records (and optionally the init record for the initial values).

#include <array>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmcas/linearization_points.hpp"
#include "hmcas/lincheck.hpp"
#include "hmcas/machine.hpp"

namespace hmcas {

class trace_parse_error : public std::runtime_error {
public:
    trace_parse_error(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace trace_json {

using nlohmann::json;

inline json word(RegisterWord w) { return json::array({w.hi, w.lo}); }

inline json event(const Event& e) {
    json j{{"kind", e.kind == EventKind::inv ? "inv" : "res"},
           {"pid", e.pid},
           {"op", e.op.kind == OpKind::cas ? "cas" : "read"}};
    j["args"] = e.op.kind == OpKind::cas ? json::array({e.op.a, e.op.b}) : json::array();
    if (e.op.object != 0) j["obj"] = e.op.object;
    if (e.kind == EventKind::res) j["ret"] = e.ret;
    j["step"] = e.step;
    return j;
}

inline json step(const RegisterStep& s, const CasLayout& layout) {
    return json{{"step", s.step},
                {"pid", s.pid},
                {"call", s.call},
                {"reg", layout.name(s.reg)},
                {"op", to_string(s.prim)},
                {"args", json::array({s.x, s.y})},
                {"observed", word(s.observed)},
                {"site", to_string(s.site)}};
}

inline RegisterRef parse_reg(const std::string& name) {
    auto bracket = name.find('[');
    std::string head = name.substr(0, bracket);
    std::size_t index = 0;
    if (bracket != std::string::npos) {
        if (name.back() != ']') throw std::invalid_argument("bad register name '" + name + "'");
        index = std::stoul(name.substr(bracket + 1, name.size() - bracket - 2));
    }
    if (head == "A") return {RegKind::A, index};
    if (head == "R") return {RegKind::R, index};
    if (head == "V") return {RegKind::V, index};
    if (head == "P") return {RegKind::P, index};
    throw std::invalid_argument("unknown register '" + name + "'");
}

inline Primitive parse_prim(const std::string& s) {
    for (Primitive p : {Primitive::read, Primitive::write, Primitive::half_max, Primitive::max_write}) {
        if (s == to_string(p)) return p;
    }
    throw std::invalid_argument("unknown primitive '" + s + "'");
}

inline Event parse_event(const json& j) {
    Event e;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "inv" && kind != "res") throw std::invalid_argument("unknown record kind '" + kind + "'");
    e.kind = kind == "inv" ? EventKind::inv : EventKind::res;
    e.pid = j.at("pid").get<ProcessId>();
    const std::string op = j.at("op").get<std::string>();
    if (op == "cas") {
        const auto& args = j.at("args");
        if (!args.is_array() || args.size() != 2) throw std::invalid_argument("cas needs two args");
        e.op = HighOp::cas(args[0].get<word_t>(), args[1].get<word_t>());
    } else if (op == "read") {
        e.op = HighOp::read();
    } else {
        throw std::invalid_argument("unknown op '" + op + "'");
    }
    e.op.object = j.value("obj", std::size_t{0});
    if (e.kind == EventKind::res) e.ret = j.at("ret").get<word_t>();
    e.step = j.at("step").get<std::size_t>();
    return e;
}

}  // namespace trace_json

inline void write_trace(std::ostream& out, const ExecutionTrace& t) {
    using trace_json::json;
    const CasLayout layout = t.layout();
    out << json{{"kind", "init"}, {"procs", t.processes}, {"values", t.initial_values}, {"width", t.width.bits()}}.dump()
        << '\n';
    // Interleave register steps and events by step; an invocation precedes
    // the register step it starts, a response follows the one that ends it.
    std::size_t e = 0;
    for (const RegisterStep& s : t.register_steps) {
        while (e < t.events.size() && t.events[e].step < s.step) out << trace_json::event(t.events[e++]).dump() << '\n';
        while (e < t.events.size() && t.events[e].step == s.step && t.events[e].kind == EventKind::inv) {
            out << trace_json::event(t.events[e++]).dump() << '\n';
        }
        out << trace_json::step(s, layout).dump() << '\n';
    }
    while (e < t.events.size()) out << trace_json::event(t.events[e++]).dump() << '\n';
    json regs = json::array();
    for (RegisterWord w : t.final_state) regs.push_back(trace_json::word(w));
    out << json{{"kind", "final"}, {"registers", regs}, {"pending", t.pending}}.dump() << '\n';
}

/// Read a full trace. Throws trace_parse_error with the offending line.
inline ExecutionTrace read_trace(std::istream& in) {
    using trace_json::json;
    ExecutionTrace t;
    std::string line;
    std::size_t lineno = 0;
    bool have_init = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            if (j.contains("reg")) {
                RegisterStep s;
                s.step = j.at("step").get<std::size_t>();
                s.pid = j.at("pid").get<ProcessId>();
                s.call = j.value("call", std::size_t{0});
                s.reg = trace_json::parse_reg(j.at("reg").get<std::string>());
                s.prim = trace_json::parse_prim(j.at("op").get<std::string>());
                s.x = j.at("args").at(0).get<word_t>();
                s.y = j.at("args").at(1).get<word_t>();
                s.observed = {j.at("observed").at(0).get<word_t>(), j.at("observed").at(1).get<word_t>()};
                auto site = call_site_from_string(j.value("site", std::string("read_value")));
                if (!site) throw std::invalid_argument("unknown site");
                s.site = *site;
                t.register_steps.push_back(s);
                continue;
            }
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "init") {
                t.processes = j.at("procs").get<std::size_t>();
                t.initial_values = j.at("values").get<std::vector<word_t>>();
                t.width = FieldWidth(j.value("width", 64u));
                have_init = true;
            } else if (kind == "final") {
                for (const auto& w : j.at("registers")) t.final_state.push_back({w.at(0).get<word_t>(), w.at(1).get<word_t>()});
                t.pending = j.value("pending", std::vector<ProcessId>{});
            } else {
                t.events.push_back(trace_json::parse_event(j));
            }
        } catch (const trace_parse_error&) {
            throw;
        } catch (const std::exception& ex) {
            throw trace_parse_error(lineno, ex.what());
        }
    }
    if (!have_init && !t.register_steps.empty()) throw trace_parse_error(lineno, "register steps without init record");
    return t;
}

struct HistoryFile {
    History events;
    std::vector<word_t> initial_values;  // empty when the file has no init record
};

/// Read only the event records (and the init record, if any).
inline HistoryFile read_history(std::istream& in) {
    using trace_json::json;
    HistoryFile h;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::size_t> lines;  // source line of each event
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            if (j.contains("reg")) continue;
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "init") {
                h.initial_values = j.at("values").get<std::vector<word_t>>();
            } else if (kind != "final") {
                h.events.push_back(trace_json::parse_event(j));
                lines.push_back(lineno);
            }
        } catch (const std::exception& ex) {
            throw trace_parse_error(lineno, ex.what());
        }
    }
    // Well-formedness, reported against the first offending line.
    for (std::size_t len = 1; len <= h.events.size(); ++len) {
        try {
            calls_of(History(h.events.begin(), h.events.begin() + static_cast<std::ptrdiff_t>(len)));
        } catch (const malformed_history& ex) {
            throw trace_parse_error(lines[len - 1], ex.what());
        }
    }
    return h;
}

inline void write_history(std::ostream& out, const History& h) {
    for (const Event& e : h) out << trace_json::event(e).dump() << '\n';
}

/// One verdict record per schedule.
inline std::string verdict_record(std::size_t schedule_id, bool accepted, const std::array<std::size_t, 6>& cases,
                                  const std::optional<History>& counterexample) {
    using trace_json::json;
    json c = json::object();
    for (LinCase lc : {LinCase::read, LinCase::case1, LinCase::case2, LinCase::case3a, LinCase::case3b, LinCase::case4}) {
        c[to_string(lc)] = cases[static_cast<std::size_t>(lc)];
    }
    json j{{"schedule", schedule_id}, {"accepted", accepted}, {"cases", c}};
    if (counterexample) {
        json ce = json::array();
        for (const Event& e : *counterexample) ce.push_back(trace_json::event(e));
        j["counterexample"] = ce;
    }
    return j.dump();
}

}  // namespace hmcas
