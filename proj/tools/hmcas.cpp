// hmcas: verification campaigns, history checking and benchmarks for the
// register-built compare-and-swap.
//
// Exit status: 0 pass, 1 rejection or invariant violation, 2 checker budget
// exceeded, 3 usage or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmcas/hmcas.hpp"

namespace fs = std::filesystem;
using namespace hmcas;

namespace {

enum Exit : int { pass = 0, rejected = 1, budget = 2, usage = 3 };

std::string describe(const HighOp& op) {
    std::ostringstream os;
    if (op.kind == OpKind::read) {
        os << "read()";
    } else {
        os << "cas(" << op.a << ", " << op.b << ")";
    }
    if (op.object != 0) os << " @" << op.object;
    return os.str();
}

std::string describe(const Call& c) {
    std::ostringstream os;
    os << "p" << c.pid << " " << describe(c.op);
    if (c.ret) {
        os << " -> " << *c.ret;
    } else {
        os << " (pending)";
    }
    os << " [" << c.inv_step << ", ";
    if (c.res_step) {
        os << *c.res_step;
    } else {
        os << "-";
    }
    os << "]";
    return os.str();
}

void print_report(const CampaignConfig& cfg, const CampaignReport& r, double seconds) {
    std::printf("schedules             %zu\n", r.schedules);
    std::printf("accepted              %zu\n", r.accepted);
    std::printf("rejected              %zu  (black-box %zu, white-box %zu)\n", r.rejected, r.blackbox_rejections,
                r.whitebox_rejections);
    std::printf("invariant violations  %zu\n", r.invariant_violations);
    std::printf("budget exceeded       %zu\n", r.budget_exceeded);
    std::printf("engine disagreements  %zu\n", r.disagreements);
    std::printf("truncated schedules   %zu  (pending calls %zu)\n", r.truncated_schedules, r.pending_calls);
    std::printf("cases                 read %zu, 1 %zu, 2 %zu, 3a %zu, 3b %zu, 4 %zu\n", r.cases[0], r.cases[1],
                r.cases[2], r.cases[3], r.cases[4], r.cases[5]);
    std::printf("max register ops      contended cas %d, guard cas %d, read %d\n", r.max_contended_cas_ops,
                r.max_short_cas_ops, r.max_read_ops);
    if (r.winner_checks) std::printf("winner checks         %zu  (failed %zu)\n", r.winner_checks, r.winner_failures);
    std::printf("register steps        %zu\n", r.register_steps);
    std::printf("elapsed               %.2f s\n", seconds);
    if (cfg.mutation != Mutation::none) std::printf("mutation              %s\n", to_string(cfg.mutation));
}

void write_file(const fs::path& path, const ExecutionTrace& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_trace(out, t);
}

int cmd_simulate(CampaignConfig cfg, const std::string& out_dir, bool quiet) {
    cfg.record_verdicts = !out_dir.empty();
    auto start = std::chrono::steady_clock::now();
    CampaignReport r = run_campaign(cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (r.partial) {
        std::fprintf(stderr,
                     "refusing exhaustive run: more than %zu schedules (raise --ceiling or use --random)\n",
                     cfg.exhaustive_ceiling);
        return usage;
    }
    print_report(cfg, r, secs);

    for (const auto& f : r.failures) {
        if (quiet) break;
        std::printf("\nschedule %zu: %s\n", f.schedule_id, f.reason.c_str());
        if (f.counterexample) {
            std::printf("  counterexample prefix (%zu events)\n", f.counterexample->size());
            for (const Event& e : *f.counterexample) {
                std::printf("    %s p%zu %s", e.kind == EventKind::inv ? "inv" : "res", e.pid, describe(e.op).c_str());
                if (e.kind == EventKind::res) std::printf(" -> %llu", static_cast<unsigned long long>(e.ret));
                std::printf(" @%zu\n", e.step);
            }
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& f : r.failures) write_file(fs::path(out_dir) / ("failure-" + std::to_string(f.schedule_id) + ".jsonl"), f.trace);
        for (const auto& t : r.traces) {
            std::string name = "trace-" + std::to_string(t.schedule_id) + (t.accepted ? "-accepted" : "-rejected");
            write_file(fs::path(out_dir) / (name + ".jsonl"), t.trace);
        }
        std::ofstream verdicts(fs::path(out_dir) / "verdicts.jsonl");
        for (const auto& line : r.verdict_lines) verdicts << line << '\n';
    }

    if (r.rejected > 0) return rejected;
    if (r.budget_exceeded > 0) return budget;
    return pass;
}

int cmd_check(const std::string& file, std::optional<word_t> initial, std::size_t node_budget) {
    std::ifstream in(file);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", file.c_str());
        return usage;
    }
    HistoryFile h;
    try {
        h = read_history(in);
    } catch (const trace_parse_error& e) {
        std::fprintf(stderr, "%s:%s\n", file.c_str(), e.what());
        return usage;
    }

    std::size_t objects = std::max<std::size_t>(1, h.initial_values.size());
    for (const Event& e : h.events) objects = std::max(objects, e.op.object + 1);
    std::vector<word_t> init = h.initial_values;
    if (initial) init.assign(objects, *initial);
    init.resize(objects, init.empty() ? 0 : init.back());

    bool any_budget = false;
    for (std::size_t k = 0; k < objects; ++k) {
        History part = project(h.events, k);
        auto v = check_linearizable(part, init[k], node_budget);
        auto calls = calls_of(part);
        if (objects > 1) std::printf("object %zu: ", k);
        std::printf("%s (%zu calls, %zu search nodes)\n", to_string(v.kind), calls.size(), v.nodes);
        if (v.kind == VerdictKind::accepted) {
            for (std::size_t i = 0; i < v.witness.size(); ++i) {
                std::printf("  %zu. %s\n", i + 1, describe(calls[v.witness[i]]).c_str());
            }
        } else if (v.kind == VerdictKind::rejected) {
            std::printf("  shortest rejected prefix:\n");
            for (const Call& c : calls_of(*v.counterexample)) std::printf("    %s\n", describe(c).c_str());
            return rejected;
        } else {
            any_budget = true;
        }
    }
    return any_budget ? budget : pass;
}

int cmd_bench(std::size_t threads, std::size_t ops, Contention contention) {
    BenchReport r = run_bench(threads, ops, contention);
    std::printf("threads %zu, ops/thread %zu, contention %s\n", r.threads, r.ops_per_thread,
                contention == Contention::high ? "high" : "low");
    std::printf("%-12s %16s %12s %12s\n", "", "ops/sec", "cas calls", "successful");
    std::printf("%-12s %16.0f %12zu %12zu\n", "native", r.native.ops_per_sec, r.native.cas_calls,
                r.native.successful);
    std::printf("%-12s %16.0f %12zu %12zu\n", "registers", r.simulated.ops_per_sec, r.simulated.cas_calls,
                r.simulated.successful);
    std::printf("contended cas register ops: %d\n", r.max_contended_register_ops);
    std::printf("mean cas register ops: %.2f\n", r.mean_cas_register_ops);
    std::printf("guard-fail cas register ops: %d\n", r.guard_fail_register_ops);
    std::printf("read register ops: %d\n", r.read_register_ops);
    return pass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wait-free compare-and-swap from half-max and max-write registers"};
    app.require_subcommand(1);

    CampaignConfig cfg;
    std::size_t random_count = 0;
    std::string shape = "contend", mutation = "none", out_dir;
    std::optional<std::size_t> truncate;
    unsigned width = 64;
    bool quiet = false;
    auto* sim = app.add_subcommand("simulate", "run an exhaustive or random verification campaign");
    sim->add_option("--procs", cfg.procs, "number of processes")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--ops-per-proc", cfg.ops_per_proc, "calls per process")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--values", cfg.values, "value domain, first entry is the initial value")
        ->delimiter(',')
        ->capture_default_str();
    sim->add_option("--objects", cfg.objects, "number of cas objects")->check(CLI::PositiveNumber)->capture_default_str();
    auto* exhaustive = sim->add_flag("--exhaustive", "enumerate every interleaving (default)");
    auto* random = sim->add_option("--random", random_count, "run N random schedules")->check(CLI::PositiveNumber);
    exhaustive->excludes(random);
    sim->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sim->add_option("--truncate", truncate, "cut every schedule after K steps");
    sim->add_option("--truncated", cfg.truncated, "random mode: cut this many schedules at a random point");
    sim->add_option("--programs", shape, "program shape")->check(CLI::IsMember({"contend", "mixed"}))->capture_default_str();
    sim->add_option("--out", out_dir, "write failing traces, sample traces and verdicts.jsonl here");
    sim->add_option("--save-traces", cfg.keep_traces, "with --out, also write the first N traces");
    sim->add_option("--budget", cfg.budget, "search-node budget per history")->capture_default_str();
    std::vector<std::string> mutation_names{"none"};
    for (Mutation m : all_mutations) mutation_names.emplace_back(to_string(m));
    sim->add_option("--mutation", mutation, "run a seeded-bug build")->check(CLI::IsMember(mutation_names))->capture_default_str();
    sim->add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--ceiling", cfg.exhaustive_ceiling, "largest exhaustive run accepted")->capture_default_str();
    sim->add_option("--width", width, "register field width in bits")->check(CLI::Range(8u, 64u))->capture_default_str();
    sim->add_flag("--no-invariants", [&](std::int64_t) { cfg.check_invariants = false; }, "skip invariant hooks");
    sim->add_flag("--quiet", quiet, "omit failure details");

    std::string history_file;
    std::optional<word_t> initial;
    std::size_t check_budget = default_search_budget;
    auto* check = app.add_subcommand("check", "check a recorded history for linearizability");
    check->add_option("history_file", history_file, "trace or history file")->required();
    check->add_option("--initial", initial, "initial value of every object (default: from the file, else 0)");
    check->add_option("--budget", check_budget, "search-node budget")->capture_default_str();

    std::size_t threads = 1, ops = 100000;
    std::string contention = "high";
    auto* bench = app.add_subcommand("bench", "native cas against the register-built cas");
    bench->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--ops", ops, "cas calls per thread")->capture_default_str();
    bench->add_option("--contention", contention, "one shared object or one per thread")
        ->check(CLI::IsMember({"low", "high"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*sim) {
            cfg.mode = random_count > 0 ? CampaignMode::random : CampaignMode::exhaustive;
            cfg.count = random_count;
            cfg.shape = shape == "mixed" ? ProgramShape::mixed : ProgramShape::contend;
            cfg.mutation = mutation_from_string(mutation).value_or(Mutation::none);
            cfg.truncate = truncate;
            cfg.width = FieldWidth(width);
            if (cfg.keep_traces > 0 && out_dir.empty()) throw std::invalid_argument("--save-traces needs --out");
            return cmd_simulate(cfg, out_dir, quiet);
        }
        if (*check) return cmd_check(history_file, initial, check_budget);
        if (*bench) return cmd_bench(threads, ops, contention == "high" ? Contention::high : Contention::low);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return usage;
    }
    return usage;
}
