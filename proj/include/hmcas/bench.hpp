#pragma once

// Throughput of a native hardware CAS cell against the register-built CAS,
// from real threads. Raw numbers only; nothing here passes or fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <thread>
#include <vector>

#include "hmcas/cas_object.hpp"

namespace hmcas {

enum class Contention : std::uint8_t { low, high };

struct BenchColumn {
    double ops_per_sec = 0;
    std::size_t cas_calls = 0;
    std::size_t successful = 0;
};

struct BenchReport {
    std::size_t threads = 0;
    std::size_t ops_per_thread = 0;
    Contention contention = Contention::high;
    BenchColumn native;
    BenchColumn simulated;
    int max_contended_register_ops = 0;  // largest count over cas calls that competed
    double mean_cas_register_ops = 0;
    int guard_fail_register_ops = 0;     // a cas whose expected value is stale
    int read_register_ops = 0;
};

namespace detail {

struct alignas(64) PaddedCell {
    std::atomic<std::uint64_t> value{0};
};

template <class Body>
double timed_threads(std::size_t threads, Body&& body) {
    std::atomic<bool> go{false};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
            while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
            body(t);
        });
    }
    auto start = std::chrono::steady_clock::now();
    go.store(true, std::memory_order_release);
    workers.clear();  // join
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Each thread performs `ops` read-then-cas(v, v + 1) increments. High
/// contention: one shared cell/object. Low: one cell/object per thread.
/// Thread t drives pid t + 1.
inline BenchReport run_bench(std::size_t threads, std::size_t ops, Contention contention) {
    threads = std::max<std::size_t>(threads, 1);
    BenchReport r;
    r.threads = threads;
    r.ops_per_thread = ops;
    r.contention = contention;
    const std::size_t cells = contention == Contention::high ? 1 : threads;
    auto cell_of = [&](std::size_t t) { return contention == Contention::high ? 0 : t; };

    {
        auto native = std::make_unique<detail::PaddedCell[]>(cells);
        std::vector<std::size_t> wins(threads, 0);
        double secs = detail::timed_threads(threads, [&](std::size_t t) {
            auto& cell = native[cell_of(t)].value;
            for (std::size_t i = 0; i < ops; ++i) {
                std::uint64_t v = cell.load();
                if (cell.compare_exchange_strong(v, v + 1)) ++wins[t];
            }
        });
        r.native.cas_calls = threads * ops;
        for (auto w : wins) r.native.successful += w;
        r.native.ops_per_sec = secs > 0 ? static_cast<double>(r.native.cas_calls) / secs : 0;
    }

    {
        std::vector<word_t> init(cells, 0);
        LiveMultiCas sim(threads, init);
        std::vector<std::size_t> wins(threads, 0);
        std::vector<int> max_ops(threads, 0);
        std::vector<std::size_t> total_ops(threads, 0);
        double secs = detail::timed_threads(threads, [&](std::size_t t) {
            const ProcessId pid = t + 1;
            const std::size_t k = cell_of(t);
            for (std::size_t i = 0; i < ops; ++i) {
                word_t v = sim.run(pid, HighOp::read(k)).result;
                CallOutcome out = sim.run(pid, HighOp::cas(v, v + 1, k));
                wins[t] += out.result;
                total_ops[t] += static_cast<std::size_t>(out.register_ops);
                if (out.register_ops > 1) max_ops[t] = std::max(max_ops[t], out.register_ops);
            }
        });
        r.simulated.cas_calls = threads * ops;
        std::size_t all_ops = 0;
        for (std::size_t t = 0; t < threads; ++t) {
            r.simulated.successful += wins[t];
            all_ops += total_ops[t];
            r.max_contended_register_ops = std::max(r.max_contended_register_ops, max_ops[t]);
        }
        r.simulated.ops_per_sec = secs > 0 ? static_cast<double>(r.simulated.cas_calls) / secs : 0;
        r.mean_cas_register_ops =
            r.simulated.cas_calls ? static_cast<double>(all_ops) / static_cast<double>(r.simulated.cas_calls) : 0;

        word_t current = sim.run(1, HighOp::read(0)).result;
        r.read_register_ops = sim.run(1, HighOp::read(0)).register_ops;
        r.guard_fail_register_ops = sim.run(1, HighOp::cas(current + 1, current + 2, 0)).register_ops;
    }
    return r;
}

}  // namespace hmcas
