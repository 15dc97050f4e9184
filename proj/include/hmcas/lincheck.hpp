#pragma once

// Black-box linearizability checking of cas/read histories.
//
// The search is Wing & Gong's: repeatedly pick a call that is minimal in the
// real-time order among those not yet linearized, apply it to the sequential
// specification, and backtrack on a mismatching return value. Visited
// (linearized-set, state) pairs are memoized. Pending calls may be linearized
// with any return value or left out entirely.

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hmcas/history.hpp"

namespace hmcas {

/// Sequential compare-and-swap register.
struct SequentialCasSpec {
    word_t value = 0;

    /// cas(a, b): (b, 1) if value == a, else (value, 0). read(): (value, value).
    std::pair<SequentialCasSpec, word_t> apply(const HighOp& op) const {
        if (op.kind == OpKind::read) return {*this, value};
        if (value == op.a) return {SequentialCasSpec{op.b}, 1};
        return {*this, 0};
    }
    std::size_t hash() const noexcept { return std::hash<word_t>{}(value); }

    friend bool operator==(const SequentialCasSpec&, const SequentialCasSpec&) = default;
};

/// spec_apply in free-function form: (state', ret).
inline std::pair<word_t, word_t> spec_apply(word_t state, const HighOp& op) {
    auto [next, ret] = SequentialCasSpec{state}.apply(op);
    return {next.value, ret};
}

template <class S>
concept SequentialSpec = std::equality_comparable<S> && requires(const S s, const HighOp& op) {
    { s.apply(op) } -> std::same_as<std::pair<S, word_t>>;
    { s.hash() } -> std::convertible_to<std::size_t>;
};

enum class VerdictKind : std::uint8_t { accepted, rejected, budget_exceeded };

inline const char* to_string(VerdictKind k) noexcept {
    switch (k) {
    case VerdictKind::accepted: return "accepted";
    case VerdictKind::rejected: return "rejected";
    case VerdictKind::budget_exceeded: return "budget_exceeded";
    }
    return "?";
}

struct LinearizationVerdict {
    VerdictKind kind = VerdictKind::accepted;
    /// Indices into calls_of(history), in linearization order. Pending calls
    /// that were dropped do not appear.
    std::vector<std::size_t> witness;
    /// Shortest rejected prefix of the history (rejections only).
    std::optional<History> counterexample;
    std::size_t nodes = 0;

    bool accepted() const noexcept { return kind == VerdictKind::accepted; }
};

inline constexpr std::size_t default_search_budget = 10'000'000;

namespace detail {

template <SequentialSpec Spec>
class LinearizabilitySearch {
public:
    LinearizabilitySearch(const std::vector<Call>& calls, std::size_t budget)
        : calls_(calls), budget_(budget), linearized_((calls.size() + 63) / 64, 0) {
        for (const Call& c : calls) {
            if (!c.pending()) ++completed_left_;
        }
    }

    VerdictKind run(const Spec& initial) {
        if (search(initial)) return VerdictKind::accepted;
        return exhausted_ ? VerdictKind::budget_exceeded : VerdictKind::rejected;
    }

    const std::vector<std::size_t>& order() const noexcept { return order_; }
    std::size_t nodes() const noexcept { return nodes_; }

private:
    struct Key {
        std::vector<std::uint64_t> bits;
        Spec state;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            std::size_t h = k.state.hash();
            for (auto w : k.bits) h = h * 1000003u ^ std::hash<std::uint64_t>{}(w);
            return h;
        }
    };

    bool is_set(std::size_t i) const { return (linearized_[i / 64] >> (i % 64)) & 1u; }
    void flip(std::size_t i) { linearized_[i / 64] ^= std::uint64_t{1} << (i % 64); }

    bool search(const Spec& state) {
        if (completed_left_ == 0) return true;
        if (!seen_.insert(Key{linearized_, state}).second) return false;
        if (++nodes_ > budget_) {
            exhausted_ = true;
            return false;
        }

        // A call may go next only if no unlinearized completed call returned
        // before it was invoked.
        std::size_t horizon = std::numeric_limits<std::size_t>::max();
        for (std::size_t i = 0; i < calls_.size(); ++i) {
            if (!is_set(i) && !calls_[i].pending()) horizon = std::min(horizon, *calls_[i].res_step);
        }

        for (std::size_t i = 0; i < calls_.size(); ++i) {
            const Call& c = calls_[i];
            if (is_set(i) || c.inv_step > horizon) continue;
            auto [next, ret] = state.apply(c.op);
            if (!c.pending() && ret != *c.ret) continue;
            flip(i);
            if (!c.pending()) --completed_left_;
            order_.push_back(i);
            if (search(next)) return true;
            order_.pop_back();
            if (!c.pending()) ++completed_left_;
            flip(i);
            if (exhausted_) return false;
        }
        return false;
    }

    const std::vector<Call>& calls_;
    std::size_t budget_;
    std::vector<std::uint64_t> linearized_;
    std::size_t completed_left_ = 0;
    std::size_t nodes_ = 0;
    bool exhausted_ = false;
    std::vector<std::size_t> order_;
    std::unordered_set<Key, KeyHash> seen_;
};

template <SequentialSpec Spec>
LinearizationVerdict check_calls(const std::vector<Call>& calls, const Spec& initial, std::size_t budget) {
    LinearizabilitySearch<Spec> search(calls, budget);
    LinearizationVerdict v;
    v.kind = search.run(initial);
    v.nodes = search.nodes();
    if (v.accepted()) v.witness = search.order();
    return v;
}

}  // namespace detail

/// Decide whether `history` (single object) is linearizable with respect to
/// `initial`. `budget` bounds the number of search nodes; running out yields
/// budget_exceeded, never rejected.
template <SequentialSpec Spec>
LinearizationVerdict check_linearizable(const History& history, const Spec& initial,
                                        std::size_t budget = default_search_budget) {
    auto verdict = detail::check_calls(calls_of(history), initial, budget);
    if (verdict.kind != VerdictKind::rejected) return verdict;

    // Shortest rejected prefix. Cutting a history turns calls whose response
    // lies beyond the cut into pending calls.
    for (std::size_t len = 1; len <= history.size(); ++len) {
        History prefix(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(len));
        auto v = detail::check_calls(calls_of(prefix), initial, budget);
        if (v.kind == VerdictKind::rejected) {
            verdict.counterexample = std::move(prefix);
            break;
        }
    }
    return verdict;
}

inline LinearizationVerdict check_linearizable(const History& history, word_t initial_value,
                                               std::size_t budget = default_search_budget) {
    return check_linearizable(history, SequentialCasSpec{initial_value}, budget);
}

/// Check every object of a multi-object history separately; the first
/// non-accepted verdict wins.
inline LinearizationVerdict check_each_object(const History& history, std::span<const word_t> initial_values,
                                              std::size_t budget = default_search_budget) {
    LinearizationVerdict total;
    for (std::size_t k = 0; k < initial_values.size(); ++k) {
        auto v = check_linearizable(project(history, k), initial_values[k], budget);
        total.nodes += v.nodes;
        if (!v.accepted()) {
            v.nodes = total.nodes;
            return v;
        }
    }
    return total;
}

}  // namespace hmcas
